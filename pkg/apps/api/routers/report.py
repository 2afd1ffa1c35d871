from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field
from typing import Dict, Optional, Union
import base64, io
from reportlab.pdfgen import canvas
from reportlab.lib.pagesizes import A4

router = APIRouter(prefix="/report", tags=["report"])

# rows shown first, in this order, when present in the metrics record
HEADLINE = (
    ("pv_capacity", "PV capacity", "kW"),
    ("storage_energy_capacity", "Battery energy", "kWh"),
    ("storage_power_capacity", "Battery power", "kW"),
    ("sc_rate", "Self-consumption rate", ""),
    ("autarky_rate", "Autarky rate", ""),
    ("bill_net_total", "Annual bill", "EUR"),
    ("non_energy_contribution", "Grid fee and levy contribution", "EUR"),
    ("peak_feed_in", "Peak feed-in", "kW"),
    ("regime", "Investment regime", ""),
)


class ReportRequest(BaseModel):
    scenario: str = Field(..., min_length=1)
    status: str = "ok"
    metrics: Dict[str, Optional[Union[float, int, str, bool]]]
    note: Optional[str] = None


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return "-" if value is None else str(value)


@router.post("")
def make_report(req: ReportRequest):
    if not req.metrics:
        raise HTTPException(status_code=400, detail="metrics must not be empty")

    buffer = io.BytesIO()
    c = canvas.Canvas(buffer, pagesize=A4)
    width, height = A4
    c.setFont("Helvetica-Bold", 14)
    c.drawString(40, height - 50, f"Prosumage scenario {req.scenario}")
    c.setFont("Helvetica", 10)
    c.drawString(40, height - 66, f"Status: {req.status}")
    y = height - 92

    shown = set()
    for key, label, unit in HEADLINE:
        if key in req.metrics:
            c.drawString(40, y, f"{label}: {_fmt(req.metrics[key])} {unit}".rstrip())
            shown.add(key)
            y -= 14
    y -= 8
    c.setFont("Helvetica", 8)
    for key in sorted(k for k in req.metrics if k not in shown):
        if y < 60:
            c.showPage()
            c.setFont("Helvetica", 8)
            y = height - 50
        c.drawString(40, y, f"{key}: {_fmt(req.metrics[key])}")
        y -= 11

    if req.note:
        c.setFont("Helvetica-Oblique", 8)
        c.drawString(40, 40, req.note)
    c.showPage()
    c.save()
    pdf_bytes = buffer.getvalue()
    buffer.close()
    return {"pdf_base64": base64.b64encode(pdf_bytes).decode("ascii")}
