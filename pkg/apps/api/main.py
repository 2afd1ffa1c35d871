"""HTTP front end of the prosumage scenario service.

``/scenarios`` lists the built-in tariff catalog, validates flat scenario
mappings and solves one scenario window on request; ``/report`` renders a
PDF summary of a solved scenario. Runs are synchronous and hold no state
between requests.
"""

import logging
import os
from typing import List, Tuple

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from core.scenarios.catalog import builtin_catalog

from .routers import report, scenarios

logger = logging.getLogger(__name__)


def cors_settings(raw: str) -> Tuple[List[str], bool]:
    """Allowed origins and the credentials flag for ``CORS_ALLOW_ORIGINS``.

    A wildcard disables credentials, since browsers refuse credentialed
    requests against ``*``.
    """

    origins = [origin.strip() for origin in raw.split(",") if origin.strip()]
    if not origins or origins == ["*"]:
        return ["*"], False
    if "*" in origins:
        raise ValueError("CORS_ALLOW_ORIGINS cannot mix '*' with explicit origins")
    return origins, True


app = FastAPI(title="Prosumage scenario API", version="0.1.0")

allow_origins, allow_credentials = cors_settings(os.getenv("CORS_ALLOW_ORIGINS", "*"))
app.add_middleware(
    CORSMiddleware,
    allow_origins=allow_origins,
    allow_credentials=allow_credentials,
    allow_methods=["*"],
    allow_headers=["*"],
)
logger.info("prosumage scenario API: %d built-in scenarios, CORS origins %s", len(builtin_catalog()), allow_origins)


@app.get("/health")
def health():
    return {"ok": True, "scenarios": len(builtin_catalog())}


app.include_router(scenarios.router)
app.include_router(report.router)
