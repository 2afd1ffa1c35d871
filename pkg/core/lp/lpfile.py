"""CPLEX LP text dump for cross-checking a model with external solvers."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List

import numpy as np

from core.lp.program import EQ, GE, LE, LinearProgram

logger = logging.getLogger(__name__)

_LP_SENSE = {LE: "<=", EQ: "=", GE: ">="}


def _num(v: float) -> str:
    return repr(float(v))


def _linear(coefs: np.ndarray, names: List[str]) -> str:
    parts = []
    for k, (a, name) in enumerate(zip(coefs, names)):
        sign = "-" if a < 0 else "+"
        if k == 0 and sign == "+":
            parts.append(f"{_num(abs(a))} {name}")
        else:
            parts.append(f"{sign} {_num(abs(a))} {name}")
    return " ".join(parts)


def _zero(names) -> str:
    # the LP grammar needs at least one term per expression
    return f"0 {names[0]}" if names else "0"


def format_lp(lp: LinearProgram) -> str:
    """Render ``lp`` as CPLEX LP text, one constraint per line."""

    names = lp.var_names
    lines = [f"\\ {lp.name}"]
    if lp.objective_offset:
        lines.append(f"\\ objective offset {_num(lp.objective_offset)}")
    nz = np.flatnonzero(lp.c)
    obj = _linear(lp.c[nz], [names[j] for j in nz]) if nz.size else _zero(names)
    lines += ["Minimize", f" obj: {obj}", "Subject To"]
    A = lp.A.tocsr()
    for i, row in enumerate(lp.row_names):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        order = np.argsort(cols, kind="stable")
        body = _linear(vals[order], [names[j] for j in cols[order]])
        if not cols.size:
            body = _zero(names)
        lines.append(f" {row}: {body} {_LP_SENSE[lp.senses[i]]} {_num(lp.rhs[i])}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo == 0.0 and np.isposinf(hi):
            continue
        if np.isneginf(lo) and np.isposinf(hi):
            lines.append(f" {name} free")
        elif lo == hi:
            lines.append(f" {name} = {_num(lo)}")
        else:
            lo_s = "-inf" if np.isneginf(lo) else _num(lo)
            hi_s = "+inf" if np.isposinf(hi) else _num(hi)
            lines.append(f" {lo_s} <= {name} <= {hi_s}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(lp: LinearProgram, path) -> Path:
    path = Path(path)
    path.write_text(format_lp(lp), encoding="utf-8")
    logger.info("wrote LP dump %s (%d vars, %d rows)", path, lp.num_vars, lp.num_rows)
    return path
