"""Primal-dual LP solutions through HiGHS (dual simplex).

The solver returns a vertex solution together with one valid dual vertex.
Duals follow the sensitivity convention ``y_i = d objective / d rhs_i``, so
``<=`` rows carry ``y <= 0`` and ``>=`` rows ``y >= 0`` at a minimum; reduced
costs are ``d = c - A^T y``. Dual vectors of degenerate problems are not
unique and callers must not assume they are.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from core.lp.program import EQ, GE, LE, LinearProgram

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-7
# an optimal status promises primal residual and duality gap within this bound
ACCURACY = 1e-6
RESOLVE_TIGHTENING = 0.01
# smallest feasibility tolerance HiGHS accepts
MIN_TOLERANCE = 1e-10


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL = "numerical_error"


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    objective: float
    dual_objective: float = float("nan")
    primal_residual: float = float("nan")
    duality_gap: float = float("nan")
    iterations: int = 0
    message: str = ""
    var_blocks: Mapping[str, np.ndarray] = field(default_factory=dict, repr=False)
    row_blocks: Mapping[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def value(self, block: str) -> np.ndarray:
        return self.x[self.var_blocks[block]]

    def scalar(self, block: str) -> float:
        return float(self.x[self.var_blocks[block]][0])

    def dual(self, block: str) -> np.ndarray:
        return self.duals[self.row_blocks[block]]

    def reduced(self, block: str) -> np.ndarray:
        return self.reduced_costs[self.var_blocks[block]]


class LpSolveError(RuntimeError):
    """Raised when a model that must be solvable is not solved to optimality."""

    def __init__(self, message: str, solution: LpSolution | None = None):
        super().__init__(message)
        self.solution = solution

    @property
    def status(self) -> LpStatus | None:
        return None if self.solution is None else self.solution.status


def _pow2_scale(max_abs: np.ndarray) -> np.ndarray:
    out = np.ones_like(max_abs)
    nz = max_abs > 0
    out[nz] = np.exp2(-np.round(np.log2(max_abs[nz])))
    return out


def _equilibrate(A: sp.csr_matrix):
    """Row then column power-of-two scaling; exact in floating point."""

    m, n = A.shape
    if m == 0 or A.nnz == 0:
        return A.tocsr(), np.ones(m), np.ones(n)
    row_max = np.asarray(abs(A).max(axis=1).todense()).ravel()
    r = _pow2_scale(row_max)
    A1 = sp.diags(r) @ A
    col_max = np.asarray(abs(A1).max(axis=0).todense()).ravel()
    s = _pow2_scale(col_max)
    return (A1 @ sp.diags(s)).tocsr(), r, s


def _row_activity_violation(lp: LinearProgram, x: np.ndarray) -> np.ndarray:
    ax = lp.A @ x if lp.num_rows else np.zeros(0)
    senses = lp.senses_array()
    viol = np.zeros(lp.num_rows)
    le, ge, eq = senses == LE, senses == GE, senses == EQ
    viol[le] = np.maximum(ax[le] - lp.rhs[le], 0.0)
    viol[ge] = np.maximum(lp.rhs[ge] - ax[ge], 0.0)
    viol[eq] = np.abs(ax[eq] - lp.rhs[eq])
    return viol / (1.0 + np.abs(lp.rhs))


def primal_residual(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest scaled row or bound violation of ``x``."""

    row = _row_activity_violation(lp, x)
    lo = np.where(np.isfinite(lp.lower), np.maximum(lp.lower - x, 0.0) / (1.0 + np.abs(lp.lower)), 0.0)
    hi = np.where(np.isfinite(lp.upper), np.maximum(x - lp.upper, 0.0) / (1.0 + np.abs(lp.upper)), 0.0)
    parts = [a for a in (row, lo, hi) if a.size]
    return float(max((p.max() for p in parts), default=0.0))


def dual_objective(lp: LinearProgram, x: np.ndarray, y: np.ndarray, d: np.ndarray) -> float:
    """Lagrangian dual value; infinite bounds contribute ``d * x`` (zero at an optimum)."""

    pos, neg = np.maximum(d, 0.0), np.minimum(d, 0.0)
    lower_term = np.where(np.isfinite(lp.lower), lp.lower, x) * pos
    upper_term = np.where(np.isfinite(lp.upper), lp.upper, x) * neg
    return float(lp.rhs @ y + lower_term.sum() + upper_term.sum() + lp.objective_offset)


def complementarity_residual(lp: LinearProgram, sol: LpSolution) -> float:
    """Largest scaled complementarity product of ``sol``.

    Reduced costs are paired with the distance to the bound they push
    against, duals with the slack of their inequality row. Both are divided
    by ``1 + |objective|``.
    """

    if lp.num_vars == 0 and lp.num_rows == 0:
        return 0.0
    x, d, y = sol.x, sol.reduced_costs, sol.duals
    with np.errstate(invalid="ignore"):
        dist_lo = np.where(np.isfinite(lp.lower), x - lp.lower, 1.0 + np.abs(x))
        dist_hi = np.where(np.isfinite(lp.upper), lp.upper - x, 1.0 + np.abs(x))
    var_terms = np.where(d > 0, d * np.abs(dist_lo), np.where(d < 0, -d * np.abs(dist_hi), 0.0))
    ax = lp.A @ x if lp.num_rows else np.zeros(0)
    senses = lp.senses_array()
    slack = np.where(senses == EQ, 0.0, lp.rhs - ax)
    row_terms = np.abs(y * slack)
    worst = max(float(var_terms.max(initial=0.0)), float(row_terms.max(initial=0.0)))
    return worst / (1.0 + abs(sol.objective))


def _empty_solution(lp: LinearProgram) -> LpSolution:
    x = np.clip(np.zeros(lp.num_vars), lp.lower, lp.upper)
    feasible = primal_residual(lp, x) == 0.0
    return LpSolution(
        status=LpStatus.OPTIMAL if feasible else LpStatus.INFEASIBLE,
        x=x,
        duals=np.zeros(lp.num_rows),
        reduced_costs=lp.c.copy(),
        objective=lp.objective_offset,
        dual_objective=lp.objective_offset,
        primal_residual=0.0 if feasible else float("inf"),
        duality_gap=0.0,
        message="no decision variables",
        var_blocks=lp.var_blocks,
        row_blocks=lp.row_blocks,
    )


def _split_rows(A: sp.csr_matrix, rhs: np.ndarray, senses: np.ndarray):
    le, ge, eq = senses == LE, senses == GE, senses == EQ
    ub_rows = np.flatnonzero(le | ge)
    sign = np.where(ge[ub_rows], -1.0, 1.0)
    A_ub = sp.diags(sign) @ A[ub_rows] if ub_rows.size else None
    b_ub = sign * rhs[ub_rows] if ub_rows.size else None
    eq_rows = np.flatnonzero(eq)
    A_eq = A[eq_rows] if eq_rows.size else None
    b_eq = rhs[eq_rows] if eq_rows.size else None
    return A_ub, b_ub, ub_rows, sign, A_eq, b_eq, eq_rows


def solve_lp(lp: LinearProgram, tolerance: float = DEFAULT_TOLERANCE, time_limit: float | None = None) -> LpSolution:
    """Solve ``lp`` to an optimal vertex or a certified failure status.

    Parameters
    ----------
    lp:
        The problem. It is equilibrated internally; all returned quantities
        refer to the original units.
    tolerance:
        Primal and dual feasibility tolerance handed to HiGHS (scaled data).
    time_limit:
        Optional wall-clock limit in seconds.

    Returns
    -------
    LpSolution
        ``status`` is ``optimal`` only when the recovered primal-dual pair has
        primal residual and duality gap within ``ACCURACY``. A first answer
        outside that bound is re-solved once with tighter tolerances; if the
        second one misses it too the status is ``numerical_error``.
    """

    if lp.num_vars == 0:
        return _empty_solution(lp)

    sol = _solve_once(lp, tolerance, time_limit)
    if sol.optimal and not _accurate(sol):
        tighter = max(tolerance * RESOLVE_TIGHTENING, MIN_TOLERANCE)
        logger.warning(
            "LP %s: inaccurate optimum (primal residual %.3g, duality gap %.3g), re-solving with tolerance %.1g",
            lp.name, sol.primal_residual, sol.duality_gap, tighter,
        )
        sol = _solve_once(lp, tighter, time_limit)
        if sol.optimal and not _accurate(sol):
            message = f"solution check failed: primal residual {sol.primal_residual:.3g}, duality gap {sol.duality_gap:.3g}"
            logger.warning("LP %s: %s", lp.name, message)
            sol = replace(sol, status=LpStatus.NUMERICAL, message=message)
    return sol


def _accurate(sol: LpSolution) -> bool:
    return sol.primal_residual <= ACCURACY and sol.duality_gap <= ACCURACY


def _solve_once(lp: LinearProgram, tolerance: float, time_limit: float | None) -> LpSolution:
    A_s, r, s = _equilibrate(lp.A)
    c_s = lp.c * s
    c_max = float(np.max(np.abs(c_s))) if c_s.size else 0.0
    sigma = float(_pow2_scale(np.array([c_max]))[0]) if c_max > 0 else 1.0
    rhs_s = lp.rhs * r
    bounds = np.column_stack([lp.lower / s, lp.upper / s])
    senses = lp.senses_array()
    A_ub, b_ub, ub_rows, sign, A_eq, b_eq, eq_rows = _split_rows(A_s, rhs_s, senses)

    options = {
        "presolve": True,
        "primal_feasibility_tolerance": tolerance,
        "dual_feasibility_tolerance": tolerance,
    }
    if time_limit is not None:
        options["time_limit"] = float(time_limit)

    def run(cost):
        return linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs-ds", options=options)

    res = run(c_s * sigma)
    status = {0: LpStatus.OPTIMAL, 1: LpStatus.ITERATION_LIMIT, 4: LpStatus.NUMERICAL}.get(res.status)
    if res.status in (2, 3):
        # HiGHS may report "infeasible or unbounded"; a pure feasibility solve decides.
        feas = run(np.zeros_like(c_s))
        if feas.status == 0:
            status = LpStatus.UNBOUNDED
        elif feas.status == 2:
            status = LpStatus.INFEASIBLE
        else:
            status = LpStatus.NUMERICAL
    if status is None:
        status = LpStatus.NUMERICAL

    iterations = int(getattr(res, "nit", 0) or 0)
    if status is not LpStatus.OPTIMAL or res.x is None:
        logger.info("LP %s: %s (%s)", lp.name, status.value, res.message)
        n = lp.num_vars
        return LpSolution(
            status=status,
            x=np.full(n, np.nan),
            duals=np.full(lp.num_rows, np.nan),
            reduced_costs=np.full(n, np.nan),
            objective=float("nan"),
            iterations=iterations,
            message=str(res.message),
            var_blocks=lp.var_blocks,
            row_blocks=lp.row_blocks,
        )

    x = np.asarray(res.x, dtype=float) * s
    y = np.zeros(lp.num_rows)
    if ub_rows.size:
        y[ub_rows] = sign * np.asarray(res.ineqlin.marginals, dtype=float) * r[ub_rows] / sigma
    if eq_rows.size:
        y[eq_rows] = np.asarray(res.eqlin.marginals, dtype=float) * r[eq_rows] / sigma
    d = lp.c - (lp.A.T @ y if lp.num_rows else 0.0)

    objective = float(lp.c @ x + lp.objective_offset)
    dual_obj = dual_objective(lp, x, y, d)
    gap = abs(objective - dual_obj) / (1.0 + abs(objective))
    residual = primal_residual(lp, x)
    message = str(res.message)

    logger.info(
        "LP %s: %s, objective %.10g, %d iterations (%d vars, %d rows)",
        lp.name, status.value, objective, iterations, lp.num_vars, lp.num_rows,
    )
    return LpSolution(
        status=status,
        x=x,
        duals=y,
        reduced_costs=d,
        objective=objective,
        dual_objective=dual_obj,
        primal_residual=residual,
        duality_gap=gap,
        iterations=iterations,
        message=message,
        var_blocks=MappingProxyType(dict(lp.var_blocks)),
        row_blocks=MappingProxyType(dict(lp.row_blocks)),
    )


def require_optimal(sol: LpSolution, what: str) -> LpSolution:
    if not sol.optimal:
        raise LpSolveError(f"{what}: LP {sol.status.value} ({sol.message})", sol)
    return sol


def restrict_solution(
    sol: LpSolution,
    lp: LinearProgram,
    cols: np.ndarray,
    rows: np.ndarray,
    x_scale: float = 1.0,
    dual_scale: float = 1.0,
) -> LpSolution:
    """Primal-dual pair of a sub-problem cut out of a larger solution.

    ``lp`` is the sub-problem in its own units: its variables are
    ``sol.x[cols] / x_scale`` and its row duals ``sol.duals[rows] *
    dual_scale``. Reduced costs, objective and the accuracy figures are
    recomputed against ``lp``, so coupling terms of the larger problem
    must already sit in its costs or right-hand side.
    """

    if len(cols) != lp.num_vars or len(rows) != lp.num_rows:
        raise ValueError("column and row selections must match the sub-problem")
    x = np.asarray(sol.x[cols], dtype=float) / x_scale
    y = np.asarray(sol.duals[rows], dtype=float) * dual_scale
    d = lp.c - (lp.A.T @ y if lp.num_rows else 0.0)
    objective = float(lp.c @ x + lp.objective_offset)
    dual_obj = dual_objective(lp, x, y, d)
    return LpSolution(
        status=sol.status,
        x=x,
        duals=y,
        reduced_costs=d,
        objective=objective,
        dual_objective=dual_obj,
        primal_residual=primal_residual(lp, x),
        duality_gap=abs(objective - dual_obj) / (1.0 + abs(objective)),
        iterations=sol.iterations,
        message=sol.message,
        var_blocks=MappingProxyType(dict(lp.var_blocks)),
        row_blocks=MappingProxyType(dict(lp.row_blocks)),
    )
