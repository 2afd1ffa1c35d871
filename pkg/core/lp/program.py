"""Sparse linear programs with named variable and constraint blocks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike

LE, EQ, GE = "<=", "=", ">="
_SENSES = {"<=": LE, "<": LE, "=": EQ, "==": EQ, ">=": GE, ">": GE}

Term = Union[Tuple[ArrayLike, ArrayLike], Tuple[ArrayLike, ArrayLike, ArrayLike]]


def _frozen(arr: ArrayLike, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LinearProgram:
    """``min c.x + offset`` subject to ``A x (<=|=|>=) rhs`` and ``lower <= x <= upper``.

    Variables and rows are addressed either by position or through the
    ``var_blocks`` / ``row_blocks`` maps (block name to index array). The
    instance is immutable once built.
    """

    c: np.ndarray
    A: sp.csr_matrix
    senses: Tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: Tuple[str, ...]
    row_names: Tuple[str, ...]
    var_blocks: Mapping[str, np.ndarray] = field(default_factory=dict)
    row_blocks: Mapping[str, np.ndarray] = field(default_factory=dict)
    objective_offset: float = 0.0
    name: str = "lp"

    def __post_init__(self):
        n, m = len(self.var_names), len(self.row_names)
        object.__setattr__(self, "c", _frozen(self.c))
        object.__setattr__(self, "rhs", _frozen(self.rhs))
        object.__setattr__(self, "lower", _frozen(self.lower))
        object.__setattr__(self, "upper", _frozen(self.upper))
        object.__setattr__(self, "A", sp.csr_matrix(self.A, shape=(m, n), dtype=float))
        object.__setattr__(self, "var_blocks", MappingProxyType({k: _frozen(v, int) for k, v in self.var_blocks.items()}))
        object.__setattr__(self, "row_blocks", MappingProxyType({k: _frozen(v, int) for k, v in self.row_blocks.items()}))
        if self.c.shape != (n,) or self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("objective and bounds must have one entry per variable")
        if self.rhs.shape != (m,) or len(self.senses) != m:
            raise ValueError("rhs and senses must have one entry per constraint")
        if len(set(self.var_names)) != n:
            raise ValueError("duplicate variable names")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.rhs)) and np.all(np.isfinite(self.A.data))):
            raise ValueError("objective, constraint and rhs coefficients must be finite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)) or np.any(self.lower > self.upper):
            raise ValueError("every variable needs lower <= upper")
        if not np.isfinite(self.objective_offset):
            raise ValueError("objective offset must be finite")
        if any(s not in (LE, EQ, GE) for s in self.senses):
            raise ValueError(f"unknown constraint sense in {set(self.senses)}")

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    def block(self, name: str) -> np.ndarray:
        return self.var_blocks[name]

    def rows(self, name: str) -> np.ndarray:
        return self.row_blocks[name]

    def senses_array(self) -> np.ndarray:
        return np.array(self.senses, dtype=object)


class LpBuilder:
    """Incremental, vectorised assembly of a :class:`LinearProgram`.

    Constraints are added block-wise: ``add_constraints`` creates ``count``
    rows and every term ``(cols, coefs[, rows])`` contributes ``coefs[k] *
    x[cols[k]]`` to local row ``rows[k]`` (``k`` when ``rows`` is omitted).
    Scalars broadcast, so a single capacity variable can appear in every row.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self._names: List[str] = []
        self._lower: List[np.ndarray] = []
        self._upper: List[np.ndarray] = []
        self._cost: List[np.ndarray] = []
        self._var_blocks: Dict[str, np.ndarray] = {}
        self._row_names: List[str] = []
        self._senses: List[str] = []
        self._rhs: List[np.ndarray] = []
        self._row_blocks: Dict[str, np.ndarray] = {}
        self._entries: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._n = 0
        self._m = 0
        self.objective_offset = 0.0

    def add_variables(self, block: str, count: int, lower=0.0, upper=np.inf, cost=0.0) -> np.ndarray:
        if block in self._var_blocks:
            raise ValueError(f"variable block {block!r} already defined")
        idx = np.arange(self._n, self._n + count)
        self._names.extend(f"{block}({i})" for i in range(count))
        self._lower.append(np.broadcast_to(np.asarray(lower, dtype=float), (count,)).copy())
        self._upper.append(np.broadcast_to(np.asarray(upper, dtype=float), (count,)).copy())
        self._cost.append(np.broadcast_to(np.asarray(cost, dtype=float), (count,)).copy())
        self._var_blocks[block] = idx
        self._n += count
        return idx

    def add_variable(self, name: str, lower=0.0, upper=np.inf, cost=0.0) -> int:
        if name in self._var_blocks:
            raise ValueError(f"variable {name!r} already defined")
        self._names.append(name)
        self._lower.append(np.array([lower], dtype=float))
        self._upper.append(np.array([upper], dtype=float))
        self._cost.append(np.array([cost], dtype=float))
        self._var_blocks[name] = np.array([self._n])
        self._n += 1
        return self._n - 1

    def add_constraints(self, block: str, count: int, terms: Iterable[Term], sense: str, rhs=0.0) -> np.ndarray:
        if block in self._row_blocks:
            raise ValueError(f"constraint block {block!r} already defined")
        if sense not in _SENSES:
            raise ValueError(f"unknown constraint sense {sense!r}")
        local_all = np.arange(count)
        for term in terms:
            cols, coefs = term[0], term[1]
            local = np.asarray(term[2]) if len(term) == 3 else local_all
            cols = np.broadcast_to(np.asarray(cols, dtype=int), local.shape)
            coefs = np.broadcast_to(np.asarray(coefs, dtype=float), local.shape)
            self._entries.append((local + self._m, cols.copy(), coefs.copy()))
        idx = np.arange(self._m, self._m + count)
        self._row_names.extend(f"{block}({i})" for i in range(count))
        self._senses.extend([_SENSES[sense]] * count)
        self._rhs.append(np.broadcast_to(np.asarray(rhs, dtype=float), (count,)).copy())
        self._row_blocks[block] = idx
        self._m += count
        return idx

    def build(self) -> LinearProgram:
        def cat(parts: Sequence[np.ndarray]) -> np.ndarray:
            return np.concatenate(parts) if parts else np.zeros(0)

        if self._entries:
            rows = np.concatenate([e[0] for e in self._entries])
            cols = np.concatenate([e[1] for e in self._entries])
            vals = np.concatenate([e[2] for e in self._entries])
        else:
            rows = cols = np.zeros(0, dtype=int)
            vals = np.zeros(0)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(self._m, self._n)).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        return LinearProgram(
            c=cat(self._cost),
            A=A,
            senses=tuple(self._senses),
            rhs=cat(self._rhs),
            lower=cat(self._lower),
            upper=cat(self._upper),
            var_names=tuple(self._names),
            row_names=tuple(self._row_names),
            var_blocks=dict(self._var_blocks),
            row_blocks=dict(self._row_blocks),
            objective_offset=float(self.objective_offset),
            name=self.name,
        )


def from_dense(
    c: ArrayLike,
    A: ArrayLike | None = None,
    senses: Sequence[str] = (),
    rhs: ArrayLike = (),
    lower: ArrayLike | float = 0.0,
    upper: ArrayLike | float = np.inf,
    name: str = "lp",
) -> LinearProgram:
    """Small LPs from dense arrays: variables ``x(i)``, one row block ``r<i>`` per constraint."""

    c = np.asarray(c, dtype=float)
    n = c.size
    b = LpBuilder(name)
    x = b.add_variables("x", n, lower, upper, c)
    if A is not None and len(senses):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        rhs = np.asarray(rhs, dtype=float)
        for i, s in enumerate(senses):
            nz = np.flatnonzero(A[i])
            b.add_constraints(f"r{i}", 1, [(x[nz], A[i, nz], np.zeros(nz.size, dtype=int))], s, rhs[i])
    return b.build()


def rescale(lp: LinearProgram, var_scale: float, cost_scale: float) -> LinearProgram:
    """Same problem in variables ``var_scale * x`` and objective units ``cost_scale * c``.

    Every row is homogeneous in ``x`` after the change of variables, so
    ``rhs`` and bounds scale with ``var_scale`` and the matrix is unchanged.
    """

    if not (var_scale > 0 and cost_scale > 0):
        raise ValueError("scale factors must be positive")
    return replace(
        lp,
        c=lp.c * (cost_scale / var_scale),
        rhs=lp.rhs * var_scale,
        lower=lp.lower * var_scale,
        upper=lp.upper * var_scale,
        objective_offset=lp.objective_offset * cost_scale,
    )


def stack(parts: Sequence[Tuple[str, LinearProgram]], name: str = "lp") -> Tuple[LinearProgram, Dict[str, Tuple[np.ndarray, np.ndarray]]]:
    """Block-diagonal union of independent programs.

    Names and blocks of every part get ``<prefix>.`` in front. The second
    return value maps each prefix to the column and row positions of its
    part in the union.
    """

    offsets: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    var_blocks: Dict[str, np.ndarray] = {}
    row_blocks: Dict[str, np.ndarray] = {}
    n = m = 0
    for prefix, part in parts:
        if prefix in offsets:
            raise ValueError(f"duplicate part {prefix!r}")
        offsets[prefix] = (np.arange(n, n + part.num_vars), np.arange(m, m + part.num_rows))
        var_blocks.update({f"{prefix}.{k}": v + n for k, v in part.var_blocks.items()})
        row_blocks.update({f"{prefix}.{k}": v + m for k, v in part.row_blocks.items()})
        n += part.num_vars
        m += part.num_rows
    lps = [part for _, part in parts]
    return (
        LinearProgram(
            c=np.concatenate([p.c for p in lps]),
            A=sp.block_diag([p.A for p in lps], format="csr"),
            senses=tuple(s for p in lps for s in p.senses),
            rhs=np.concatenate([p.rhs for p in lps]),
            lower=np.concatenate([p.lower for p in lps]),
            upper=np.concatenate([p.upper for p in lps]),
            var_names=tuple(f"{prefix}.{v}" for prefix, p in parts for v in p.var_names),
            row_names=tuple(f"{prefix}.{r}" for prefix, p in parts for r in p.row_names),
            var_blocks=var_blocks,
            row_blocks=row_blocks,
            objective_offset=float(sum(p.objective_offset for p in lps)),
            name=name,
        ),
        offsets,
    )


def with_entries(lp: LinearProgram, rows: ArrayLike, cols: ArrayLike, values: ArrayLike) -> LinearProgram:
    """Copy of ``lp`` with ``values`` added to the matrix at ``(rows, cols)``."""

    extra = sp.coo_matrix(
        (np.asarray(values, dtype=float), (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))),
        shape=lp.A.shape,
    )
    A = (lp.A + extra).tocsr()
    A.eliminate_zeros()
    return replace(lp, A=A)
