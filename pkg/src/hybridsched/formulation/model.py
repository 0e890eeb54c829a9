"""Time-indexed binary ILP for latency-constrained min-resource scheduling.

Variables
    ``x_i_a``  1 iff node ``i`` runs in stage ``a``
    ``z_e_a``  1 iff edge ``e`` crosses the boundary between stages ``a`` and ``a+1``
    ``M``      peak stage population

Rows
    ``assign_i``  sum_a x_i_a = 1
    ``prec_e``    sum_a a*x_i_a - sum_a a*x_j_a <= c_e
    ``peak_a``    sum_i x_i_a - M <= 0
    ``cross_e_a`` cum_i(a) - cum_j(a) - z_e_a <= 0,  cum_i(a) = sum_{b<=a} x_i_b

Objective
    alpha * M / ceil(|V|/L) + sum_{e,a} w_e z_e_a / sum_e w_e
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ModelError
from ..graph import window_bounds
from .objective import DEFAULT_ALPHA, peak_scale, stage_loads


@dataclass(frozen=True)
class Problem:
    """Scheduling instance behind an :class:`IlpModel`."""

    dag: object
    latency: int
    alpha: float
    earliest: np.ndarray
    latest: np.ndarray

    @property
    def feasible(self):
        return bool(np.all(self.earliest <= self.latest))


@dataclass
class IlpModel:
    """A MILP in row form: ``min c.x`` s.t. ``A x (<=,=,>=) rhs``, ``lb <= x <= ub``.

    ``problem`` is set for models built by :func:`build_ilp` and ``None`` for
    models read back from an interchange file.
    """

    name: str
    var_names: list
    obj: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    A: sp.csr_matrix
    senses: list
    rhs: np.ndarray
    row_names: list
    problem: Problem | None = None
    _index: dict = field(default=None, repr=False)

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        self.A.sort_indices()
        idx = {n: k for k, n in enumerate(self.var_names)}
        if len(idx) != len(self.var_names):
            raise ModelError("variable name collision")
        if len(set(self.row_names)) != len(self.row_names):
            raise ModelError("row name collision")
        if set(idx) & set(self.row_names):
            raise ModelError("name shared by a row and a column")
        if self.A.shape != (len(self.row_names), len(self.var_names)):
            raise ModelError(f"matrix shape {self.A.shape} does not match name tables")
        if any(s not in "LEG" for s in self.senses) or len(self.senses) != self.A.shape[0]:
            raise ModelError("row senses must be 'L', 'E' or 'G', one per row")
        self._index = idx

    @property
    def num_vars(self):
        return len(self.var_names)

    @property
    def num_rows(self):
        return len(self.row_names)

    def index(self, name):
        return self._index[name]

    def has_var(self, name):
        return name in self._index

    def objective_value(self, x):
        return float(np.dot(self.obj, x))

    def row_violations(self, x, tol=1e-9):
        """Names of rows and bounds violated by the point ``x``."""
        act = self.A @ x
        bad = []
        for k, (s, r, v) in enumerate(zip(self.senses, self.rhs, act)):
            if (s == "L" and v > r + tol) or (s == "G" and v < r - tol) or (s == "E" and abs(v - r) > tol):
                bad.append(self.row_names[k])
        viol = np.nonzero((x < self.lb - tol) | (x > self.ub + tol))[0]
        bad += [f"bound:{self.var_names[k]}" for k in viol]
        return bad

    def _require_problem(self):
        if self.problem is None:
            raise ModelError("model carries no scheduling problem")
        return self.problem

    def encode(self, schedule):
        """Full variable vector (x one-hot, exact z, M = peak) of a schedule."""
        pb = self._require_problem()
        dag, L = pb.dag, pb.latency
        s = np.asarray(schedule, dtype=np.int64)
        x = np.zeros(self.num_vars)
        x[[self.index(x_name(i, a)) for i, a in enumerate(s)]] = 1.0
        for k, e in enumerate(dag.edges):
            for a in range(s[e.src], s[e.dst]):
                x[self.index(z_name(k, a))] = 1.0
        x[self.index("M")] = stage_loads(s, L).max()
        return x

    def decode(self, values):
        """Schedule from a ``{name: value}`` mapping or a full vector."""
        pb = self._require_problem()
        if not isinstance(values, dict):
            values = dict(zip(self.var_names, values))
        s = np.full(pb.dag.node_count, -1, dtype=np.int64)
        for i in range(pb.dag.node_count):
            on = [a for a in range(pb.latency) if values.get(x_name(i, a), 0.0) > 0.5]
            if len(on) != 1:
                raise ModelError(f"node {i} has {len(on)} active stage variables")
            s[i] = on[0]
        return s


def x_name(i, a):
    return f"x_{i}_{a}"


def z_name(e, a):
    return f"z_{e}_{a}"


def build_ilp(dag, latency, alpha=DEFAULT_ALPHA, name="sched", allow_infeasible=False):
    """Assemble the ILP of ``dag`` at ``latency``.

    Raises :class:`InfeasibleError` when some node has an empty stage window.
    With ``allow_infeasible`` the model is built anyway (every stage variable of
    such a node is fixed to zero, so the assignment row cannot be met); check
    :attr:`Problem.feasible`.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    earliest, latest = window_bounds(dag, latency, check=not allow_infeasible)
    n, L, E = dag.node_count, int(latency), dag.edge_count

    names = [x_name(i, a) for i in range(n) for a in range(L)]
    names += [z_name(e, a) for e in range(E) for a in range(L - 1)]
    names.append("M")
    xcol = lambda i, a: i * L + a
    zcol = lambda e, a: n * L + e * (L - 1) + a
    mcol = len(names) - 1

    obj = np.zeros(len(names))
    obj[mcol] = alpha / peak_scale(n, L)
    wsum = dag.total_weight
    if wsum > 0:
        for e, edge in enumerate(dag.edges):
            for a in range(L - 1):
                obj[zcol(e, a)] = edge.weight / wsum

    lb = np.zeros(len(names))
    ub = np.ones(len(names))
    ub[mcol] = np.inf
    integer = np.ones(len(names), dtype=bool)
    integer[mcol] = False
    for i in range(n):
        for a in range(L):
            if not earliest[i] <= a <= latest[i]:
                ub[xcol(i, a)] = 0.0

    rows, cols, vals = [], [], []
    senses, rhs, row_names = [], [], []

    def add_row(rname, entries, sense, b):
        r = len(row_names)
        for c, v in entries:
            if v != 0:
                rows.append(r)
                cols.append(c)
                vals.append(v)
        row_names.append(rname)
        senses.append(sense)
        rhs.append(b)

    for i in range(n):
        add_row(f"assign_{i}", [(xcol(i, a), 1.0) for a in range(L)], "E", 1.0)
    for e, edge in enumerate(dag.edges):
        entries = [(xcol(edge.src, a), float(a)) for a in range(L)]
        entries += [(xcol(edge.dst, a), -float(a)) for a in range(L)]
        add_row(f"prec_{e}", entries, "L", float(edge.diff_const))
    for a in range(L):
        add_row(f"peak_{a}", [(xcol(i, a), 1.0) for i in range(n)] + [(mcol, -1.0)], "L", 0.0)
    for e, edge in enumerate(dag.edges):
        for a in range(L - 1):
            entries = [(xcol(edge.src, b), 1.0) for b in range(a + 1)]
            entries += [(xcol(edge.dst, b), -1.0) for b in range(a + 1)]
            entries.append((zcol(e, a), -1.0))
            add_row(f"cross_{e}_{a}", entries, "L", 0.0)

    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(row_names), len(names)))
    return IlpModel(
        name=name,
        var_names=names,
        obj=obj,
        lb=lb,
        ub=ub,
        integer=integer,
        A=A,
        senses=senses,
        rhs=np.array(rhs, dtype=float),
        row_names=row_names,
        problem=Problem(dag, L, float(alpha), earliest, latest),
    )
