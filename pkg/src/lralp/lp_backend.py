"""Dense revised simplex for inequality-form LPs.

Every LP in the package is either posed as

    minimize d'x  subject to  A x >= b,  x free             (inequality form)

and passed to :func:`solve_lp`, or is already in standard form
``min c'y s.t. M y = h, y >= 0`` and goes to :func:`solve_standard`.

:func:`solve_lp` works on the dual ``max b'y s.t. A'y = d, y >= 0``, which is in
standard form, so free primal variables need no splitting; the primal solution
is read off the simplex multipliers of the dual's equality rows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

FEAS_TOL = 1e-7      # relative primal feasibility
OPT_TOL = 1e-9       # reduced cost
PIVOT_TOL = 1e-9
PHASE1_TOL = 1e-9    # relative; phase-one optimum above this means infeasible


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericallyStalled(RuntimeError):
    """The pivot budget was exhausted; no status is claimed."""


@dataclass(frozen=True)
class LpProblem:
    """``min d'x s.t. A x >= b`` with ``x`` free."""

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.objective, dtype=float))
        A = np.atleast_2d(np.asarray(self.constraint_matrix, dtype=float))
        b = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        if A.shape != (b.size, d.size):
            raise ValueError(f"constraint matrix shape {A.shape} does not match "
                             f"rhs ({b.size}) and objective ({d.size})")
        if d.size < 1 or b.size < 1:
            raise ValueError("need at least one variable and one constraint")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(d))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "objective", d)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "rhs", b)

    @property
    def shape(self):
        return self.constraint_matrix.shape


@dataclass
class LpOutcome:
    """Result of :func:`solve_lp`.

    ``dual`` is ``y >= 0`` with ``A'y = d`` (optimal case).  ``ray`` is a primal
    direction with ``A z >= 0`` and ``d'z < 0`` (unbounded case).  ``farkas`` is
    ``y >= 0`` with ``A'y = 0`` and ``b'y > 0`` (infeasible case).
    """

    status: LpStatus
    x: Optional[np.ndarray] = None
    objective_value: Optional[float] = None
    dual: Optional[np.ndarray] = None
    ray: Optional[np.ndarray] = None
    farkas: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class StandardResult:
    status: LpStatus
    y: Optional[np.ndarray]        # primal point (optimal) or None
    pi: Optional[np.ndarray]       # multipliers of the equality rows
    ray: Optional[np.ndarray]      # unbounded direction in y
    phase1_value: float
    iterations: int


class _Tableau:
    """Revised simplex state over ``[M | artificials]``.

    The basis matrix is re-solved from scratch each pivot (dense LAPACK); this is
    cheap at the sizes used here and avoids drift in a product-form inverse.
    """

    def __init__(self, M: np.ndarray, h: np.ndarray, max_pivots: int):
        v, n = M.shape
        self.sign = np.where(h < 0, -1.0, 1.0)
        self.M = np.hstack([M * self.sign[:, None], np.eye(v)])
        self.h = h * self.sign
        self.n = n
        self.v = v
        self.basis = list(range(n, n + v))
        self.pivots = 0
        self.max_pivots = max_pivots
        self.bland = False
        self.degenerate_run = 0
        self.scale = max(1.0, float(np.max(np.abs(self.M[:, :n]))) if n else 1.0)

    def basic_values(self) -> np.ndarray:
        return np.linalg.solve(self.M[:, self.basis], self.h)

    def multipliers(self, cost: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.M[:, self.basis].T, cost[self.basis])

    def run(self, cost: np.ndarray, allowed: np.ndarray):
        """Minimise ``cost`` over the current basis; returns ('optimal'|'unbounded', ray)."""
        cscale = max(1.0, float(np.max(np.abs(cost))))
        while True:
            xB = self.basic_values()
            pi = self.multipliers(cost)
            red = cost - self.M.T @ pi
            cand = allowed.copy()
            cand[self.basis] = False
            red_c = np.where(cand, red, np.inf)
            thresh = -OPT_TOL * cscale
            if self.bland:
                hits = np.flatnonzero(red_c < thresh)
                if hits.size == 0:
                    return "optimal", None
                j = int(hits[0])
            else:
                j = int(np.argmin(red_c))
                if not red_c[j] < thresh:
                    return "optimal", None
            dcol = np.linalg.solve(self.M[:, self.basis], self.M[:, j])
            ptol = PIVOT_TOL * max(1.0, float(np.max(np.abs(dcol))))
            rows = np.flatnonzero(dcol > ptol)
            if rows.size == 0:
                ray = np.zeros(self.M.shape[1])
                ray[j] = 1.0
                ray[self.basis] = -dcol
                return "unbounded", ray
            ratios = np.maximum(xB[rows], 0.0) / dcol[rows]
            theta = ratios.min()
            ties = rows[ratios <= theta + 1e-12 * max(1.0, theta)]
            if self.bland:
                leave = min(ties, key=lambda i: self.basis[i])
            else:
                leave = ties[np.argmax(dcol[ties])]
            self._pivot(int(leave), j, theta)

    def _pivot(self, row: int, col: int, theta: float):
        self.basis[row] = col
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise NumericallyStalled(f"no convergence after {self.pivots} pivots")
        if theta <= 1e-12:
            self.degenerate_run += 1
            if self.degenerate_run > 2 * (self.n + self.v):
                self.bland = True
        else:
            self.degenerate_run = 0

    def drive_out_artificials(self):
        for row, var in enumerate(list(self.basis)):
            if var < self.n:
                continue
            B = self.M[:, self.basis]
            e = np.zeros(self.v)
            e[row] = 1.0
            rho = np.linalg.solve(B.T, e) @ self.M[:, :self.n]
            rho[[b for b in self.basis if b < self.n]] = 0.0
            j = int(np.argmax(np.abs(rho))) if self.n else 0
            if self.n and abs(rho[j]) > 1e-9 * self.scale:
                self.basis[row] = j
            # otherwise the row is redundant and the artificial stays basic at zero


def solve_standard(M, h, cost, max_pivots: Optional[int] = None) -> StandardResult:
    """``min cost'y s.t. M y = h, y >= 0`` by two-phase revised simplex.

    On INFEASIBLE, ``pi`` is a phase-one certificate: ``M'pi <= 0`` and
    ``h'pi > 0``.  On OPTIMAL, ``pi`` are the equality multipliers, so that
    ``cost - M'pi >= 0``.  On UNBOUNDED, ``ray >= 0`` with ``M ray = 0`` and
    ``cost'ray < 0``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    h = np.asarray(h, dtype=float).reshape(-1)
    cost = np.asarray(cost, dtype=float).reshape(-1)
    v, n = M.shape
    if h.size != v or cost.size != n:
        raise ValueError("dimension mismatch in standard-form LP")
    if max_pivots is None:
        max_pivots = 200 * (n + v) + 1000
    tab = _Tableau(M, h, max_pivots)

    # phase one
    c1 = np.concatenate([np.zeros(n), np.ones(v)])
    allowed = np.ones(n + v, dtype=bool)
    tab.run(c1, allowed)
    xB = tab.basic_values()
    p1 = float(sum(xB[i] for i, b in enumerate(tab.basis) if b >= n))
    if p1 > PHASE1_TOL * (1.0 + float(np.max(np.abs(h)))):
        pi = tab.multipliers(c1) * tab.sign
        return StandardResult(LpStatus.INFEASIBLE, None, pi, None, p1, tab.pivots)

    # phase two
    tab.drive_out_artificials()
    tab.bland = False
    tab.degenerate_run = 0
    c2 = np.concatenate([cost, np.zeros(v)])
    allowed[n:] = False
    status, ray = tab.run(c2, allowed)
    if status == "unbounded":
        return StandardResult(LpStatus.UNBOUNDED, None, None, ray[:n], p1, tab.pivots)
    y = np.zeros(n + v)
    y[tab.basis] = tab.basic_values()
    y = np.maximum(y[:n], 0.0)
    pi = tab.multipliers(c2) * tab.sign
    return StandardResult(LpStatus.OPTIMAL, y, pi, None, p1, tab.pivots)


def solve_lp(p: LpProblem) -> LpOutcome:
    """Solve ``min d'x s.t. A x >= b`` and return a certified tri-state outcome."""
    A, b, d = p.constraint_matrix, p.rhs, p.objective
    dual = solve_standard(A.T, d, -b)
    if dual.status is LpStatus.OPTIMAL:
        x = -dual.pi
        return LpOutcome(LpStatus.OPTIMAL, x=x, objective_value=float(d @ x),
                         dual=dual.y, iterations=dual.iterations)
    if dual.status is LpStatus.UNBOUNDED:
        # dual feasible and unbounded: the primal is infeasible
        return LpOutcome(LpStatus.INFEASIBLE, farkas=dual.ray, iterations=dual.iterations)
    # dual infeasible: primal is unbounded or infeasible; test primal feasibility
    ray = -dual.pi
    feas = solve_standard(A.T, np.zeros_like(d), -b)
    its = dual.iterations + feas.iterations
    if feas.status is LpStatus.OPTIMAL:
        return LpOutcome(LpStatus.UNBOUNDED, x=-feas.pi, ray=ray, iterations=its)
    return LpOutcome(LpStatus.INFEASIBLE, farkas=feas.ray, ray=ray, iterations=its)


def check_dual_feasibility(A, d) -> bool:
    """True iff some ``y >= 0`` satisfies ``A'y = d`` (phase one only)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = np.asarray(d, dtype=float).reshape(-1)
    res = solve_standard(A.T, d, np.zeros(A.shape[0]))
    return res.status is not LpStatus.INFEASIBLE


def solve_lp_batch(A, b, objectives) -> list:
    """Solve ``min d_i'x s.t. Ax >= b`` for each row ``d_i`` of ``objectives``.

    The constraint data is validated once; each LP is solved independently so the
    results do not depend on the order of evaluation.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    LpProblem(np.zeros(A.shape[1]), A, b)
    out = []
    for d in np.atleast_2d(objectives):
        out.append(_solve_trusted(A, b, d))
    return out


def _solve_trusted(A, b, d) -> LpOutcome:
    p = object.__new__(LpProblem)
    object.__setattr__(p, "objective", np.asarray(d, dtype=float))
    object.__setattr__(p, "constraint_matrix", A)
    object.__setattr__(p, "rhs", b)
    return solve_lp(p)
