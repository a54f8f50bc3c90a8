"""Approximate linear programs over a linear basis."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .lp_backend import LpProblem, LpStatus, solve_lp, solve_lp_batch
from .mdp_core import Mdp, check_distribution, check_weights


class LpInfeasible(RuntimeError):
    pass


class LpUnbounded(RuntimeError):
    pass


@dataclass(frozen=True)
class BasisMatrix:
    """Feature matrix ``phi`` of shape ``(S, k)``; row ``s`` is the feature vector of state ``s``."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim == 1:
            phi = phi[:, None]
        if phi.ndim != 2 or phi.shape[1] < 1:
            raise ValueError("basis must be a 2-d array with at least one column")
        if not np.all(np.isfinite(phi)):
            raise ValueError("basis entries must be finite")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def n_states(self) -> int:
        return self.phi.shape[0]

    @property
    def k(self) -> int:
        return self.phi.shape[1]

    def span_coefficients(self, vec, tol: float = 1e-9) -> Optional[np.ndarray]:
        """Coefficients ``r0`` with ``phi @ r0 == vec``, or None if ``vec`` is not in the span."""
        vec = np.asarray(vec, dtype=float)
        r0, *_ = np.linalg.lstsq(self.phi, vec, rcond=None)
        err = np.max(np.abs(self.phi @ r0 - vec)) if vec.size else 0.0
        return r0 if err <= tol * max(1.0, float(np.max(np.abs(vec)))) else None

    def contains(self, vec, tol: float = 1e-9) -> bool:
        return self.span_coefficients(vec, tol) is not None

    def augment_with(self, vec) -> "BasisMatrix":
        """Append ``vec`` as a column unless it already lies in the span."""
        if self.contains(vec):
            return self
        return BasisMatrix(np.column_stack([self.phi, np.asarray(vec, dtype=float)]))

    def to_dict(self) -> dict:
        return {"n_states": self.n_states, "k": self.k, "columns": self.phi.T.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BasisMatrix":
        cols = np.asarray(d["columns"], dtype=float)
        B = cls(cols.T)
        if B.n_states != d["n_states"] or B.k != d["k"]:
            raise ValueError("declared n_states/k disagree with columns")
        return B

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "BasisMatrix":
        return cls.from_dict(json.loads(Path(path).read_text()))


def polynomial_basis(n_states: int, k: int, rescale: bool = True) -> BasisMatrix:
    """Columns ``1, s, ..., s^(k-1)`` for ``s = 0..S-1``, each scaled to unit max-norm."""
    if k < 1:
        raise ValueError("k must be at least 1")
    s = np.arange(n_states, dtype=float)
    phi = np.vander(s, k, increasing=True)
    if rescale:
        scale = np.max(np.abs(phi), axis=0)
        phi = phi / np.where(scale > 0, scale, 1.0)
    return BasisMatrix(phi)


def indicator_basis(labels, n_cells: Optional[int] = None) -> BasisMatrix:
    """State-aggregation basis: column ``j`` indicates the states with ``labels == j``."""
    labels = np.asarray(labels, dtype=int)
    n_cells = int(labels.max()) + 1 if n_cells is None else n_cells
    phi = np.zeros((labels.size, n_cells))
    phi[np.arange(labels.size), labels] = 1.0
    return BasisMatrix(phi)


def hierarchical_basis(n_states: int, branching: int, depth: int) -> BasisMatrix:
    """Indicators of the cells of a nested partition of ``0..S-1`` (all levels stacked)."""
    cols = []
    for level in range(depth):
        n_cells = min(branching ** level, n_states)
        labels = (np.arange(n_states) * n_cells) // n_states
        cols.append(indicator_basis(labels, n_cells).phi)
    return BasisMatrix(np.hstack(cols))


def alp_constraints(mdp: Mdp, phi: BasisMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Rows ``(phi - alpha P_a phi)`` and rhs ``g_a``, stacked action-major (``S*A`` rows)."""
    if phi.n_states != mdp.n_states:
        raise ValueError("basis and MDP disagree on the number of states")
    P_phi = mdp.transition @ phi.phi                      # (A, S, k)
    M = (phi.phi[None, :, :] - mdp.discount * P_phi).reshape(-1, phi.k)
    return M, mdp.reward.reshape(-1)


def build_alp(mdp: Mdp, phi: BasisMatrix, c) -> LpProblem:
    c = check_distribution(c, mdp.n_states)
    M, rhs = alp_constraints(mdp, phi)
    return LpProblem(phi.phi.T @ c, M, rhs)


def solve_alp(mdp: Mdp, phi: BasisMatrix, c) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(r_alp, J_alp)``; raises :class:`LpInfeasible` when no feasible ``r`` exists."""
    out = solve_lp(build_alp(mdp, phi, c))
    if out.status is LpStatus.INFEASIBLE:
        raise LpInfeasible("ALP infeasible: no superharmonic vector in the span of the basis")
    if out.status is LpStatus.UNBOUNDED:
        raise LpUnbounded("ALP unbounded (c must be positive on a feasible ALP)")
    return out.x, phi.phi @ out.x


def approximation_error(Jstar, phi: BasisMatrix, psi) -> Tuple[float, np.ndarray]:
    """``min_r ||J* - phi r||_{inf, psi}`` and an attaining ``r``."""
    Jstar = np.asarray(Jstar, dtype=float)
    psi = check_weights(psi, phi.n_states)
    P = phi.phi
    # variables (r, t):  phi r + t psi >= J*,  -phi r + t psi >= -J*
    A = np.block([[P, psi[:, None]], [-P, psi[:, None]]])
    b = np.concatenate([Jstar, -Jstar])
    d = np.zeros(phi.k + 1)
    d[-1] = 1.0
    out = solve_lp(LpProblem(d, A, b))
    if not out.is_optimal:  # pragma: no cover - always feasible and bounded
        raise RuntimeError(f"approximation-error LP returned {out.status.value}")
    r = out.x[:-1]
    eps = float(np.max(np.abs(Jstar - P @ r) / psi))
    return eps, r


def per_state_lp_values(phi: BasisMatrix, A, b, states=None) -> np.ndarray:
    """``min phi(s)'r s.t. A r >= b`` for each state; ``-inf`` if unbounded, ``+inf`` if infeasible."""
    states = np.arange(phi.n_states) if states is None else np.atleast_1d(states)
    vals = np.empty(len(states))
    for i, out in enumerate(solve_lp_batch(A, b, phi.phi[states])):
        if out.status is LpStatus.OPTIMAL:
            vals[i] = out.objective_value
        elif out.status is LpStatus.UNBOUNDED:
            vals[i] = -np.inf
        else:
            vals[i] = np.inf
    return vals


def j_star_alp(Jstar, phi: BasisMatrix, states=None) -> np.ndarray:
    """``min{phi(s)'r : phi r >= J*}`` for each requested state (all by default).

    Unbounded states come back as ``-inf``; callers that need an exception can
    check with ``np.isneginf``.
    """
    Jstar = np.asarray(Jstar, dtype=float)
    return per_state_lp_values(phi, phi.phi, Jstar, states)
