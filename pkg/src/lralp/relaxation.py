"""Linearly relaxed ALPs, the per-state operator Gamma-hat and the error bounds.

A reduction matrix ``W`` replaces the ``S*A`` ALP constraints by ``m`` nonnegative
combinations of them: constraint ``i`` reads

    sum_a w_{i,a}' phi r >= sum_a w_{i,a}' (g_a + alpha P_a phi r).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .alp import BasisMatrix, approximation_error, j_star_alp, per_state_lp_values, solve_alp
from .lp_backend import LpProblem, LpStatus, solve_lp
from .mdp_core import (
    Mdp,
    action_values,
    check_distribution,
    check_weights,
    solve_exact,
    stability_coefficient,
    weighted_max_norm,
    weighted_one_norm,
)


class HypothesisViolation(ValueError):
    """An assumption of the error bound does not hold for the given inputs."""


class InvalidCover(ValueError):
    pass


@dataclass(frozen=True)
class ReductionMatrix:
    """Sparse nonnegative ``W = (W_1, ..., W_A)``, ``W_a`` of shape ``(S, m)``.

    Stored as triplets ``(action, state, column, value)``.
    """

    n_states: int
    n_actions: int
    m: int
    actions: np.ndarray
    states: np.ndarray
    columns: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.actions, dtype=int).reshape(-1)
        s = np.asarray(self.states, dtype=int).reshape(-1)
        i = np.asarray(self.columns, dtype=int).reshape(-1)
        w = np.asarray(self.values, dtype=float).reshape(-1)
        if not (a.size == s.size == i.size == w.size):
            raise ValueError("triplet arrays must have equal length")
        if self.m < 1:
            raise ValueError("W needs at least one column")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("W entries must be finite and nonnegative")
        if a.size and (a.min() < 0 or a.max() >= self.n_actions or s.min() < 0
                       or s.max() >= self.n_states or i.min() < 0 or i.max() >= self.m):
            raise ValueError("W triplet index out of range")
        for name, arr in zip(("actions", "states", "columns", "values"), (a, s, i, w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_dense(cls, blocks) -> "ReductionMatrix":
        blocks = np.asarray(blocks, dtype=float)
        if blocks.ndim != 3:
            raise ValueError("dense W must have shape (A, S, m)")
        if np.any(blocks < 0):
            raise ValueError("W entries must be nonnegative")
        a, s, i = np.nonzero(blocks)
        A, S, m = blocks.shape
        return cls(S, A, m, a, s, i, blocks[a, s, i])

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n_actions, self.n_states, self.m))
        np.add.at(out, (self.actions, self.states, self.columns), self.values)
        return out

    @property
    def identical_blocks(self) -> bool:
        D = self.dense()
        return bool(np.all(D == D[0]))

    @property
    def is_selection(self) -> bool:
        """Every column is a 0/1 indicator of one ``(s, a)`` pair or of one state across all actions."""
        D = self.dense()
        for i in range(self.m):
            col = D[:, :, i]
            nz = np.argwhere(col != 0)
            if not np.all(col[col != 0] == 1.0) or nz.size == 0:
                return False
            if len(nz) == 1:
                continue
            if len(set(nz[:, 1])) == 1 and len(nz) == self.n_actions:
                continue
            return False
        return True

    def selected_states(self) -> List[int]:
        """States of a per-state selection, in column order."""
        D = self.dense()
        out = []
        for i in range(self.m):
            nz = np.argwhere(D[:, :, i] != 0)
            out.append(int(nz[0, 1]))
        return out

    def to_dict(self) -> dict:
        blocks = []
        for a in range(self.n_actions):
            sel = self.actions == a
            entries = [[int(s), int(i), float(w)] for s, i, w in
                       zip(self.states[sel], self.columns[sel], self.values[sel])]
            blocks.append({"action": a, "entries": entries})
        return {"m": self.m, "n_states": self.n_states, "n_actions": self.n_actions,
                "blocks": blocks}

    @classmethod
    def from_dict(cls, d: dict, n_states: Optional[int] = None,
                  n_actions: Optional[int] = None) -> "ReductionMatrix":
        acts, sts, cols, vals = [], [], [], []
        for blk in d["blocks"]:
            for s, i, w in blk["entries"]:
                acts.append(blk["action"])
                sts.append(s)
                cols.append(i)
                vals.append(w)
        S = d.get("n_states", n_states)
        A = d.get("n_actions", n_actions)
        if S is None or A is None:
            raise ValueError("n_states and n_actions must be known to load W")
        return cls(int(S), int(A), int(d["m"]), np.array(acts, dtype=int), np.array(sts, dtype=int),
                   np.array(cols, dtype=int), np.array(vals, dtype=float))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path, n_states=None, n_actions=None) -> "ReductionMatrix":
        return cls.from_dict(json.loads(Path(path).read_text()), n_states, n_actions)


def full_selection(n_states: int, n_actions: int) -> ReductionMatrix:
    """One indicator column per ``(s, a)`` pair (no relaxation); column ``a*S + s``."""
    a, s = np.divmod(np.arange(n_states * n_actions), n_states)
    return ReductionMatrix(n_states, n_actions, n_states * n_actions, a, s,
                           np.arange(n_states * n_actions), np.ones(n_states * n_actions))


def _check_shapes(mdp: Mdp, phi: BasisMatrix, W: ReductionMatrix):
    if phi.n_states != mdp.n_states or W.n_states != mdp.n_states:
        raise ValueError("MDP, basis and W disagree on the number of states")
    if W.n_actions != mdp.n_actions:
        raise ValueError("W and MDP disagree on the number of actions")


def lralp_constraints(mdp: Mdp, phi: BasisMatrix, W: ReductionMatrix, P_phi=None):
    """``(W'(E phi - alpha P phi), W'g)`` accumulated from the sparse triplets.

    ``P_phi`` (shape ``(A, S, k)``) may be passed in when many W share one basis.
    """
    _check_shapes(mdp, phi, W)
    if P_phi is None:
        P_phi = mdp.transition @ phi.phi
    rows = W.values[:, None] * (phi.phi[W.states] - mdp.discount * P_phi[W.actions, W.states])
    M = np.zeros((W.m, phi.k))
    np.add.at(M, W.columns, rows)
    rhs = np.zeros(W.m)
    np.add.at(rhs, W.columns, W.values * mdp.reward[W.actions, W.states])
    return M, rhs


def aggregated_features(phi: BasisMatrix, W: ReductionMatrix) -> np.ndarray:
    """``W'E phi``, the constraint matrix shared by ``J*_LRALP`` and Gamma-hat (``m x k``)."""
    M = np.zeros((W.m, phi.k))
    np.add.at(M, W.columns, W.values[:, None] * phi.phi[W.states])
    return M


def aggregate(W: ReductionMatrix, state_action: np.ndarray) -> np.ndarray:
    """``W'x`` for a state-action vector given as an ``(A, S)`` array."""
    out = np.zeros(W.m)
    np.add.at(out, W.columns, W.values * state_action[W.actions, W.states])
    return out


def build_lralp(mdp: Mdp, phi: BasisMatrix, W: ReductionMatrix, c) -> LpProblem:
    c = check_distribution(c, mdp.n_states)
    M, rhs = lralp_constraints(mdp, phi, W)
    return LpProblem(phi.phi.T @ c, M, rhs)


@dataclass
class LralpSolution:
    status: LpStatus
    r: Optional[np.ndarray] = None
    J: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def solve_lralp(mdp: Mdp, phi: BasisMatrix, W: ReductionMatrix, c) -> LralpSolution:
    """Solve the relaxed program.  Unboundedness is reported, never patched."""
    out = solve_lp(build_lralp(mdp, phi, W, c))
    if out.status is LpStatus.OPTIMAL:
        return LralpSolution(out.status, out.x, phi.phi @ out.x)
    return LralpSolution(out.status)


def j_star_lralp(Jstar, phi: BasisMatrix, W: ReductionMatrix, states=None) -> np.ndarray:
    """``min{phi(s)'r : W'E phi r >= W'E J*}`` per state; ``-inf`` marks unbounded states."""
    Jstar = np.asarray(Jstar, dtype=float)
    A = aggregated_features(phi, W)
    b = aggregate(W, np.broadcast_to(Jstar, (W.n_actions, W.n_states)))
    return per_state_lp_values(phi, A, b, states)


def gamma_hat_apply(J, mdp: Mdp, phi: BasisMatrix, W: ReductionMatrix) -> np.ndarray:
    """``(Gamma J)(s) = min{phi(s)'r : W'E phi r >= W'HJ}``; ``-inf`` marks unbounded states."""
    _check_shapes(mdp, phi, W)
    A = aggregated_features(phi, W)
    b = aggregate(W, action_values(mdp, J))
    return per_state_lp_values(phi, A, b)


@dataclass
class FixedPointResult:
    values: np.ndarray
    iterations: int
    residuals: List[float]


class FixedPointError(RuntimeError):
    pass


def gamma_hat_fixed_point(mdp: Mdp, phi: BasisMatrix, W: ReductionMatrix, psi,
                          V0=None, tol: float = 1e-9, max_iter: int = 100_000) -> FixedPointResult:
    """Iterate ``V <- Gamma V`` until ``||V_{n+1} - V_n||_{inf,psi} <= tol (1 - beta_psi)``."""
    psi = check_weights(psi, mdp.n_states)
    beta = stability_coefficient(mdp, psi)
    if beta >= 1:
        raise HypothesisViolation(f"beta_psi = {beta:.6g} >= 1")
    V = np.zeros(mdp.n_states) if V0 is None else np.asarray(V0, dtype=float)
    residuals = []
    for it in range(1, max_iter + 1):
        V_new = gamma_hat_apply(V, mdp, phi, W)
        if not np.all(np.isfinite(V_new)):
            raise FixedPointError(f"Gamma-hat unbounded at states {np.flatnonzero(~np.isfinite(V_new)).tolist()}")
        res = weighted_max_norm(V_new - V, psi)
        residuals.append(res)
        V = V_new
        if res <= tol * (1 - beta):
            return FixedPointResult(V, it, residuals)
    raise FixedPointError(f"no convergence after {max_iter} iterations")


# -- bounds ---------------------------------------------------------------------

def _sup_dev(a, b, psi) -> float:
    """``||a - b||_{inf,psi}`` with infinite entries giving ``inf``."""
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return math.inf
    return weighted_max_norm(a - b, psi)


@dataclass
class BoundReport:
    eps: float
    beta_psi: float
    c_dot_psi: float
    dev_alp_lralp: float
    theorem1_rhs: float
    realized_error: float
    lralp_status: str
    holds: bool
    ratio: float
    alp_error: float = math.nan            # ||J* - J*_ALP||_{inf,psi}
    alp_realized_error: float = math.nan   # ||J* - J_ALP||_{1,c}
    dev_alp_gamma: float = math.nan        # ||J*_ALP - Gamma J*||_{inf,psi}
    rhs_proof: float = math.nan            # 2 c'psi/(1-beta) (3 eps + dev_alp_gamma)
    holds_proof: bool = True
    n_unbounded_states: int = 0
    theorem2: Optional["Theorem2Report"] = None

    def csv_header(self) -> List[str]:
        return [k for k in asdict(self) if k != "theorem2"] + (
            [f"t2_{k}" for k in asdict(self.theorem2)] if self.theorem2 else [])

    def csv_row(self) -> List[str]:
        d = asdict(self)
        t2 = d.pop("theorem2")
        vals = list(d.values()) + (list(t2.values()) if t2 else [])
        return [repr(v) if isinstance(v, float) else str(v) for v in vals]


def check_theorem1_hypotheses(mdp: Mdp, phi: BasisMatrix, W: ReductionMatrix, c, psi):
    try:
        check_distribution(c, mdp.n_states)
    except ValueError as exc:
        raise HypothesisViolation(str(exc)) from exc
    try:
        psi = check_weights(psi, mdp.n_states)
    except ValueError as exc:
        raise HypothesisViolation(str(exc)) from exc
    _check_shapes(mdp, phi, W)
    if not phi.contains(psi):
        raise HypothesisViolation("psi is not in the column span of the basis (use augment_with)")
    beta = stability_coefficient(mdp, psi)
    if beta >= 1:
        raise HypothesisViolation(f"beta_psi = {beta:.6g} >= 1")
    return beta


def evaluate_theorem1(mdp: Mdp, phi: BasisMatrix, W: ReductionMatrix, c, psi,
                      Jstar=None, with_gamma: bool = True) -> BoundReport:
    """Evaluate every term of the LRALP error bound from scratch.

    ``rhs = 2 c'psi / (1 - beta) * (2.5 eps + ||J*_ALP - J*_LRALP||_{inf,psi})``;
    it is ``inf`` when ``J*_LRALP`` is unbounded somewhere.

    ``J*_LRALP`` aggregates ``EJ*`` while the contraction argument needs
    ``Gamma J*``, which aggregates ``HJ*`` instead; the two differ unless ``W``
    only mixes constraints that are tight at ``J*``.  ``rhs_proof`` is the bound the
    contraction argument actually yields, ``2 c'psi/(1-beta) (3 eps +
    ||J*_ALP - Gamma J*||)``, and is reported next to the printed one.
    """
    beta = check_theorem1_hypotheses(mdp, phi, W, c, psi)
    c = np.asarray(c, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if Jstar is None:
        Jstar = solve_exact(mdp).values
    eps, _ = approximation_error(Jstar, phi, psi)
    j_alp = j_star_alp(Jstar, phi)
    j_lralp = j_star_lralp(Jstar, phi, W)
    dev = _sup_dev(j_alp, j_lralp, psi)
    cpsi = float(c @ psi)
    rhs = 2 * cpsi / (1 - beta) * (2.5 * eps + dev)
    sol = solve_lralp(mdp, phi, W, c)
    realized = weighted_one_norm(Jstar - sol.J, c) if sol.ok else math.inf
    holds = realized <= rhs + 1e-6 or math.isinf(rhs)
    ratio = realized / rhs if (math.isfinite(rhs) and rhs > 0) else math.nan
    try:
        _, J_alp = solve_alp(mdp, phi, c)
        alp_realized = weighted_one_norm(Jstar - J_alp, c)
    except RuntimeError:
        alp_realized = math.nan
    gamma_dev = rhs_proof = math.nan
    holds_proof = True
    if with_gamma:
        gamma_dev = _sup_dev(j_alp, gamma_hat_apply(Jstar, mdp, phi, W), psi)
        rhs_proof = 2 * cpsi / (1 - beta) * (3 * eps + gamma_dev)
        holds_proof = bool(realized <= rhs_proof + 1e-6 or math.isinf(rhs_proof))
    return BoundReport(eps=eps, beta_psi=beta, c_dot_psi=cpsi, dev_alp_lralp=dev,
                       theorem1_rhs=rhs, realized_error=realized,
                       lralp_status=sol.status.value, holds=bool(holds), ratio=ratio,
                       alp_error=_sup_dev(Jstar, j_alp, psi), alp_realized_error=alp_realized,
                       dev_alp_gamma=gamma_dev, rhs_proof=rhs_proof, holds_proof=holds_proof,
                       n_unbounded_states=int(np.sum(np.isneginf(j_lralp))))


@dataclass
class Theorem2Report:
    lhs: float
    rhs: float
    alp_error: float          # ||J*_ALP - J*||_{inf,psi}
    lambda_psi: float         # ||Lambda psi||_{inf,psi}
    zeta: float
    psi_max: float
    coarse_lambda_psi: float  # ||psi||_inf * zeta
    eps: float
    holds: bool


def evaluate_theorem2(phi: BasisMatrix, W: ReductionMatrix, cover, psi, Jstar,
                      residual_tol: float = 1e-8) -> Theorem2Report:
    """Check the conic-cover bound on ``||J*_ALP - J*_LRALP||_{inf,psi}``."""
    psi = check_weights(psi, phi.n_states)
    Jstar = np.asarray(Jstar, dtype=float)
    if not (W.identical_blocks and W.is_selection):
        raise HypothesisViolation("W must select states identically for every action")
    if sorted(set(W.selected_states())) != sorted(cover.selected_states):
        raise HypothesisViolation("W does not select exactly the cover's states")
    Lam = cover.dense_lambda(phi.n_states)
    S0 = list(cover.selected_states)
    if np.any(Lam < 0):
        raise InvalidCover("cover coefficients must be nonnegative")
    resid = np.max(np.abs(phi.phi - Lam @ phi.phi[S0]))
    if resid > residual_tol:
        raise InvalidCover(f"cover residual {resid:.3e} exceeds {residual_tol:g}")
    eps, _ = approximation_error(Jstar, phi, psi)
    j_alp = j_star_alp(Jstar, phi)
    j_lralp = j_star_lralp(Jstar, phi, W)
    lhs = _sup_dev(j_alp, j_lralp, psi)
    alp_err = _sup_dev(j_alp, Jstar, psi)
    lam_psi = weighted_max_norm(Lam @ psi[S0], psi)
    zeta = float(np.max(Lam.sum(axis=1)))
    rhs = alp_err + (1 + lam_psi) * eps
    return Theorem2Report(lhs=lhs, rhs=rhs, alp_error=alp_err, lambda_psi=lam_psi, zeta=zeta,
                          psi_max=float(np.max(psi)), coarse_lambda_psi=float(np.max(psi)) * zeta,
                          eps=eps, holds=bool(lhs <= rhs + 1e-6))
