"""Finite discounted MDPs: Bellman operators, exact solvers and weighted norms.

Conventions used throughout the package:

* states are ``0..S-1`` and actions ``0..A-1`` (0-based);
* ``transition`` has shape ``(A, S, S)`` and ``reward`` shape ``(A, S)``;
* a state-action vector is laid out as ``A`` stacked blocks of length ``S``,
  block ``a`` holding ``T_a J``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

STOCHASTIC_TOL = 1e-12
VI_TOL = 1e-9


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Mdp:
    """A finite discounted MDP with dense per-action kernels.

    ``strict`` enforces rewards in ``[0, 1]``; it is off by default because the
    queue benchmark uses negative rewards (costs).
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    strict: bool = False

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        g = np.array(self.reward, dtype=float)
        if P.ndim != 3 or P.shape[1] != P.shape[2]:
            raise DimensionError(f"transition must have shape (A, S, S), got {P.shape}")
        if g.shape != P.shape[:2]:
            raise DimensionError(f"reward must have shape {P.shape[:2]}, got {g.shape}")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(g))):
            raise ValueError("transition and reward must be finite")
        if np.any(P < 0):
            raise ValueError("transition probabilities must be nonnegative")
        row_err = np.max(np.abs(P.sum(axis=2) - 1.0))
        if row_err > STOCHASTIC_TOL:
            raise ValueError(f"transition rows must sum to 1 (max error {row_err:.3e})")
        if self.strict and (g.min() < 0 or g.max() > 1):
            raise ValueError("strict mode requires rewards in [0, 1]")
        P.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", g)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[0]

    def policy_kernel(self, u) -> Tuple[np.ndarray, np.ndarray]:
        """Return ``(P_u, g_u)`` for a deterministic policy."""
        u = check_policy(self, u)
        rows = np.arange(self.n_states)
        return self.transition[u, rows, :], self.reward[u, rows]

    # -- file format -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "discount": self.discount,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, strict: bool = False) -> "Mdp":
        mdp = cls(np.asarray(d["transition"], dtype=float),
                  np.asarray(d["reward"], dtype=float), float(d["discount"]), strict)
        if mdp.n_states != d["n_states"] or mdp.n_actions != d["n_actions"]:
            raise DimensionError("declared n_states/n_actions disagree with arrays")
        return mdp

    def save(self, path) -> None:
        # json writes floats with repr(), the shortest round-tripping decimal
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path, strict: bool = False) -> "Mdp":
        return cls.from_dict(json.loads(Path(path).read_text()), strict)


def random_mdp(n_states: int, n_actions: int, discount: float, rng: np.random.Generator,
               density: float = 1.0) -> Mdp:
    """Random MDP with rewards in [0, 1]; ``density`` < 1 zeroes some transitions."""
    P = rng.random((n_actions, n_states, n_states))
    if density < 1.0:
        P *= rng.random(P.shape) < density
        # keep every row nonempty
        idx = rng.integers(n_states, size=(n_actions, n_states))
        P[np.arange(n_actions)[:, None], np.arange(n_states)[None, :], idx] += rng.random(idx.shape) + 0.1
    P /= P.sum(axis=2, keepdims=True)
    return Mdp(P, rng.random((n_actions, n_states)), discount)


def check_policy(mdp: Mdp, u) -> np.ndarray:
    u = np.asarray(u)
    if u.shape != (mdp.n_states,):
        raise DimensionError(f"policy must have length {mdp.n_states}, got shape {u.shape}")
    if not np.issubdtype(u.dtype, np.integer):
        raise TypeError("policy entries must be integers")
    if u.size and (u.min() < 0 or u.max() >= mdp.n_actions):
        raise ValueError("policy action out of range")
    return u


def _check_value(mdp: Mdp, J) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.shape != (mdp.n_states,):
        raise DimensionError(f"value vector must have length {mdp.n_states}, got shape {J.shape}")
    return J


def apply_policy_operator(mdp: Mdp, u, J) -> np.ndarray:
    """``T_u J = g_u + alpha P_u J``."""
    J = _check_value(mdp, J)
    P_u, g_u = mdp.policy_kernel(u)
    return g_u + mdp.discount * (P_u @ J)


def action_values(mdp: Mdp, J) -> np.ndarray:
    """Array of shape ``(A, S)`` whose row ``a`` is ``T_a J``."""
    J = _check_value(mdp, J)
    return mdp.reward + mdp.discount * (mdp.transition @ J)


def linear_bellman_operator(mdp: Mdp, J) -> np.ndarray:
    """``HJ`` as a flat state-action vector of length ``S*A``."""
    return action_values(mdp, J).reshape(-1)


def stack(mdp: Mdp, J) -> np.ndarray:
    """The stacking operator ``E``: repeat ``J`` once per action."""
    return np.tile(_check_value(mdp, J), mdp.n_actions)


def bellman_operator(mdp: Mdp, J) -> np.ndarray:
    return action_values(mdp, J).max(axis=0)


def greedy_policy(mdp: Mdp, J) -> np.ndarray:
    # np.argmax returns the first maximiser, i.e. the lowest action index
    return np.argmax(action_values(mdp, J), axis=0)


def policy_value(mdp: Mdp, u) -> np.ndarray:
    """Solve ``(I - alpha P_u) J = g_u``."""
    P_u, g_u = mdp.policy_kernel(u)
    M = np.eye(mdp.n_states) - mdp.discount * P_u
    try:
        return np.linalg.solve(M, g_u)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - impossible for alpha < 1
        raise RuntimeError("policy evaluation system is singular") from exc


@dataclass
class ExactSolution:
    values: np.ndarray
    policy: np.ndarray
    residual: float
    iterations: int
    method: str = "vi"
    info: dict = field(default_factory=dict)


def solve_exact(mdp: Mdp, tol: float = VI_TOL, method: str = "vi",
                c: Optional[np.ndarray] = None, max_iter: int = 10_000_000,
                check_every: int = 200) -> ExactSolution:
    """Optimal values and a greedy optimal policy.

    ``method="vi"`` runs value iteration with the stopping rule
    ``||J_{t+1} - J_t|| <= tol (1 - alpha) / (2 alpha)`` and then evaluates the
    greedy policy exactly.  Every ``check_every`` sweeps the greedy policy is also
    evaluated; if its Bellman residual is already below ``tol`` we stop early.
    This matters for ``alpha`` close to one, where the stopping threshold can sit
    below the floating point resolution of ``J``.

    ``method="lp"`` solves ``min c'J s.t. EJ >= HJ`` with the package LP solver.
    """
    if method == "lp":
        return _solve_exact_lp(mdp, c)
    if method != "vi":
        raise ValueError(f"unknown method {method!r}")
    alpha = mdp.discount
    threshold = tol * (1 - alpha) / (2 * alpha)
    J = np.zeros(mdp.n_states)
    it = 0
    while True:
        it += 1
        Q = mdp.reward + alpha * (mdp.transition @ J)
        J_new = Q.max(axis=0)
        delta = np.max(np.abs(J_new - J))
        J = J_new
        if delta <= threshold:
            break
        if it % check_every == 0:
            u = np.argmax(Q, axis=0)
            J_u = policy_value(mdp, u)
            if np.max(np.abs(bellman_operator(mdp, J_u) - J_u)) <= tol:
                break
        if it >= max_iter:
            raise RuntimeError("value iteration did not converge")
    u = greedy_policy(mdp, J)
    J_u = policy_value(mdp, u)
    # a few policy improvement steps remove any residual suboptimality from VI
    for _ in range(50):
        u_new = greedy_policy(mdp, J_u)
        Q = action_values(mdp, J_u)
        rows = np.arange(mdp.n_states)
        if np.all(Q[u_new, rows] <= Q[u, rows] + 1e-14 * (1 + np.abs(J_u))):
            break
        u, J_u = u_new, policy_value(mdp, u_new)
    residual = float(np.max(np.abs(bellman_operator(mdp, J_u) - J_u)))
    return ExactSolution(J_u, greedy_policy(mdp, J_u), residual, it, "vi")


def _solve_exact_lp(mdp: Mdp, c=None) -> ExactSolution:
    from .lp_backend import LpProblem, solve_lp, LpStatus

    S, A = mdp.n_states, mdp.n_actions
    c = np.full(S, 1.0 / S) if c is None else np.asarray(c, dtype=float)
    # rows (s, a): J(s) - alpha P_a(s, .) J >= g_a(s)
    M = np.tile(np.eye(S), (A, 1)) - mdp.discount * mdp.transition.reshape(S * A, S)
    out = solve_lp(LpProblem(c, M, mdp.reward.reshape(-1)))
    if out.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"exact LP returned {out.status.value}")
    J = out.x
    residual = float(np.max(np.abs(bellman_operator(mdp, J) - J)))
    return ExactSolution(J, greedy_policy(mdp, J), residual, out.iterations, "lp")


def check_weights(psi, n: Optional[int] = None) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if n is not None and psi.shape != (n,):
        raise DimensionError(f"weight vector must have length {n}, got shape {psi.shape}")
    if np.any(~np.isfinite(psi)) or np.any(psi <= 0):
        raise ValueError("psi must be strictly positive and finite")
    return psi


def check_distribution(c, n: Optional[int] = None, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if n is not None and c.shape != (n,):
        raise DimensionError(f"distribution must have length {n}, got shape {c.shape}")
    if np.any(c < 0) or abs(c.sum() - 1.0) > tol:
        raise ValueError("c must be nonnegative and sum to 1")
    return c


def weighted_one_norm(J, c) -> float:
    J = np.asarray(J, dtype=float)
    c = np.asarray(c, dtype=float)
    if J.shape != c.shape:
        raise DimensionError("J and c must have the same shape")
    if np.any(c < 0):
        raise ValueError("c must be nonnegative")
    return float(np.dot(c, np.abs(J)))


def weighted_max_norm(J, psi) -> float:
    """``max_s |J(s)| / psi(s)`` (division, not multiplication, by the weights).

    Infinite entries of ``J`` give ``inf``.
    """
    J = np.asarray(J, dtype=float)
    psi = check_weights(psi)
    if J.shape != psi.shape:
        raise DimensionError("J and psi must have the same shape")
    if J.size == 0:
        return 0.0
    return float(np.max(np.abs(J) / psi))


def stability_coefficient(mdp: Mdp, psi) -> float:
    """``beta_psi = alpha * max_a ||P_a psi||_{inf, psi}``."""
    psi = check_weights(psi, mdp.n_states)
    return float(mdp.discount * np.max((mdp.transition @ psi) / psi))
