"""Single controlled queue: model, lookahead policies and the policy comparison.

States are queue lengths ``0..S-1``; action ``a`` selects service rate ``q[a]``.
Reward ``g_a(s) = -(s / N + q[a]**3)``.

Two transition models are available:

``additive``
    up with probability ``p``, down with ``q[a]``, stay otherwise.  Needs
    ``p + q[a] <= 1``.
``bernoulli``
    one Bernoulli arrival (``p``) and one Bernoulli service (``q[a]``) per step,
    so up with ``p (1 - q[a])`` and down with ``q[a] (1 - p)``.  Valid for any
    rates in ``(0, 1)``; the default rates ``p = 0.4``, ``q = (.2, .4, .6, .8)``
    only fit this model.

At the boundaries an arrival at ``s = 0`` moves up with probability ``p`` and a
service at ``s = S-1`` moves down with probability ``q[a]``; the remaining mass
is a self-loop.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .alp import BasisMatrix, polynomial_basis
from .constraint_select import (
    geometric_distribution,
    ideal_occupancy_distribution,
    sample_states,
    selection_W,
)
from .lp_backend import LpProblem, LpStatus, solve_lp
from .mdp_core import Mdp, policy_value, solve_exact, weighted_one_norm
from .relaxation import lralp_constraints

PAPER_ANCHORS = (1, 200, 400, 600, 800, 999)   # positions on a 1000-state queue
VARIANTS = ("LRA", "CS", "CS_ideal")


@dataclass(frozen=True)
class QueueConfig:
    n_states: int = 1000
    arrival_p: float = 0.4
    service_rates: Sequence[float] = (0.2, 0.4, 0.6, 0.8)
    discount: Optional[float] = None          # default 1 - 1/S
    reward_scale: Optional[float] = None      # N in the reward; default S
    dynamics: str = "bernoulli"
    k: int = 4
    m: int = 6
    discount_lookahead: bool = True           # False drops alpha from the lookahead sum
    include_self_loop: bool = True            # False ignores the s -> s successor

    def __post_init__(self):
        q = tuple(float(x) for x in self.service_rates)
        object.__setattr__(self, "service_rates", q)
        p = self.arrival_p
        if self.n_states < 2:
            raise ValueError("need at least two states")
        if not 0 < p < 1:
            raise ValueError("arrival probability must lie in (0, 1)")
        if not q or q[0] <= 0 or q[-1] >= 1 or any(a > b for a, b in zip(q, q[1:])):
            raise ValueError("service rates must satisfy 0 < q(1) <= ... <= q(A) < 1")
        if q[-1] <= p:
            raise ValueError("q(A) > p is required for stabilizability")
        if self.dynamics == "additive":
            if any(p + x > 1 for x in q):
                raise ValueError("additive dynamics need p + q(a) <= 1 for every action")
        elif self.dynamics != "bernoulli":
            raise ValueError(f"unknown dynamics {self.dynamics!r}")
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be positive")

    @property
    def n_actions(self) -> int:
        return len(self.service_rates)

    @property
    def alpha(self) -> float:
        return 1 - 1 / self.n_states if self.discount is None else float(self.discount)

    @property
    def N(self) -> float:
        return float(self.n_states) if self.reward_scale is None else float(self.reward_scale)

    def anchors(self) -> List[int]:
        """The fixed spread states, scaled from the 1000-state layout."""
        S = self.n_states
        return sorted(set(int(round(x * (S - 1) / 999)) for x in PAPER_ANCHORS))


def build_queue_mdp(cfg: QueueConfig) -> Mdp:
    S, A = cfg.n_states, cfg.n_actions
    p = cfg.arrival_p
    P = np.zeros((A, S, S))
    g = np.zeros((A, S))
    s = np.arange(S)
    for a, q in enumerate(cfg.service_rates):
        if cfg.dynamics == "additive":
            up, down = p, q
        else:
            up, down = p * (1 - q), q * (1 - p)
        interior = s[1:-1]
        P[a, interior, interior + 1] = up
        P[a, interior, interior - 1] = down
        P[a, interior, interior] = 1 - up - down
        P[a, 0, 1] = p
        P[a, 0, 0] = 1 - p
        P[a, S - 1, S - 2] = q
        P[a, S - 1, S - 1] = 1 - q
        g[a] = -(s / cfg.N + q ** 3)
    return Mdp(P, g, cfg.alpha)


def queue_basis(cfg: QueueConfig) -> BasisMatrix:
    return polynomial_basis(cfg.n_states, cfg.k)


class _LralpValues:
    """``J_hat_{e_s}(s)`` for individual states, sharing ``P phi`` across calls."""

    def __init__(self, mdp: Mdp, phi: BasisMatrix):
        self.mdp = mdp
        self.phi = phi
        self.P_phi = mdp.transition @ phi.phi

    def value(self, s: int, S0: Sequence[int]) -> float:
        W = selection_W(S0, self.mdp.n_states, self.mdp.n_actions)
        M, rhs = lralp_constraints(self.mdp, self.phi, W, self.P_phi)
        out = solve_lp(LpProblem(self.phi.phi[s], M, rhs))
        if out.status is LpStatus.OPTIMAL:
            return out.objective_value
        if out.status is LpStatus.UNBOUNDED:
            return -np.inf
        raise RuntimeError(f"LRALP for state {s} is infeasible")


def lookahead_from_values(mdp: Mdp, v: np.ndarray, discounted: bool = True,
                          include_self_loop: bool = True) -> np.ndarray:
    """``argmax_a g_a(s) + alpha sum_s' p_a(s, s') v(s')`` with ``-inf`` values allowed.

    Ties (including all-``-inf`` rows) go to the lowest action index.
    """
    P = mdp.transition
    if not include_self_loop:
        P = P.copy()
        idx = np.arange(mdp.n_states)
        P[:, idx, idx] = 0.0
    with np.errstate(invalid="ignore"):
        contrib = np.where(P > 0, P * v[None, None, :], 0.0).sum(axis=2)
    factor = mdp.discount if discounted else 1.0
    Q = mdp.reward + factor * contrib
    return np.argmax(Q, axis=0)


def next_state_values(variant: str, cfg: QueueConfig, mdp: Mdp, seed: Optional[int] = None,
                      optimal_policy=None, states=None) -> np.ndarray:
    """Per-state LRALP estimates ``J_hat_{e_s}(s)`` for the chosen constraint rule."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant != "LRA" and seed is None:
        raise ValueError("constraint sampling variants need a seed")
    if variant == "CS_ideal" and optimal_policy is None:
        raise ValueError("CS_ideal needs the optimal policy")
    solver = _LralpValues(mdp, queue_basis(cfg))
    anchors = cfg.anchors()
    states = range(cfg.n_states) if states is None else states
    if variant == "CS_ideal":
        # rows of (1 - alpha)(I - alpha P_u*)^{-1}, one per anchor state
        P_u, _ = mdp.policy_kernel(optimal_policy)
        R = (1 - mdp.discount) * np.linalg.inv(np.eye(cfg.n_states) - mdp.discount * P_u)
    v = np.empty(cfg.n_states)
    v.fill(np.nan)
    stream = VARIANTS.index(variant)
    for s in states:
        if variant == "LRA":
            S0 = [s] + anchors
        else:
            if variant == "CS":
                dist = geometric_distribution(cfg.n_states, s, mdp.discount)
            else:
                row = np.maximum(R[s], 0.0)
                dist = replace(geometric_distribution(cfg.n_states, s, mdp.discount),
                               kind="ideal_occupancy", weights=row / row.sum())
            S0 = sample_states(dist, cfg.m, np.random.default_rng([seed, stream, s]))
        v[s] = solver.value(s, S0)
    return v


def lookahead_policy(variant: str, cfg: QueueConfig, seed: Optional[int] = None,
                     mdp: Optional[Mdp] = None, optimal_policy=None):
    """Return ``(policy, values)`` for one variant; values hold ``-inf`` where unbounded."""
    mdp = build_queue_mdp(cfg) if mdp is None else mdp
    if variant == "CS_ideal" and optimal_policy is None:
        optimal_policy = solve_exact(mdp).policy
    v = next_state_values(variant, cfg, mdp, seed, optimal_policy)
    u = lookahead_from_values(mdp, v, cfg.discount_lookahead, cfg.include_self_loop)
    return u, v


@dataclass
class ExperimentResult:
    cfg: QueueConfig
    seeds: List[int]
    J_star: np.ndarray
    u_star: np.ndarray
    J: Dict[str, np.ndarray]             # variant -> (n_runs, S)
    u: Dict[str, np.ndarray]             # variant -> (n_runs, S)
    gaps: Dict[str, np.ndarray]          # variant -> (n_runs,)  ||J* - J_u||_{1,c}, c uniform
    unbounded: Dict[str, np.ndarray]     # variant -> (n_runs,)  count of -inf estimates
    timing: Dict[str, float] = field(default_factory=dict)

    def lra_wins(self) -> np.ndarray:
        """Per seed: LRA gap <= CS gap."""
        return self.gaps["LRA"][0] <= self.gaps["CS"] + 1e-12

    def table_rows(self) -> List[list]:
        rows = []
        for s in range(self.cfg.n_states):
            rows.append([
                s, self.J_star[s], self.J["LRA"][0, s],
                self.J["CS"][:, s].mean(), self.J["CS"][:, s].std(),
                self.J["CS_ideal"][:, s].mean(), self.J["CS_ideal"][:, s].std(),
                int(self.u_star[s]) + 1, int(self.u["LRA"][0, s]) + 1,
                _mode(self.u["CS"][:, s]) + 1, _mode(self.u["CS_ideal"][:, s]) + 1,
            ])
        return rows

    def summary_rows(self) -> List[list]:
        rows = []
        for i, seed in enumerate(self.seeds):
            rows.append([seed, self.gaps["LRA"][0], self.gaps["CS"][i], self.gaps["CS_ideal"][i],
                         int(self.unbounded["LRA"][0]), int(self.unbounded["CS"][i]),
                         int(self.unbounded["CS_ideal"][i])])
        return rows

    def write_csv(self, table_path, summary_path) -> None:
        with open(table_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TABLE_HEADER)
            w.writerows(_fmt(r) for r in self.table_rows())
        with open(summary_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_HEADER)
            w.writerows(_fmt(r) for r in self.summary_rows())


TABLE_HEADER = ["state", "J_star", "J_LRA", "J_CS_mean", "J_CS_std", "J_CS_ideal_mean",
                "J_CS_ideal_std", "u_star", "u_LRA", "u_CS_mode", "u_CS_ideal_mode"]
SUMMARY_HEADER = ["seed", "gap_LRA", "gap_CS", "gap_CS_ideal",
                  "unbounded_LRA", "unbounded_CS", "unbounded_CS_ideal"]


def _fmt(row):
    return [repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row]


def _mode(a) -> int:
    vals, counts = np.unique(a, return_counts=True)
    return int(vals[np.argmax(counts)])


def run_experiment(cfg: QueueConfig, seeds: Sequence[int]) -> ExperimentResult:
    seeds = list(seeds)
    timing = {}
    t0 = time.perf_counter()
    mdp = build_queue_mdp(cfg)
    exact = solve_exact(mdp)
    timing["exact"] = time.perf_counter() - t0
    c = np.full(cfg.n_states, 1.0 / cfg.n_states)
    J, U, gaps, unb = {}, {}, {}, {}
    for variant in VARIANTS:
        t0 = time.perf_counter()
        runs = [None] if variant == "LRA" else seeds
        Js, Us, Gs, Ns = [], [], [], []
        for seed in runs:
            u, v = lookahead_policy(variant, cfg, seed, mdp, exact.policy)
            J_u = policy_value(mdp, u)
            Js.append(J_u)
            Us.append(u)
            Gs.append(weighted_one_norm(exact.values - J_u, c))
            Ns.append(int(np.sum(np.isneginf(v))))
        J[variant], U[variant] = np.array(Js), np.array(Us)
        gaps[variant], unb[variant] = np.array(Gs), np.array(Ns)
        timing[variant] = time.perf_counter() - t0
    return ExperimentResult(cfg, seeds, exact.values, exact.policy, J, U, gaps, unb, timing)
