"""Choosing which constraints to keep: conic covers and constraint sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .alp import BasisMatrix
from .lp_backend import LpStatus, solve_standard
from .mdp_core import Mdp, check_distribution, check_weights
from .relaxation import ReductionMatrix

COVER_TOL = 1e-8


# -- reduction matrices ---------------------------------------------------------

def selection_W(S0: Sequence[int], n_states: int, n_actions: int) -> ReductionMatrix:
    """Identical blocks ``W_a = (e_s : s in S0)``.  Duplicates are dropped.

    The number of dropped duplicates is available as ``W.n_duplicates``.
    """
    S0 = [int(s) for s in S0]
    if not S0:
        raise ValueError("S0 must be nonempty")
    if min(S0) < 0 or max(S0) >= n_states:
        raise ValueError("state index out of range")
    uniq = list(dict.fromkeys(S0))
    m = len(uniq)
    acts = np.repeat(np.arange(n_actions), m)
    sts = np.tile(uniq, n_actions)
    cols = np.tile(np.arange(m), n_actions)
    W = ReductionMatrix(n_states, n_actions, m, acts, sts, cols, np.ones(m * n_actions))
    object.__setattr__(W, "n_duplicates", len(S0) - m)
    return W


def state_action_selection_W(pairs: Sequence[Tuple[int, int]], n_states: int,
                             n_actions: int) -> ReductionMatrix:
    """One indicator column per ``(state, action)`` pair."""
    pairs = list(dict.fromkeys((int(s), int(a)) for s, a in pairs))
    sts = np.array([p[0] for p in pairs], dtype=int)
    acts = np.array([p[1] for p in pairs], dtype=int)
    return ReductionMatrix(n_states, n_actions, len(pairs), acts, sts,
                           np.arange(len(pairs)), np.ones(len(pairs)))


# -- conic covers ---------------------------------------------------------------

@dataclass
class ConicCover:
    """``phi(s) = sum_j lambda[s, j] phi(selected_states[j])`` for every state."""

    selected_states: List[int]
    lambda_rows: np.ndarray       # (S, |S0|), nonnegative
    residual_max: float
    zeta: float
    uncovered: List[int] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.uncovered

    def dense_lambda(self, n_states: Optional[int] = None) -> np.ndarray:
        return np.asarray(self.lambda_rows)

    def to_dict(self) -> dict:
        rows, cols = np.nonzero(self.lambda_rows)
        return {
            "states": list(map(int, self.selected_states)),
            "n_states": int(self.lambda_rows.shape[0]),
            "lambda": [[int(s), int(j), float(self.lambda_rows[s, j])] for s, j in zip(rows, cols)],
            "zeta": self.zeta,
            "residual_max": self.residual_max,
            "uncovered": list(map(int, self.uncovered)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConicCover":
        lam = np.zeros((d["n_states"], len(d["states"])))
        for s, j, w in d["lambda"]:
            lam[s, j] = w
        return cls(list(d["states"]), lam, float(d["residual_max"]), float(d["zeta"]),
                   list(d.get("uncovered", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ConicCover":
        return cls.from_dict(json.loads(Path(path).read_text()))


# A cover that ran out of budget carries a nonempty ``uncovered`` list.
PartialCover = ConicCover


def _membership_lp(phi: np.ndarray, S0: Sequence[int], s: int, psi: np.ndarray):
    M = phi[list(S0)].T                     # k x |S0|
    return solve_standard(M, phi[s], psi[list(S0)])


def conic_membership(phi: BasisMatrix, S0: Sequence[int], s: int,
                     psi=None) -> Tuple[bool, Optional[np.ndarray]]:
    """Is ``phi(s)`` a nonnegative combination of ``phi(S0)``?

    When it is, the returned row minimises ``sum_j lambda_j psi(S0[j])``.
    """
    psi = np.ones(phi.n_states) if psi is None else check_weights(psi, phi.n_states)
    S0 = list(S0)
    if s in S0:
        row = np.zeros(len(S0))
        row[S0.index(s)] = 1.0
        return True, row
    res = _membership_lp(phi.phi, S0, s, psi)
    if res.status is LpStatus.INFEASIBLE:
        return False, None
    return True, res.y


def conic_infeasibility(phi: np.ndarray, S0: Sequence[int], s: int) -> float:
    """Phase-one optimum for the direction ``phi(s) / ||phi(s)||_1``; zero iff covered."""
    v = phi[s]
    norm = float(np.sum(np.abs(v)))
    if norm == 0.0:
        return 0.0
    if not S0:
        return 1.0
    M = phi[list(S0)].T
    res = solve_standard(M, v / norm, np.zeros(len(S0)))
    return res.phase1_value if res.status is LpStatus.INFEASIBLE else 0.0


def _finish_cover(phi: BasisMatrix, S0: List[int], psi: np.ndarray, uncovered=()) -> ConicCover:
    S = phi.n_states
    lam = np.zeros((S, len(S0)))
    skip = set(uncovered)
    for s in range(S):
        if s in skip:
            continue
        ok, row = conic_membership(phi, S0, s, psi)
        if not ok:
            raise RuntimeError(f"state {s} unexpectedly not covered")
        lam[s] = row
    covered = [s for s in range(S) if s not in skip]
    resid = float(np.max(np.abs(phi.phi[covered] - lam[covered] @ phi.phi[S0]))) if covered else 0.0
    zeta = float(np.max(lam[covered].sum(axis=1))) if covered else 0.0
    return ConicCover(list(S0), lam, resid, zeta, sorted(skip))


def greedy_conic_cover(phi: BasisMatrix, psi=None, budget: Optional[int] = None) -> ConicCover:
    """Greedily pick states until every ``phi(s)`` lies in the cone of the picks.

    Each round adds the state with the largest normalised phase-one infeasibility;
    ties go to the larger ``||phi(s)||_1``, then ``||phi(s)||_inf``, then the lower
    index.  This is a heuristic, not a minimum-cardinality cover.  With a binary
    basis it selects exactly one state per distinct nonzero row.
    """
    S = phi.n_states
    psi = np.ones(S) if psi is None else check_weights(psi, S)
    budget = S if budget is None else int(budget)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    P = phi.phi
    l1 = np.abs(P).sum(axis=1)
    linf = np.abs(P).max(axis=1)
    # one representative per distinct row; duplicates are covered by it
    _, first = np.unique(P, axis=0, return_index=True)
    candidates = sorted(int(i) for i in first if l1[i] > 0)
    S0: List[int] = []
    while True:
        meas = {s: conic_infeasibility(P, S0, s) for s in candidates if s not in S0}
        violated = {s: v for s, v in meas.items() if v > COVER_TOL}
        if not violated:
            return _finish_cover(phi, S0 if S0 else [int(np.argmax(l1))], psi)
        if len(S0) >= budget:
            uncovered = [s for s in range(S)
                         if conic_infeasibility(P, S0, s) > COVER_TOL]
            return _finish_cover(phi, S0, psi, uncovered)
        pick = max(violated, key=lambda s: (round(violated[s], 12), l1[s], linf[s], -s))
        S0.append(pick)


def separable_cover(h1, h2, zero1: int, zero2: int) -> Tuple[BasisMatrix, ConicCover]:
    """Cross-shaped cover for ``phi(s1, s2) = (h1(s1), h2(s2))`` on ``S1 x S2``.

    ``h1`` has shape ``(|S1|, k1)`` and ``h2`` shape ``(|S2|, k2)`` (1-d arrays are
    single features).  ``zero_i`` must satisfy ``h_i(zero_i) = 0``.  States are
    numbered ``s = s1 * |S2| + s2``.
    """
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    h1 = h1[:, None] if h1.ndim == 1 else h1
    h2 = h2[:, None] if h2.ndim == 1 else h2
    n1, n2 = h1.shape[0], h2.shape[0]
    if not (0 <= zero1 < n1 and np.all(h1[zero1] == 0)):
        raise ValueError("zero1 is not a zero-point of h1")
    if not (0 <= zero2 < n2 and np.all(h2[zero2] == 0)):
        raise ValueError("zero2 is not a zero-point of h2")
    k1, k2 = h1.shape[1], h2.shape[1]
    phi = np.zeros((n1 * n2, k1 + k2))
    phi[:, :k1] = np.repeat(h1, n2, axis=0)
    phi[:, k1:] = np.tile(h2, (n1, 1))
    basis = BasisMatrix(phi)

    def idx(s1, s2):
        return s1 * n2 + s2

    S0 = list(dict.fromkeys([idx(s1, zero2) for s1 in range(n1)] +
                            [idx(zero1, s2) for s2 in range(n2)]))
    pos = {s: j for j, s in enumerate(S0)}
    lam = np.zeros((n1 * n2, len(S0)))
    for s1 in range(n1):
        for s2 in range(n2):
            s = idx(s1, s2)
            if s in pos:
                lam[s, pos[s]] = 1.0
                continue
            # phi(s1, s2) = phi(s1, zero2) + phi(zero1, s2)
            lam[s, pos[idx(s1, zero2)]] = 1.0
            lam[s, pos[idx(zero1, s2)]] = 1.0
    resid = float(np.max(np.abs(phi - lam @ phi[S0])))
    zeta = float(np.max(lam.sum(axis=1)))
    return basis, ConicCover(S0, lam, resid, zeta)


# -- constraint sampling --------------------------------------------------------

@dataclass(frozen=True)
class SamplingDistribution:
    kind: str              # "ideal_occupancy" | "geometric" | "custom"
    anchor: int
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", check_distribution(self.weights))


def geometric_distribution(n_states: int, anchor: int, discount: float) -> SamplingDistribution:
    """``c(s) = kappa (1 - alpha) alpha^|anchor - s|`` normalised to sum to one."""
    w = (1 - discount) * discount ** np.abs(anchor - np.arange(n_states))
    return SamplingDistribution("geometric", anchor, w / w.sum())


def ideal_occupancy_distribution(mdp: Mdp, policy, anchor: int) -> SamplingDistribution:
    """Row ``anchor`` of ``(1 - alpha)(I - alpha P_u)^{-1}``."""
    P_u, _ = mdp.policy_kernel(policy)
    e = np.zeros(mdp.n_states)
    e[anchor] = 1.0
    w = (1 - mdp.discount) * np.linalg.solve((np.eye(mdp.n_states) - mdp.discount * P_u).T, e)
    w = np.maximum(w, 0.0)
    return SamplingDistribution("ideal_occupancy", anchor, w / w.sum())


def sample_states(dist: SamplingDistribution, m: int, rng) -> List[int]:
    """``m`` i.i.d. draws, deduplicated in order of first appearance."""
    rng = np.random.default_rng(rng)
    draws = rng.choice(dist.weights.size, size=m, replace=True, p=dist.weights)
    return list(dict.fromkeys(int(s) for s in draws))


def sample_constraints(dist: SamplingDistribution, m: int, rng, n_actions: int) -> ReductionMatrix:
    return selection_W(sample_states(dist, m, rng), dist.weights.size, n_actions)
