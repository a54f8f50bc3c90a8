"""Randomised verification of the error bounds on small MDPs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from .alp import BasisMatrix, j_star_alp
from .constraint_select import ConicCover, greedy_conic_cover, selection_W, state_action_selection_W
from .mdp_core import Mdp, random_mdp, solve_exact, stability_coefficient
from .relaxation import (
    BoundReport,
    ReductionMatrix,
    Theorem2Report,
    evaluate_theorem1,
    evaluate_theorem2,
    j_star_lralp,
)


@dataclass
class Instance:
    index: int
    mdp: Mdp
    phi: BasisMatrix
    psi: np.ndarray
    c: np.ndarray
    W: ReductionMatrix
    Jstar: np.ndarray


def random_psi(mdp: Mdp, rng: np.random.Generator) -> np.ndarray:
    """Positive weights in ``[1, 2]``, shrunk towards ``1`` until ``beta_psi < 1``."""
    psi = 1.0 + rng.random(mdp.n_states)
    while stability_coefficient(mdp, psi) >= 1:
        psi = 1.0 + 0.5 * (psi - 1.0)
    return psi


def random_selection_W(S: int, A: int, rng: np.random.Generator) -> ReductionMatrix:
    """Per-state selection (identical blocks) or a set of ``(s, a)`` indicators, half the time each."""
    if rng.random() < 0.5:
        m = int(rng.integers(1, S + 1))
        return selection_W(rng.choice(S, size=m, replace=False), S, A)
    m = int(rng.integers(1, S * A + 1))
    flat = rng.choice(S * A, size=m, replace=False)
    return state_action_selection_W([(int(f % S), int(f // S)) for f in flat], S, A)


def random_instance(index: int, rng: np.random.Generator, max_states: int = 25,
                    max_actions: int = 3, max_k: int = 5) -> Instance:
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(1, max_actions + 1))
    k = int(rng.integers(1, max_k + 1))
    mdp = random_mdp(S, A, float(rng.uniform(0.5, 0.95)), rng)
    psi = random_psi(mdp, rng)
    phi = BasisMatrix(rng.normal(size=(S, k - 1))) if k > 1 else None
    phi = BasisMatrix(psi[:, None]) if phi is None else phi.augment_with(psi)
    c = rng.dirichlet(np.ones(S))
    W = random_selection_W(S, A, rng)
    return Instance(index, mdp, phi, psi, c, W, solve_exact(mdp).values)


def instances(n: int, seed: int = 0, **kw) -> Iterator[Instance]:
    rng = np.random.default_rng(seed)
    for i in range(n):
        yield random_instance(i, rng, **kw)


@dataclass
class CampaignRecord:
    index: int
    n_states: int
    n_actions: int
    k: int
    m: int
    theorem1: BoundReport
    lemma_lhs: float              # ||J* - J*_ALP||_{inf,psi}
    lemma_rhs: float              # 2 eps
    cover: Optional[ConicCover] = None
    theorem2: Optional[Theorem2Report] = None
    lralp_below_alp: Optional[bool] = None   # J*_LRALP <= J*_ALP pointwise, cover W

    @property
    def theorem1_ok(self) -> bool:
        r = self.theorem1
        if math.isinf(r.theorem1_rhs):
            return r.n_unbounded_states > 0
        return r.holds

    @property
    def lemma_ok(self) -> bool:
        return self.lemma_lhs <= self.lemma_rhs + 1e-6


def check_instance(inst: Instance, with_cover: bool = True) -> CampaignRecord:
    rep = evaluate_theorem1(inst.mdp, inst.phi, inst.W, inst.c, inst.psi, Jstar=inst.Jstar)
    rec = CampaignRecord(inst.index, inst.mdp.n_states, inst.mdp.n_actions, inst.phi.k, inst.W.m,
                         rep, rep.alp_error, 2 * rep.eps)
    if with_cover:
        cover = greedy_conic_cover(inst.phi, inst.psi)
        rec.cover = cover
        if cover.complete:
            Wc = selection_W(cover.selected_states, inst.mdp.n_states, inst.mdp.n_actions)
            rec.theorem2 = evaluate_theorem2(inst.phi, Wc, cover, inst.psi, inst.Jstar)
            ja = j_star_alp(inst.Jstar, inst.phi)
            jl = j_star_lralp(inst.Jstar, inst.phi, Wc)
            rec.lralp_below_alp = bool(np.all(np.isfinite(jl)) and np.all(jl <= ja + 1e-7))
    return rec


def run_campaign(n: int, seed: int = 0, with_cover: bool = True, **kw) -> List[CampaignRecord]:
    return [check_instance(inst, with_cover) for inst in instances(n, seed, **kw)]


CSV_HEADER = ["index", "n_states", "n_actions", "k", "m", "eps", "beta_psi", "c_dot_psi",
              "dev_alp_lralp", "theorem1_rhs", "realized_error", "theorem1_ok",
              "dev_alp_gamma", "rhs_proof", "holds_proof", "lemma_lhs", "lemma_ok",
              "cover_size", "theorem2_lhs", "theorem2_rhs", "theorem2_ok"]


def record_row(r: CampaignRecord) -> list:
    t1, t2 = r.theorem1, r.theorem2
    return [r.index, r.n_states, r.n_actions, r.k, r.m, t1.eps, t1.beta_psi, t1.c_dot_psi,
            t1.dev_alp_lralp, t1.theorem1_rhs, t1.realized_error, r.theorem1_ok,
            t1.dev_alp_gamma, t1.rhs_proof, t1.holds_proof, r.lemma_lhs, r.lemma_ok,
            len(r.cover.selected_states) if r.cover and r.cover.complete else "",
            t2.lhs if t2 else "", t2.rhs if t2 else "", t2.holds if t2 else ""]
