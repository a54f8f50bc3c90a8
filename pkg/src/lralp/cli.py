"""Command-line entry point.

Exit codes: 0 success, 1 a verification check failed, 2 a hypothesis of the
bound is violated (for instance ``beta_psi >= 1``), 3 the relaxed LP is
unbounded, 4 bad input.  Numbers go to stdout or ``--out``; errors to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np

from . import lp_backend
from .alp import BasisMatrix, LpInfeasible, LpUnbounded, solve_alp
from .bench_queue import QueueConfig, run_experiment
from .campaign import CSV_HEADER, check_instance, instances, record_row
from .constraint_select import greedy_conic_cover
from .mdp_core import DimensionError, Mdp, bellman_operator, solve_exact
from .relaxation import HypothesisViolation, InvalidCover, ReductionMatrix, evaluate_theorem1, solve_lralp

EXIT_OK, EXIT_CHECK_FAILED, EXIT_HYPOTHESIS, EXIT_UNBOUNDED, EXIT_INPUT = 0, 1, 2, 3, 4
COMMANDS = ("solve-exact", "solve-alp", "solve-lralp", "bounds", "cover",
            "queue-experiment", "verify-campaign")


@dataclass
class RunConfig:
    command: str
    mdp: Optional[Path] = None
    basis: Optional[Path] = None
    W: Optional[Path] = None
    cover: Optional[Path] = None
    psi: str = "ones"
    c: str = "uniform"
    out: Optional[Path] = None
    seed: int = 0
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    tol: float = 1e-9
    phase1_tol: float = lp_backend.PHASE1_TOL
    feas_tol: float = lp_backend.FEAS_TOL
    budget: Optional[int] = None
    n_states: int = 1000
    seeds: int = 10
    dynamics: str = "bernoulli"
    self_loop: bool = True
    discount_lookahead: bool = True
    n_instances: int = 200

    def __post_init__(self):
        for name in ("mdp", "basis", "W", "cover"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise FileNotFoundError(f"--{name}: no such file: {p}")
        for name in ("tol", "phase1_tol", "feas_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"--{name.replace('_', '-')} must be positive")
        if self.threads < 1:
            raise ValueError("--threads must be at least 1")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lralp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, *inputs):
        for name in inputs:
            p.add_argument(f"--{name}", type=Path, required=True, dest=name)
        p.add_argument("--out", type=Path)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--tol", type=float, default=1e-9, help="value-iteration tolerance")
        p.add_argument("--phase1-tol", type=float, default=lp_backend.PHASE1_TOL)
        p.add_argument("--feas-tol", type=float, default=lp_backend.FEAS_TOL)
        return p

    common(sub.add_parser("solve-exact", help="optimal values by value iteration"), "mdp")
    p = common(sub.add_parser("solve-alp", help="approximate LP"), "mdp", "basis")
    p.add_argument("--c", default="uniform", help="state-relevance weights: 'uniform' or a file")
    p = common(sub.add_parser("solve-lralp", help="relaxed approximate LP"), "mdp", "basis", "W")
    p.add_argument("--c", default="uniform")
    p = common(sub.add_parser("bounds", help="evaluate the LRALP error bound"), "mdp", "basis", "W")
    p.add_argument("--c", default="uniform")
    p.add_argument("--psi", default="ones", help="'ones' or a file of positive weights")
    p = common(sub.add_parser("cover", help="greedy conic cover of a basis"), "basis")
    p.add_argument("--psi", default="ones")
    p.add_argument("--budget", type=int)
    p = common(sub.add_parser("queue-experiment", help="controlled-queue policy comparison"))
    p.add_argument("--S", type=int, default=1000, dest="n_states")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--dynamics", choices=("bernoulli", "additive"), default="bernoulli")
    p.add_argument("--no-self-loop", action="store_false", dest="self_loop")
    p.add_argument("--no-discount-lookahead", action="store_false", dest="discount_lookahead")
    p = common(sub.add_parser("verify-campaign", help="randomised bound verification"))
    p.add_argument("--n", type=int, default=200, dest="n_instances")
    return ap


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    return RunConfig(**ns)


@contextmanager
def lp_tolerances(cfg: RunConfig) -> Iterator[None]:
    saved = lp_backend.PHASE1_TOL, lp_backend.FEAS_TOL
    lp_backend.PHASE1_TOL, lp_backend.FEAS_TOL = cfg.phase1_tol, cfg.feas_tol
    try:
        yield
    finally:
        lp_backend.PHASE1_TOL, lp_backend.FEAS_TOL = saved


def _read_vector(spec: str, n: int, default: str, value) -> np.ndarray:
    if spec == default:
        return np.full(n, value(n))
    path = Path(spec)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {spec}")
    if path.suffix == ".json":
        vec = np.asarray(json.loads(path.read_text()), dtype=float)
    else:
        vec = np.loadtxt(path, delimiter=",", ndmin=1)
    if vec.shape != (n,):
        raise DimensionError(f"{spec}: expected {n} entries, got {vec.size}")
    return vec


def read_psi(spec: str, n: int) -> np.ndarray:
    return _read_vector(spec, n, "ones", lambda n: 1.0)


def read_c(spec: str, n: int) -> np.ndarray:
    return _read_vector(spec, n, "uniform", lambda n: 1.0 / n)


def _num(x) -> str:
    return repr(float(x))


def _emit_rows(cfg: RunConfig, header: List[str], rows, out=None) -> None:
    """Write CSV to ``--out`` if given, else to stdout."""
    path = cfg.out if out is None else out
    if path is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _values_rows(J) -> list:
    return [[s, _num(v)] for s, v in enumerate(J)]


def cmd_solve_exact(cfg: RunConfig) -> int:
    mdp = Mdp.load(cfg.mdp)
    sol = solve_exact(mdp, tol=cfg.tol)
    resid = float(np.max(np.abs(sol.values - bellman_operator(mdp, sol.values))))
    print(f"residual {resid!r}")
    _emit_rows(cfg, ["state", "J_star", "policy"],
               [[s, _num(v), int(u)] for s, (v, u) in enumerate(zip(sol.values, sol.policy))])
    return EXIT_OK


def cmd_solve_alp(cfg: RunConfig) -> int:
    mdp = Mdp.load(cfg.mdp)
    phi = BasisMatrix.load(cfg.basis)
    _, J = solve_alp(mdp, phi, read_c(cfg.c, mdp.n_states))
    _emit_rows(cfg, ["state", "J_alp"], _values_rows(J))
    return EXIT_OK


def cmd_solve_lralp(cfg: RunConfig) -> int:
    mdp = Mdp.load(cfg.mdp)
    phi = BasisMatrix.load(cfg.basis)
    W = ReductionMatrix.load(cfg.W, mdp.n_states, mdp.n_actions)
    sol = solve_lralp(mdp, phi, W, read_c(cfg.c, mdp.n_states))
    if not sol.ok:
        print(f"error: relaxed LP is {sol.status.value}", file=sys.stderr)
        return EXIT_UNBOUNDED if sol.status is lp_backend.LpStatus.UNBOUNDED else EXIT_INPUT
    _emit_rows(cfg, ["state", "J_lralp"], _values_rows(sol.J))
    return EXIT_OK


def cmd_bounds(cfg: RunConfig) -> int:
    mdp = Mdp.load(cfg.mdp)
    phi = BasisMatrix.load(cfg.basis)
    W = ReductionMatrix.load(cfg.W, mdp.n_states, mdp.n_actions)
    rep = evaluate_theorem1(mdp, phi, W, read_c(cfg.c, mdp.n_states), read_psi(cfg.psi, mdp.n_states))
    _emit_rows(cfg, rep.csv_header(), [rep.csv_row()])
    if rep.lralp_status == lp_backend.LpStatus.UNBOUNDED.value:
        print("error: relaxed LP is unbounded; the bound is vacuous", file=sys.stderr)
        return EXIT_UNBOUNDED
    return EXIT_OK


def cmd_cover(cfg: RunConfig) -> int:
    phi = BasisMatrix.load(cfg.basis)
    cover = greedy_conic_cover(phi, read_psi(cfg.psi, phi.n_states), cfg.budget)
    text = json.dumps(cover.to_dict())
    if cfg.out is None:
        print(text)
    else:
        cfg.out.write_text(text)
        print(f"size {len(cover.selected_states)} zeta {cover.zeta!r} "
              f"residual {cover.residual_max!r} uncovered {len(cover.uncovered)}")
    return EXIT_OK if cover.complete else EXIT_CHECK_FAILED


def cmd_queue_experiment(cfg: RunConfig) -> int:
    qc = QueueConfig(n_states=cfg.n_states, dynamics=cfg.dynamics,
                     include_self_loop=cfg.self_loop, discount_lookahead=cfg.discount_lookahead)
    res = run_experiment(qc, range(cfg.seed, cfg.seed + cfg.seeds))
    out = Path("queue_out") if cfg.out is None else cfg.out
    out.mkdir(parents=True, exist_ok=True)
    res.write_csv(out / "queue_table.csv", out / "queue_summary.csv")
    wins = res.lra_wins()
    print(f"gap_LRA {float(res.gaps['LRA'][0])!r}")
    print(f"gap_CS mean {float(res.gaps['CS'].mean())!r}")
    print(f"gap_CS_ideal mean {float(res.gaps['CS_ideal'].mean())!r}")
    print(f"LRA <= CS on {int(wins.sum())}/{wins.size} seeds")
    return EXIT_OK


def cmd_verify_campaign(cfg: RunConfig) -> int:
    insts = list(instances(cfg.n_instances, cfg.seed))
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        recs = list(pool.map(check_instance, insts))
    _emit_rows(cfg, CSV_HEADER, [[_num(v) if isinstance(v, float) else v for v in record_row(r)]
                                 for r in recs], out=cfg.out)
    t1 = sum(not r.theorem1_ok for r in recs)
    proof = sum(not r.theorem1.holds_proof for r in recs)
    lemma = sum(not r.lemma_ok for r in recs)
    t2 = [r for r in recs if r.theorem2 is not None]
    t2_bad = sum(not (r.theorem2.holds and r.lralp_below_alp) for r in t2)
    n_inf = sum(math.isinf(r.theorem1.theorem1_rhs) for r in recs)
    summary = (f"instances {len(recs)} theorem1_violations {t1} infinite_rhs {n_inf} "
               f"proof_bound_violations {proof} lemma_violations {lemma} "
               f"theorem2_checked {len(t2)} theorem2_violations {t2_bad}")
    print(summary, file=sys.stderr if cfg.out is None else sys.stdout)
    return EXIT_OK if t1 + proof + lemma + t2_bad == 0 else EXIT_CHECK_FAILED


HANDLERS = {
    "solve-exact": cmd_solve_exact,
    "solve-alp": cmd_solve_alp,
    "solve-lralp": cmd_solve_lralp,
    "bounds": cmd_bounds,
    "cover": cmd_cover,
    "queue-experiment": cmd_queue_experiment,
    "verify-campaign": cmd_verify_campaign,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_config(argv)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        with lp_tolerances(cfg):
            return HANDLERS[cfg.command](cfg)
    except HypothesisViolation as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except LpUnbounded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNBOUNDED
    except (LpInfeasible, InvalidCover, FileNotFoundError, ValueError, KeyError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except lp_backend.NumericallyStalled as exc:
        print(f"error: LP solver stalled: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
