"""Randomised check of the LRALP error bounds, with a per-instance CSV.

    python3 scripts/run_campaign.py --n 200 --seed 0 --out results/campaign.csv
"""

import argparse
import csv
import math
from pathlib import Path

from lralp.campaign import CSV_HEADER, record_row, run_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results/campaign.csv"))
    args = ap.parse_args()

    recs = run_campaign(args.n, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        w.writerows(record_row(r) for r in recs)

    finite = [r for r in recs if math.isfinite(r.theorem1.theorem1_rhs)]
    ratios = sorted(r.theorem1.ratio for r in finite if not math.isnan(r.theorem1.ratio))
    print(f"instances: {len(recs)}, finite printed bound: {len(finite)}")
    print(f"printed bound violated: {[r.index for r in recs if not r.theorem1_ok]}")
    print(f"proof-form bound violated: {[r.index for r in recs if not r.theorem1.holds_proof]}")
    print(f"lemma violated: {[r.index for r in recs if not r.lemma_ok]}")
    t2 = [r for r in recs if r.theorem2 is not None]
    print(f"cover bound checked on {len(t2)}, violated: {[r.index for r in t2 if not r.theorem2.holds]}")
    if ratios:
        print(f"realized/printed bound: median {ratios[len(ratios) // 2]:.3g}, max {ratios[-1]:.3g}")


if __name__ == "__main__":
    main()
