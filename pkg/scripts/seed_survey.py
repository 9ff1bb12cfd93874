"""How often each method recovers the injected anomalies across master seeds.

Runs the desk-scale synthetic benchmark (n=1000, d=13) for seeds 0..N-1 and
prints injected_found and flagged fraction per method and seed.

    python scripts/seed_survey.py --seeds 20 [--start 0] [--methods nn,dbscan,iforest,ae-ensemble]
"""
from __future__ import annotations

import argparse
from collections import defaultdict

from anomkit.scenarios import DESK_METHODS, desk_benchmark


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--start", type=int, default=0, help="first seed")
    ap.add_argument("--methods", default=",".join(DESK_METHODS))
    args = ap.parse_args()
    methods = args.methods.split(",")
    full = defaultdict(int)
    print("seed " + " ".join(f"{m:>18}" for m in methods))
    for seed in range(args.start, args.start + args.seeds):
        report = desk_benchmark(seed, methods=methods)
        cells = []
        for m in methods:
            r = report.row(m)
            if r.status != "ok":
                cells.append(r.status)
                continue
            full[m] += r.injected_found == 4
            cells.append(f"{r.injected_found}/4 {100 * r.flagged_fraction:5.1f}% {','.join(i[-1] for i in r.found_ids):>7}")
        print(f"{seed:>4} " + " ".join(f"{c:>18}" for c in cells), flush=True)
    print("all four found: " + ", ".join(f"{m} {full[m]}/{args.seeds}" for m in methods))


if __name__ == "__main__":
    main()
