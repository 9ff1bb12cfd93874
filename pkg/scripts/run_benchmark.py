"""Run the seeded desk-scale synthetic benchmark and write report.json/.md/.svg.

    python scripts/run_benchmark.py --seed 0 --out runs/desk
    python scripts/run_benchmark.py --n 24000 --d 51 --methods nn,iforest,dbscan --timeout 600 --out runs/scale
"""
from __future__ import annotations

import argparse

from anomkit.detectors import METHODS
from anomkit.scenarios import DESK_METHODS, desk_benchmark


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0, help="master seed")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--d", type=int, default=13)
    ap.add_argument("--methods", default=",".join(DESK_METHODS), help=f"subset of {','.join(METHODS)}")
    ap.add_argument("--timeout", type=float, default=0.0, help="seconds per method; 0 = no limit")
    ap.add_argument("--parallel", action="store_true")
    ap.add_argument("--out", required=True, help="output directory")
    args = ap.parse_args()
    report = desk_benchmark(args.seed, n=args.n, d=args.d, methods=args.methods.split(","),
                            timeout=args.timeout or None, parallel=args.parallel)
    paths = report.write(args.out)
    print(report.to_markdown())
    print(f"written to {paths['json'].parent}")


if __name__ == "__main__":
    main()
