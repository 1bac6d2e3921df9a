"""Run every randomized inequality suite and print a one-line verdict per suite."""

import argparse
import json
import time

from adamw_shampoo import theory


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--json", help="also write the reports here")
    args = ap.parse_args()

    t0 = time.perf_counter()
    reports = theory.verify_all(args.trials, args.seed, args.workers)
    for r in reports:
        print(f"{'ok ' if r.ok else 'BAD'} {r.name:<40} trials {r.trials:>7}  violations {r.violations}"
              f"  worst slack {r.worst_slack:.3g}")
    print(f"{time.perf_counter() - t0:.1f}s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)
    return 0 if all(r.ok for r in reports) else 1


if __name__ == "__main__":
    raise SystemExit(main())
