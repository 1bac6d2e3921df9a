"""Fit the decay rate of the running-average nuclear gradient norm on the toy problem.

The slope of log(avg ||grad f||_*) against log k over the second half of the
trace is a rough empirical rate; the theory gives K^(-1/4) up to constants.
"""

import argparse

from adamw_shampoo.harness import ExperimentConfig, run_experiment
from adamw_shampoo.theory import fit_rate_slope


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=float, default=1e5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lam", type=float, default=0.0)
    args = ap.parse_args()
    cfg = ExperimentConfig(problem="toy_paper", steps=int(args.steps), hyper="toy_paper", seed=args.seed)
    res = run_experiment(cfg, args.lam)
    slope, r2 = fit_rate_slope(res.records)
    print(f"K = {cfg.steps}  lambda = {args.lam:g}  slope = {slope:.4f}  r^2 = {r2:.4f}")


if __name__ == "__main__":
    main()
