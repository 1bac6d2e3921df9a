"""Command line entry point.

Exit codes: 0 success, 1 property violation or infeasible schedule,
2 usage, configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import __version__, harness, theory
from .harness import ConfigError, ExperimentConfig
from .matfun import InvalidParameterError
from .schedule import InfeasibleSchedule, ScheduleInput, derive
from .trace import write_trace_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _exponent(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or 'inf': {text!r}") from None
    return v


def _count(text: str) -> int:
    # Accept 1e6-style integers.
    v = float(text)
    if not v.is_integer() or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adamw-shampoo", description="AdamW-style Shampoo experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def exponents(p):
        p.add_argument("--p", type=_exponent, help="left exponent (number or inf)")
        p.add_argument("--q", type=_exponent, help="right exponent (number or inf)")

    p = sub.add_parser("run", help="run one experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--steps", type=_count)
    p.add_argument("--lambda", dest="lam", type=float, help="override weight decay")
    p.add_argument("--out")
    exponents(p)

    p = sub.add_parser("sweep", help="run a lambda sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--steps", type=_count)
    p.add_argument("--lambda", dest="lam", type=float, action="append", help="sweep value (repeatable)")
    p.add_argument("--out")
    p.add_argument("--workers", type=_count, default=1)
    exponents(p)

    p = sub.add_parser("verify", help="run every theory suite and report as JSON")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--trials", type=_count, default=500)
    p.add_argument("--out", help="directory for verify_report.json (default: print to stdout)")
    p.add_argument("--workers", type=_count, default=1)

    p = sub.add_parser("schedule", help="print the theorem's hyperparameters for given constants")
    p.add_argument("--K", type=_count, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--gap", type=float, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--m", type=_count, required=True)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--eps-hat", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    exponents(p)

    p = sub.add_parser("repro-fig5", help="toy weight-decay sweep with both plot panels")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--steps", type=_count, default=10**6)
    p.add_argument("--full", action="store_true", help="use the full horizon K = 1e9")
    p.add_argument("--out", default="out/fig5")
    p.add_argument("--workers", type=_count, default=1)
    return ap


def _override(config: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.steps is not None:
        changes["steps"] = args.steps
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.p is not None or args.q is not None:
        for key in ("hyper", "schedule"):
            block = getattr(config, key)
            if isinstance(block, dict):
                block = dict(block)
                block.update({k: v for k, v in (("p", args.p), ("q", args.q)) if v is not None})
                changes[key] = block
        if config.hyper == "toy_paper":
            raise ConfigError("--p/--q cannot be combined with the toy_paper hyper preset")
    if not changes:
        return config
    raw = config.to_dict()
    raw.update(changes)
    return ExperimentConfig.from_dict(raw)


def _write_meta(out: Path, command: str, config: dict) -> None:
    # Timestamps live only here so every other output is reproducible byte for byte.
    meta = {"command": command, "version": __version__, "config": config,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _cmd_run(args) -> int:
    config = _override(ExperimentConfig.load(args.config), args)
    result = harness.run_experiment(config, args.lam)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if result.records:
        write_trace_csv(result.records, out / "trace.csv")
    _write_meta(out, "run", config.to_dict())
    s = result.summary
    last = result.records[-1] if result.records else None
    print(f"steps {s.steps_completed}/{config.steps}  lambda {result.lam:g}")
    if last is not None:
        print(f"final f {last.f_value:.6g}  grad_fro {last.grad_fro:.6g}  "
              f"run_avg_grad_nuclear {last.run_avg_grad_nuclear:.6g}  dist {last.dist_to_opt:.6g}")
    print(f"max update op norm {s.max_update_op_norm:.6g}  max lambda*||X||_op {s.max_lambda_x_op_norm:.6g}")
    if not s.complete:
        print(f"run stopped early: {s.error}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _print_rows(rows) -> None:
    print(f"{'lambda':>10} {'steps':>10} {'final dist':>14} {'final avg grad':>16}")
    for r in rows:
        print(f"{r['lambda']:>10g} {r['steps_completed']:>10d} {r['final_dist_to_opt']:>14.6g} "
              f"{r['final_run_avg_grad_fro']:>16.6g}")


def _cmd_sweep(args) -> int:
    config = _override(ExperimentConfig.load(args.config), args)
    if args.lam:
        raw = config.to_dict()
        raw["sweep"] = args.lam
        config = ExperimentConfig.from_dict(raw)
    if not config.sweep:
        raise ConfigError("no sweep values: give 'sweep' in the config or --lambda")
    summary = harness.run_sweep(config, workers=args.workers)
    _write_meta(Path(config.out_dir), "sweep", config.to_dict())
    _print_rows(summary.rows)
    for f in summary.failures:
        print(f"lambda {f['lambda']:g} failed: {f['error']}", file=sys.stderr)
    return EXIT_OK if summary.complete else EXIT_FAIL


def _cmd_verify(args) -> int:
    reports = theory.verify_all(trials=args.trials, seed=args.seed, workers=args.workers)
    doc = {"seed": args.seed, "trials": args.trials, "reports": [r.to_dict() for r in reports]}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify_report.json").write_text(text)
        _write_meta(out, "verify", {"seed": args.seed, "trials": args.trials})
        for r in reports:
            print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.violations}/{r.trials} violations")
    else:
        sys.stdout.write(text)
    bad = [r.name for r in reports if not r.ok]
    if bad:
        print(f"violations in: {', '.join(bad)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _cmd_schedule(args) -> int:
    pq = harness._pair(args.p, args.q)
    inp = ScheduleInput(
        steps=args.K, smoothness=args.L, gap=args.gap, sigma_sq=args.sigma2, m=args.m, n=args.n,
        gamma=args.gamma, tau=args.tau, eps_hat=args.eps_hat, pq=pq,
    )
    out = derive(inp, lam=args.lam)
    h = out.hyper
    for name, value in (
        ("theta", h.theta), ("beta", h.beta), ("eta", h.eta), ("eps", h.eps),
        ("eps_hat", out.eps_hat), ("lambda", h.lam), ("lambda_max", out.lam_max),
        ("sigma_hat_sq", out.sigma_hat_sq), ("nu", out.nu),
        ("x1_op_bound", out.x1_op_bound), ("rate_bound", out.rate_bound),
    ):
        print(f"{name} = {value:.10g}")
    print(f"p, q = {h.pq}")
    return EXIT_OK


def _cmd_repro_fig5(args) -> int:
    steps = 10**9 if args.full else args.steps
    summary, check = harness.repro_fig5(steps, args.seed, args.out, args.workers)
    _write_meta(Path(args.out), "repro-fig5", {"steps": steps, "seed": args.seed})
    _print_rows(summary.rows)
    print(f"min final dist (lambda >= 1e-3) / max final dist (lambda <= 1e-4) = {check.ratio:.4g}"
          f"  [{'PASS' if check.separated else 'FAIL'} at >= 10]")
    if not math.isnan(check.avg_at_1e3):
        print(f"lambda = 0 running avg grad: k=1e3 {check.avg_at_1e3:.4g}, k=K {check.avg_at_end:.4g}"
              f"  [{'PASS' if check.decayed else 'FAIL'} at <= 0.1x]")
    for f in summary.failures:
        print(f"lambda {f['lambda']:g} failed: {f['error']}", file=sys.stderr)
    return EXIT_OK if summary.complete else EXIT_FAIL


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "schedule": _cmd_schedule,
    "repro-fig5": _cmd_repro_fig5,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except InfeasibleSchedule as exc:
        print(f"infeasible schedule: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, InvalidParameterError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
