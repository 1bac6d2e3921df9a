"""Experiment configuration, lambda sweeps, trace files and plots.

A config is a JSON object with these keys (anything else is rejected)::

    problem          "toy_paper" | "quadratic" | "matrix_factorization"
    problem_args     dict, optional; m, n, condition, noise, seed as accepted
                     by the oracle constructors (toy_paper takes none)
    steps            int >= 1
    record_interval  int >= 1, optional (default max(1, steps // 10000))
    seed             int >= 0, optional (default 0)
    hyper            "toy_paper", or a dict with eta, theta, beta and optional
                     lam, eps, p, q, root_interval
    schedule         dict with optional smoothness, gap, sigma_sq, gamma, tau,
                     eps_hat, lam, p, q; missing constants come from the
                     problem (exactly one of hyper / schedule is required)
    sweep            list of lambda values >= 0, optional
    out_dir          str, optional (default "out")

``"toy_paper"`` hyperparameters are theta = 1 - 1/sqrt(K), beta = sqrt(theta),
eta = 1/sqrt(K), eps = 1e-12, with lam taken from ``lam`` or the sweep.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matfun import ExponentPair
from .optimizer import Hyperparams, RunSummary, default_record_interval, run
from .oracles import ToyProblem, matrix_factorization_oracle, quadratic_oracle
from .rng import make_rng
from .schedule import ScheduleInput, derive, toy_paper_hyper
from .trace import ListSink, TraceRecord, write_trace_csv

PROBLEMS = ("toy_paper", "quadratic", "matrix_factorization")
FIG5_LAMBDAS = (1e-1, 1e-2, 1e-3, 1e-4, 0.0)

_TOP_KEYS = {"problem", "problem_args", "steps", "record_interval", "seed", "hyper", "schedule", "sweep", "out_dir"}
_HYPER_KEYS = {"eta", "theta", "beta", "lam", "eps", "p", "q", "root_interval"}
_SCHEDULE_KEYS = {"smoothness", "gap", "sigma_sq", "gamma", "tau", "eps_hat", "lam", "p", "q"}
_PROBLEM_ARGS = {
    "toy_paper": set(),
    "quadratic": {"m", "n", "condition", "noise", "seed"},
    "matrix_factorization": {"m", "n", "noise", "seed"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    steps: int
    hyper: dict | str | None = None
    schedule: dict | None = None
    problem_args: dict = field(default_factory=dict)
    record_interval: int | None = None
    seed: int = 0
    sweep: tuple[float, ...] | None = None
    out_dir: str = "out"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        _check_keys(self.problem_args, _PROBLEM_ARGS[self.problem], "problem_args")
        if not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigError(f"steps must be a positive integer, got {self.steps!r}")
        if self.record_interval is not None and (
            not isinstance(self.record_interval, int) or self.record_interval < 1
        ):
            raise ConfigError(f"record_interval must be >= 1, got {self.record_interval!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if (self.hyper is None) == (self.schedule is None):
            raise ConfigError("exactly one of 'hyper' and 'schedule' is required")
        if isinstance(self.hyper, str):
            if self.hyper != "toy_paper":
                raise ConfigError(f"unknown hyper preset {self.hyper!r}")
        elif self.hyper is not None:
            _check_keys(self.hyper, _HYPER_KEYS, "hyper")
        if self.schedule is not None:
            _check_keys(self.schedule, _SCHEDULE_KEYS, "schedule")
        if self.sweep is not None:
            sweep = tuple(float(v) for v in self.sweep)
            if not sweep or any(not v >= 0 for v in sweep):
                raise ConfigError(f"sweep must be a non-empty list of values >= 0, got {self.sweep!r}")
            object.__setattr__(self, "sweep", sweep)

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        _check_keys(raw, _TOP_KEYS, "config")
        for key in ("problem", "steps"):
            if key not in raw:
                raise ConfigError(f"config is missing {key!r}")
        return cls(**raw)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if out["sweep"] is not None:
            out["sweep"] = list(out["sweep"])
        return out


def _check_keys(d, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _pair(p=None, q=None) -> ExponentPair:
    if p is None and q is None:
        return ExponentPair()
    if q is None:
        return ExponentPair.from_p(float(p))
    if p is None:
        pair = ExponentPair.from_p(float(q))
        return ExponentPair(pair.q, pair.p)
    return ExponentPair(float(p), float(q))


# Problems and hyperparameters ---------------------------------------------

def build_problem(config: ExperimentConfig):
    """Return ``(oracle, x1)`` for the configured problem."""
    args = dict(config.problem_args)
    if config.problem == "toy_paper":
        oracle = ToyProblem()
        return oracle, oracle.x1
    if config.problem == "quadratic":
        oracle = quadratic_oracle(args.pop("m", 4), args.pop("n", 3), **args)
        return oracle, np.zeros(oracle.shape)
    oracle = matrix_factorization_oracle(args.pop("m", 6), args.pop("n", 2), **args)
    x1 = 0.5 * make_rng(config.problem_args.get("seed", 0), 1).standard_normal(oracle.shape)
    return oracle, x1


def resolve_hyper(config: ExperimentConfig, oracle, x1, lam: float | None = None) -> Hyperparams:
    """Hyperparameters for one run; ``lam`` overrides the configured value."""
    if config.hyper == "toy_paper":
        return toy_paper_hyper(config.steps, 0.0 if lam is None else lam)
    if config.hyper is not None:
        h = dict(config.hyper)
        pq = _pair(h.pop("p", None), h.pop("q", None))
        if lam is not None:
            h["lam"] = lam
        return Hyperparams(pq=pq, **h)

    s = dict(config.schedule)
    pq = _pair(s.pop("p", None), s.pop("q", None))
    cfg_lam = s.pop("lam", None)
    lam = cfg_lam if lam is None else lam
    m, n = oracle.shape
    smoothness = s.pop("smoothness", getattr(oracle, "smoothness", None))
    sigma_sq = s.pop("sigma_sq", getattr(oracle, "sigma_sq", None))
    gap = s.pop("gap", None)
    if gap is None and callable(getattr(oracle, "value", None)) and oracle.f_star is not None:
        gap = oracle.value(x1) - oracle.f_star
    missing = [k for k, v in (("smoothness", smoothness), ("sigma_sq", sigma_sq), ("gap", gap)) if v is None]
    if missing:
        raise ConfigError(f"schedule needs {', '.join(missing)} (not known for {config.problem})")
    inp = ScheduleInput(
        steps=config.steps, smoothness=smoothness, gap=gap, sigma_sq=sigma_sq, m=m, n=n, pq=pq, **s
    )
    return derive(inp, lam=lam).hyper


# Runs and sweeps -----------------------------------------------------------

@dataclass
class RunResult:
    lam: float
    summary: RunSummary
    records: list[TraceRecord]
    trace_path: str | None = None


def run_experiment(config: ExperimentConfig, lam: float | None = None) -> RunResult:
    oracle, x1 = build_problem(config)
    hyper = resolve_hyper(config, oracle, x1, lam)
    sink = ListSink()
    summary = run(
        oracle, x1, hyper, config.steps, config.seed, sink=sink,
        record_interval=config.record_interval or default_record_interval(config.steps),
    )
    return RunResult(hyper.lam, summary, sink.records)


def lambda_tag(lam: float) -> str:
    return "lam_0" if lam == 0 else f"lam_{lam:.6g}"


@dataclass
class SweepSummary:
    rows: list[dict]
    failures: list[dict]
    traces: dict[float, list[TraceRecord]]

    @property
    def complete(self) -> bool:
        return not self.failures

    def row(self, lam: float) -> dict:
        for r in self.rows:
            if r["lambda"] == lam:
                return r
        raise KeyError(lam)


def _sweep_member(args) -> tuple[float, RunResult | None, str | None]:
    config, lam = args
    try:
        return lam, run_experiment(config, lam), None
    except Exception as exc:  # noqa: BLE001 - recorded in the failure manifest
        return lam, None, f"{type(exc).__name__}: {exc}"


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def run_sweep(config: ExperimentConfig, workers: int = 1, out_dir=None) -> SweepSummary:
    """Run one experiment per lambda with a common seed.

    Writes ``<tag>.csv`` per completed run, ``summary.csv`` and, when some run
    fails or stops early, ``failures.json``. Results do not depend on
    ``workers``.
    """
    if not config.sweep:
        raise ConfigError("sweep is empty")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(config, lam) for lam in config.sweep]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_member, jobs))
    else:
        results = [_sweep_member(j) for j in jobs]

    rows, failures, traces = [], [], {}
    for lam, res, err in results:
        if res is None:
            failures.append({"lambda": lam, "error": err, "steps_completed": 0})
            continue
        if res.records:
            path = out / f"{lambda_tag(lam)}.csv"
            write_trace_csv(res.records, path)
            traces[lam] = res.records
        if not res.summary.complete:
            failures.append({"lambda": lam, "error": res.summary.error, "steps_completed": res.summary.steps_completed})
        last = res.records[-1] if res.records else None
        rows.append({
            "lambda": lam,
            "steps_completed": res.summary.steps_completed,
            "final_dist_to_opt": last.dist_to_opt if last else math.nan,
            "final_run_avg_grad_fro": last.run_avg_grad_fro if last else math.nan,
            "max_lambda_x_op_norm": res.summary.max_lambda_x_op_norm,
        })
    _write_summary(rows, out / "summary.csv")
    if failures:
        _dump_json({"failures": failures}, out / "failures.json")
    return SweepSummary(rows, failures, traces)


def _write_summary(rows: list[dict], path: Path) -> None:
    cols = ("lambda", "steps_completed", "final_dist_to_opt", "final_run_avg_grad_fro", "max_lambda_x_op_norm")
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(str(r[c]) if isinstance(r[c], int) else f"{r[c]:.17g}" for c in cols))
    path.write_text("\n".join(lines) + "\n")


# Plots ---------------------------------------------------------------------

PLOT_STYLES = {
    "avg_grad": ("run_avg_grad_fro", r"$\frac{1}{k}\sum_{t\leq k}\|\nabla f(X_t)\|_F$"),
    "avg_grad_nuclear": ("run_avg_grad_nuclear", r"$\frac{1}{k}\sum_{t\leq k}\|\nabla f(X_t)\|_*$"),
    "dist": ("dist_to_opt", r"$\|X_k - X^*\|_F$"),
}


def emit_plot_svg(traces: dict, style: str, path) -> None:
    """One log-log polyline per lambda; output bytes depend only on the data."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if style not in PLOT_STYLES:
        raise ValueError(f"unknown plot style {style!r}; expected one of {sorted(PLOT_STYLES)}")
    if not traces:
        raise ValueError("nothing to plot")
    column, ylabel = PLOT_STYLES[style]
    with matplotlib.rc_context({"svg.hashsalt": "adamw-shampoo", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        for lam in sorted(traces, reverse=True):
            recs = traces[lam]
            k = np.array([r.k for r in recs], dtype=float)
            y = np.array([getattr(r, column) for r in recs], dtype=float)
            label = r"$\lambda=0$" if lam == 0 else rf"$\lambda=10^{{{math.log10(lam):.0f}}}$" \
                if math.log10(lam).is_integer() else rf"$\lambda={lam:g}$"
            ax.plot(k, y, label=label, linewidth=1.2)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("step $k$")
        ax.set_ylabel(ylabel)
        ax.legend()
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write plot to {path}: {exc}") from exc
        finally:
            plt.close(fig)


# Toy weight-decay sweep ---------------------------------------------------

@dataclass(frozen=True)
class Fig5Check:
    min_large: float
    max_small: float
    ratio: float
    avg_at_1e3: float
    avg_at_end: float

    @property
    def separated(self) -> bool:
        return self.ratio >= 10.0

    @property
    def decayed(self) -> bool:
        return self.avg_at_end <= 0.1 * self.avg_at_1e3

    @property
    def passed(self) -> bool:
        return self.separated and self.decayed


def fig5_config(steps: int = 10**6, seed: int = 0, out_dir: str = "out/fig5") -> ExperimentConfig:
    # Record every 1000 steps as well as the default interval so that the
    # running average at k = 1000 is always in the trace.
    interval = math.gcd(default_record_interval(steps), 1000)
    return ExperimentConfig(
        problem="toy_paper", steps=steps, hyper="toy_paper", seed=seed,
        sweep=FIG5_LAMBDAS, record_interval=interval, out_dir=out_dir,
    )


def fig5_check(summary: SweepSummary) -> Fig5Check:
    """Separation ratio between the large- and small-lambda groups, and decay at lambda = 0."""
    dist = {r["lambda"]: r["final_dist_to_opt"] for r in summary.rows}
    large = [dist.get(lam, math.nan) for lam in FIG5_LAMBDAS[:3]]
    small = [dist.get(lam, math.nan) for lam in FIG5_LAMBDAS[3:]]
    min_large, max_small = min(large), max(small)
    zero = summary.traces.get(0.0, [])
    at = {r.k: r.run_avg_grad_fro for r in zero}
    return Fig5Check(
        min_large=min_large,
        max_small=max_small,
        ratio=min_large / max_small if max_small > 0 else math.inf,
        avg_at_1e3=at.get(1000, math.nan),
        avg_at_end=zero[-1].run_avg_grad_fro if zero else math.nan,
    )


def repro_fig5(steps: int = 10**6, seed: int = 0, out_dir="out/fig5", workers: int = 1):
    """Run the five-lambda toy sweep and write its traces and both panels."""
    config = fig5_config(steps, seed, str(out_dir))
    summary = run_sweep(config, workers=workers, out_dir=out_dir)
    out = Path(out_dir)
    if summary.traces:
        emit_plot_svg(summary.traces, "avg_grad", out / "fig5_avg_grad.svg")
        emit_plot_svg(summary.traces, "dist", out / "fig5_dist.svg")
    return summary, fig5_check(summary)


def default_workers() -> int:
    return max(1, min(len(FIG5_LAMBDAS), os.cpu_count() or 1))
