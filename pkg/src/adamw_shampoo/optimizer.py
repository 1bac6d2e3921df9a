"""AdamW-style Shampoo.

One iteration, with ``G`` the stochastic gradient at ``X``::

    M <- theta * M + (1 - theta) * G
    L <- beta * L + (1 - beta) * G G^T
    R <- beta * R + (1 - beta) * G^T G
    X <- (1 - lam * eta) * X - eta * (L + eps I)^(-1/2p) M (R + eps I)^(-1/2q)

There is no bias correction and the weight decay acts on the pre-update
iterate. ``p = inf`` (or ``q = inf``) drops the corresponding factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .matfun import (
    ExponentPair,
    InvalidParameterError,
    NotPsdError,
    ShapeError,
    SingularMatrixError,
    SymPsd,
    as_matrix,
    batch_singular_values,
)
from .rng import make_rng
from .trace import NullSink, TraceRecord, TraceSink

__all__ = [
    "ExponentPair",
    "Hyperparams",
    "OptimizerState",
    "StepDiagnostics",
    "RunSummary",
    "init",
    "step",
    "run",
]


@dataclass(frozen=True)
class Hyperparams:
    eta: float
    theta: float
    beta: float
    lam: float = 0.0
    eps: float = 1e-12
    pq: ExponentPair = field(default_factory=ExponentPair)
    # Recompute preconditioner roots every `root_interval` steps.
    root_interval: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidParameterError(f"eta must be positive, got {self.eta}")
        for name in ("theta", "beta"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise InvalidParameterError(f"{name} must lie in [0, 1), got {v}")
        if not self.lam >= 0:
            raise InvalidParameterError(f"lam must be nonnegative, got {self.lam}")
        if not self.eps > 0:
            raise InvalidParameterError(f"eps must be positive, got {self.eps}")
        if self.root_interval < 1:
            raise InvalidParameterError("root_interval must be >= 1")

    @property
    def theorem_regime(self) -> bool:
        """Whether ``theta <= beta <= sqrt(theta)``, the update-bound regime."""
        return self.theta <= self.beta <= math.sqrt(self.theta)


@dataclass(frozen=True)
class OptimizerState:
    x: np.ndarray
    m_mom: np.ndarray
    l: SymPsd
    r: SymPsd
    k: int = 0
    # Cached inverse roots, only populated when root_interval > 1.
    l_root: np.ndarray | None = None
    r_root: np.ndarray | None = None


@dataclass(frozen=True)
class StepDiagnostics:
    update_op_norm: float
    x_op_norm: float
    trace_l_sqrt: float
    trace_r_sqrt: float


def init(x1, hyper: Hyperparams | None = None) -> OptimizerState:
    x = as_matrix(x1, "x1").copy()
    m, n = x.shape
    return OptimizerState(
        x=x, m_mom=np.zeros_like(x), l=SymPsd.zeros(m), r=SymPsd.zeros(n), k=0
    )


_STATUS = {
    _kernel.LEFT_NOT_PSD: (NotPsdError, "left preconditioner is not PSD"),
    _kernel.RIGHT_NOT_PSD: (NotPsdError, "right preconditioner is not PSD"),
    _kernel.LEFT_SINGULAR: (SingularMatrixError, "left preconditioner is singular"),
    _kernel.RIGHT_SINGULAR: (SingularMatrixError, "right preconditioner is singular"),
    _kernel.NONFINITE_GRAD: (ValueError, "gradient has non-finite entries"),
}


def _trace_sqrt(s: SymPsd) -> float:
    return float(np.sum(np.sqrt(np.maximum(s.eig.eigenvalues, 0.0))))


def step(
    state: OptimizerState, g, hyper: Hyperparams, *, diagnostics: bool = True
) -> tuple[OptimizerState, StepDiagnostics | None]:
    """Apply one iteration and return the new state.

    The input state is left untouched. Diagnostics refer to this step's
    shifted preconditioners and to the new iterate.
    """
    g = np.ascontiguousarray(g, dtype=float)
    if g.shape != state.x.shape:
        raise ShapeError(f"gradient shape {g.shape} != parameter shape {state.x.shape}")

    pq = hyper.pq
    k = state.k + 1
    common = (
        state.x, state.m_mom, state.l.matrix, state.r.matrix, g,
        hyper.theta, hyper.beta, hyper.lam, hyper.eta, hyper.eps, pq.inv_p, pq.inv_q,
    )
    if hyper.root_interval == 1:
        x, m_mom, l_mat, r_mat, upd_norm, x_norm, status = _kernel.fused_step(
            *common, diagnostics
        )
        l_root = r_root = None
    else:
        refresh = state.l_root is None or (k - 1) % hyper.root_interval == 0
        if refresh:
            m, n = g.shape
            l_root, r_root = np.empty((m, m)), np.empty((n, n))
        else:
            l_root, r_root = state.l_root, state.r_root
        x, m_mom, l_mat, r_mat, l_root, r_root, upd_norm, x_norm, status = (
            _kernel.fused_step_cached(*common, refresh, l_root, r_root)
        )
    if status != _kernel.OK:
        exc, text = _STATUS[status]
        raise exc(f"step {k}: {text}")

    l = SymPsd._trusted(l_mat)
    r = SymPsd._trusted(r_mat)
    new_state = OptimizerState(x, m_mom, l, r, k, l_root, r_root)
    diag = None
    if diagnostics:
        diag = StepDiagnostics(
            update_op_norm=upd_norm,
            x_op_norm=x_norm,
            trace_l_sqrt=_trace_sqrt(l.shifted(hyper.eps)),
            trace_r_sqrt=_trace_sqrt(r.shifted(hyper.eps)),
        )
    return new_state, diag


@dataclass
class RunSummary:
    final_state: OptimizerState
    steps_completed: int
    complete: bool
    records: int
    min_grad_fro: float
    mean_grad_fro: float
    min_grad_nuclear: float
    mean_grad_nuclear: float
    max_update_op_norm: float
    max_lambda_x_op_norm: float
    error: str | None = None


def default_record_interval(steps: int) -> int:
    return max(1, steps // 10_000)


def run(
    oracle,
    x1,
    hyper: Hyperparams,
    steps: int,
    seed: int,
    sink: TraceSink | None = None,
    record_interval: int | None = None,
) -> RunSummary:
    """Drive the optimizer for ``steps`` iterations against ``oracle``.

    Exact-gradient norms are accumulated at every step so the running
    averages in the trace are true prefix means; everything else is sampled
    at steps ``1``, multiples of ``record_interval``, and the last step.
    """
    if steps < 1:
        raise InvalidParameterError("steps must be >= 1")
    interval = record_interval or default_record_interval(steps)
    if interval < 1:
        raise InvalidParameterError("record_interval must be >= 1")
    sink = sink if sink is not None else NullSink()
    rng = make_rng(seed)
    state = init(x1, hyper)

    has_exact = callable(getattr(oracle, "exact_grad", None))
    has_value = callable(getattr(oracle, "value", None))
    x_star = getattr(oracle, "x_star", None)

    pending: list[np.ndarray] = []
    sum_fro = sum_nuc = 0.0
    rec_fro: list[float] = []
    rec_nuc: list[float] = []
    max_upd = max_lx = 0.0
    n_records = 0
    error = None

    for k in range(1, steps + 1):
        x_k = state.x
        is_record = k == 1 or k % interval == 0 or k == steps
        if has_exact:
            pending.append(oracle.exact_grad(x_k))
        try:
            g = oracle.sample_grad(x_k, rng)
        except Exception as exc:  # noqa: BLE001 - reported in the summary
            error = f"oracle failed at step {k}: {exc!r}"
            break
        state, diag = step(state, g, hyper, diagnostics=is_record)
        if not is_record:
            continue

        if has_exact:
            stack = np.stack(pending)
            pending.clear()
            fro = np.sqrt(np.sum(stack * stack, axis=(1, 2)))
            nuc = np.sum(batch_singular_values(stack), axis=1)
            sum_fro += float(np.sum(fro))
            sum_nuc += float(np.sum(nuc))
            grad_fro, grad_nuc = float(fro[-1]), float(nuc[-1])
        else:
            grad_fro = grad_nuc = math.nan
        record = TraceRecord(
            k=k,
            f_value=float(oracle.value(x_k)) if has_value else math.nan,
            grad_fro=grad_fro,
            grad_nuclear=grad_nuc,
            run_avg_grad_fro=sum_fro / k if has_exact else math.nan,
            run_avg_grad_nuclear=sum_nuc / k if has_exact else math.nan,
            dist_to_opt=float(np.linalg.norm(x_k - x_star)) if x_star is not None else math.nan,
            update_op_norm=diag.update_op_norm,
            x_op_norm=diag.x_op_norm,
            trace_l_sqrt=diag.trace_l_sqrt,
            trace_r_sqrt=diag.trace_r_sqrt,
        )
        sink.push(record)
        n_records += 1
        rec_fro.append(grad_fro)
        rec_nuc.append(grad_nuc)
        max_upd = max(max_upd, diag.update_op_norm)
        max_lx = max(max_lx, hyper.lam * diag.x_op_norm)

    def _stat(values, fn):
        return float(fn(values)) if values else math.nan

    return RunSummary(
        final_state=state,
        steps_completed=state.k,
        complete=error is None,
        records=n_records,
        min_grad_fro=_stat(rec_fro, np.min),
        mean_grad_fro=_stat(rec_fro, np.mean),
        min_grad_nuclear=_stat(rec_nuc, np.min),
        mean_grad_nuclear=_stat(rec_nuc, np.mean),
        max_update_op_norm=max_upd,
        max_lambda_x_op_norm=max_lx,
        error=error,
    )
