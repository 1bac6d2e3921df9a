"""Hyperparameters prescribed by the convergence theorem, and its hypotheses.

Given the horizon ``K``, smoothness ``L``, initial gap ``Delta = f(X1) - f*``
and noise level ``sigma^2``, :func:`derive` returns::

    sigma_hat^2 = max(sigma^2, L Delta / (K gamma^2))
    1 - theta   = sqrt(L Delta / (K sigma_hat^2))
    beta        = sqrt(theta)
    eps         = tau sigma_hat^2 / (m + n)
    eta         = sqrt(eps_hat Delta / (4 L K sigma_hat^2))
    lam_max     = K^(-3/4) (L^3 sigma_hat^2 / Delta)^(1/4) / sqrt(1152 eps_hat)
    nu          = sqrt(L Delta / sigma_hat^2) / 1152

with ``eps_hat = eps`` unless given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .matfun import ExponentPair, spectral_norm
from .optimizer import Hyperparams

# Relative slack for hypotheses that the derived settings meet with equality.
_REL_SLACK = 1e-12


class InfeasibleSchedule(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleInput:
    steps: int
    smoothness: float
    gap: float
    sigma_sq: float
    m: int
    n: int
    gamma: float = 1.0
    tau: float = 1.0
    eps_hat: float | None = None
    pq: ExponentPair = field(default_factory=ExponentPair)


@dataclass(frozen=True)
class ScheduleOutput:
    hyper: Hyperparams
    sigma_hat_sq: float
    nu: float
    eps_hat: float
    lam_max: float
    x1_op_bound: float
    rate_bound: float


def derive(inp: ScheduleInput, lam: float | None = None) -> ScheduleOutput:
    """Theorem settings; ``lam`` defaults to the largest permitted value."""
    K, L, gap = inp.steps, inp.smoothness, inp.gap
    if not K >= 1:
        raise InfeasibleSchedule(f"steps K must be >= 1, got {K}")
    if not L > 0:
        raise InfeasibleSchedule(f"smoothness L must be positive, got {L}")
    if not gap > 0:
        raise InfeasibleSchedule(f"gap f(X1) - f* must be positive, got {gap}")
    if not inp.sigma_sq >= 0:
        raise InfeasibleSchedule(f"sigma^2 must be nonnegative, got {inp.sigma_sq}")
    if not 0 < inp.gamma <= 1:
        raise InfeasibleSchedule(f"gamma must lie in (0, 1], got {inp.gamma}")
    if not 0 < inp.tau <= 1:
        raise InfeasibleSchedule(f"tau must lie in (0, 1], got {inp.tau}")

    sigma_hat_sq = max(inp.sigma_sq, L * gap / (K * inp.gamma**2))
    one_minus_theta = math.sqrt(L * gap / (K * sigma_hat_sq))
    theta = 1.0 - one_minus_theta
    if not 0 <= theta < 1:
        raise InfeasibleSchedule(f"theta = {theta} falls outside [0, 1)")
    beta = math.sqrt(theta)
    if not beta < 1:
        raise InfeasibleSchedule(f"beta = sqrt(theta) = {beta} rounds to 1; K = {K} is too large")
    eps = inp.tau * sigma_hat_sq / (inp.m + inp.n)
    eps_hat = eps if inp.eps_hat is None else inp.eps_hat
    if not eps_hat > 0:
        raise InfeasibleSchedule(f"eps_hat must be positive, got {eps_hat}")
    eta = math.sqrt(eps_hat * gap / (4.0 * L * K * sigma_hat_sq))
    lam_max = (L**3 * sigma_hat_sq / gap) ** 0.25 / (math.sqrt(1152.0 * eps_hat) * K**0.75)
    if lam is None:
        lam = lam_max
    elif not 0 <= lam <= lam_max * (1 + _REL_SLACK):
        raise InfeasibleSchedule(f"lambda = {lam} exceeds the permitted maximum {lam_max}")
    nu = math.sqrt(L * gap / sigma_hat_sq) / 1152.0
    x1_op_bound = math.sqrt(eps_hat * K * gap / (L * sigma_hat_sq))
    rate = max((inp.sigma_sq * L * gap / K) ** 0.25, math.sqrt(L * gap / (K * inp.gamma)))
    rate_bound = (8.0 * math.sqrt(inp.m + inp.n) + 119.0 * math.sqrt(sigma_hat_sq / eps_hat)) * rate

    hyper = Hyperparams(eta=eta, theta=theta, beta=beta, lam=lam, eps=eps, pq=inp.pq)
    return ScheduleOutput(
        hyper=hyper,
        sigma_hat_sq=sigma_hat_sq,
        nu=nu,
        eps_hat=eps_hat,
        lam_max=lam_max,
        x1_op_bound=x1_op_bound,
        rate_bound=rate_bound,
    )


def toy_paper_hyper(steps: int, lam: float, pq: ExponentPair | None = None) -> Hyperparams:
    """Settings of the weight-decay toy experiment, taken verbatim for horizon ``K``."""
    theta = 1.0 - 1.0 / math.sqrt(steps)
    return Hyperparams(
        eta=1.0 / math.sqrt(steps),
        theta=theta,
        beta=math.sqrt(theta),
        lam=lam,
        eps=1e-12,
        pq=pq or ExponentPair(),
    )


@dataclass(frozen=True)
class RegimeCheck:
    name: str
    lhs: float
    rhs: float
    passed: bool


@dataclass(frozen=True)
class RegimeReport:
    checks: tuple[RegimeCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> RegimeCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def describe(self) -> str:
        return "\n".join(
            f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.lhs:.6g} <= {c.rhs:.6g}"
            for c in self.checks
        )


def _le(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + _REL_SLACK * abs(rhs)


def check_regime(hyper: Hyperparams, steps: int, nu: float, x1) -> RegimeReport:
    """Evaluate the hypotheses under which weight decay confines the iterates."""
    K = float(steps)
    root_nu = math.sqrt(nu)
    lam, eta = hyper.lam, hyper.eta
    x1_norm = spectral_norm(np.asarray(x1, dtype=float))
    x1_rhs = math.inf if lam == 0 else root_nu / (K**0.25 * lam)
    theta, beta = hyper.theta, hyper.beta
    checks = (
        RegimeCheck("eta*lambda", eta * lam, root_nu / (2.0 * K**1.25), _le(eta * lam, root_nu / (2.0 * K**1.25))),
        RegimeCheck("||X1||_op", x1_norm, x1_rhs, _le(x1_norm, x1_rhs)),
        RegimeCheck("sqrt(nu)/K^(1/4)", root_nu / K**0.25, 1.0, _le(root_nu / K**0.25, 1.0)),
        RegimeCheck("theta<=beta", theta, beta, theta <= beta),
        RegimeCheck("beta<=sqrt(theta)", beta, math.sqrt(theta), _le(beta, math.sqrt(theta))),
        RegimeCheck("sqrt(theta)<1", math.sqrt(theta), 1.0, math.sqrt(theta) < 1.0),
    )
    return RegimeReport(checks)
