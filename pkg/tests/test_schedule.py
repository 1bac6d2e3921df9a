import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adamw_shampoo.matfun import ExponentPair
from adamw_shampoo.optimizer import Hyperparams
from adamw_shampoo.schedule import (
    InfeasibleSchedule,
    ScheduleInput,
    check_regime,
    derive,
    toy_paper_hyper,
)

BASE = dict(steps=10**6, smoothness=1.0, gap=1.0, sigma_sq=1.0, m=2, n=2, gamma=1.0, tau=1.0)


def test_worked_example():
    out = derive(ScheduleInput(**BASE))
    h = out.hyper
    assert out.sigma_hat_sq == 1.0
    assert h.theta == pytest.approx(0.999, abs=1e-15)
    assert h.beta == pytest.approx(math.sqrt(0.999), abs=1e-15)
    assert h.eps == 0.25 and out.eps_hat == 0.25
    assert h.eta == pytest.approx(2.5e-4, rel=1e-12)
    # (L^3 sigma^2 / gap)^(1/4) = 1, so lam_max = 1 / (sqrt(1152 * 0.25) * 10^4.5).
    assert out.lam_max == pytest.approx(1 / (math.sqrt(288) * 10**4.5), rel=1e-12)
    assert 1.86e-6 <= out.lam_max <= 1.87e-6
    assert h.lam == out.lam_max
    assert out.nu == pytest.approx(1 / 1152)
    assert out.x1_op_bound == pytest.approx(500.0)


def test_noise_free_takes_second_arm_of_max():
    out = derive(ScheduleInput(**{**BASE, "sigma_sq": 0.0, "steps": 10**4, "gap": 2.0, "smoothness": 3.0}))
    assert out.sigma_hat_sq == pytest.approx(3.0 * 2.0 / 10**4)
    assert out.hyper.theta == pytest.approx(0.0, abs=1e-12)


def test_toy_paper_passthrough():
    h = toy_paper_hyper(10**9, 1e-3)
    assert h.theta == 1 - 1 / math.sqrt(1e9)
    assert h.beta == math.sqrt(h.theta)
    assert h.eta == 1 / math.sqrt(1e9)
    assert h.eps == 1e-12 and h.lam == 1e-3


@pytest.mark.parametrize("bad", [dict(gap=0.0), dict(gap=-1.0), dict(smoothness=0.0), dict(sigma_sq=-1.0),
                                 dict(gamma=0.0), dict(gamma=1.5), dict(tau=0.0), dict(tau=2.0), dict(steps=0)])
def test_infeasible_inputs(bad):
    with pytest.raises(InfeasibleSchedule):
        derive(ScheduleInput(**{**BASE, **bad}))


def test_lambda_above_max_rejected_and_below_accepted():
    out = derive(ScheduleInput(**BASE))
    with pytest.raises(InfeasibleSchedule):
        derive(ScheduleInput(**BASE), lam=2 * out.lam_max)
    assert derive(ScheduleInput(**BASE), lam=0.0).hyper.lam == 0.0


def test_huge_horizon_rounds_beta_to_one():
    with pytest.raises(InfeasibleSchedule):
        derive(ScheduleInput(**{**BASE, "steps": 10**40}))


def test_regime_of_derived_schedule_passes():
    out = derive(ScheduleInput(**BASE))
    x1 = np.diag([out.x1_op_bound, 1.0])
    rep = check_regime(out.hyper, BASE["steps"], out.nu, x1)
    assert rep.all_passed, rep.describe()


def test_regime_lambda_zero_and_bad_moments():
    h = Hyperparams(eta=1.0, theta=0.9, beta=0.8, lam=0.0)
    rep = check_regime(h, 100, 1.0, np.eye(2) * 1e9)
    assert rep["eta*lambda"].passed and rep["||X1||_op"].passed
    c = rep["theta<=beta"]
    assert not c.passed and (c.lhs, c.rhs) == (0.9, 0.8)
    assert not rep.all_passed
    assert "FAIL  theta<=beta" in rep.describe()


def test_regime_flags_large_x1():
    out = derive(ScheduleInput(**BASE))
    rep = check_regime(out.hyper, BASE["steps"], out.nu, np.eye(2) * 2 * out.x1_op_bound)
    assert not rep["||X1||_op"].passed


@settings(max_examples=200, deadline=None)
@given(
    st.integers(10, 10**12), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.0, 1e3),
    st.integers(1, 64), st.integers(1, 64), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0),
)
def test_derived_settings_satisfy_theorem_conditions(K, L, gap, s2, m, n, gamma, tau):
    try:
        out = derive(ScheduleInput(K, L, gap, s2, m, n, gamma, tau))
    except InfeasibleSchedule:
        return
    h = out.hyper
    # 1 - theta is recovered from the stored theta, which costs ~ulp / (1 - theta) relative accuracy.
    slack = 1 + 1e-12 + 4 * np.finfo(float).eps / max(1 - h.theta, 1e-300)
    assert h.theta <= h.beta <= math.sqrt(h.theta) * slack and h.eta > 0 and h.eps > 0
    assert h.eta <= math.sqrt(out.eps_hat) / (2 * L) * slack
    assert h.eta <= math.sqrt(out.eps_hat) * (1 - h.theta) / (2 * L) * slack
    x1 = np.eye(2) * out.x1_op_bound
    rep = check_regime(h, K, out.nu, x1)
    assert rep.all_passed, rep.describe()


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 10**9), st.floats(0.0, 10.0), st.floats(1e-2, 1.0))
def test_rate_bound_nonincreasing_in_horizon(K, s2, gamma):
    inp = dict(BASE, sigma_sq=s2, gamma=gamma)
    a = derive(ScheduleInput(**{**inp, "steps": K})).rate_bound
    b = derive(ScheduleInput(**{**inp, "steps": 2 * K})).rate_bound
    assert b <= a * (1 + 1e-12)


def test_one_sided_pair_is_carried_through():
    out = derive(ScheduleInput(**BASE, pq=ExponentPair(math.inf, 1)))
    assert out.hyper.pq.p == math.inf
