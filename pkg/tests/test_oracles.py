import math

import numpy as np
import pytest

from adamw_shampoo.matfun import ShapeError, fro_norm
from adamw_shampoo.oracles import (
    GradOracle,
    MissingCapability,
    ToyProblem,
    finite_diff_grad,
    gaussian_grad,
    matrix_factorization_oracle,
    quadratic_oracle,
    toy_sample_grad,
)
from adamw_shampoo.rng import make_rng


def mean_within_se(oracle, x, n, seed, k=5.0):
    rng = make_rng(seed)
    draws = np.stack([oracle.sample_grad(x, rng) for _ in range(n)])
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(n)
    dev = np.abs(mean - oracle.exact_grad(x))
    return np.all(dev <= k * np.maximum(se, 1e-300))


def test_toy_branch_expectation_algebra():
    toy = ToyProblem()
    x = np.array([[1.0, 7.0], [-2.0, 4.5]])
    d = x - toy.x_star
    mix = 0.1 * toy.branch(x, True) + 0.9 * toy.branch(x, False)
    assert np.allclose(mix, d / 100, atol=1e-15)
    assert np.allclose(toy.exact_grad(x), d / 100)


def test_toy_first_branch_at_optimum():
    toy = ToyProblem()
    assert np.array_equal(toy.branch(toy.x_star, True), -np.ones((2, 2)))


def test_toy_value_at_x1():
    toy = ToyProblem()
    assert toy.value(toy.x1) == pytest.approx(0.05, abs=1e-15)
    assert toy.value(toy.x_star) == 0.0
    assert fro_norm(toy.exact_grad(toy.x1)) == pytest.approx(math.sqrt(10) / 100, abs=1e-15)


def test_toy_x1_spectral_norm_is_not_seven_point_seven():
    # The weight-decay experiment quotes ||X1||_op <= 7.7; the actual value is larger.
    s = np.linalg.svd(ToyProblem().x1, compute_uv=False)[0]
    assert s == pytest.approx(8.5952416, abs=1e-6)


def test_toy_sample_returns_one_of_two_branches():
    toy = ToyProblem()
    rng = make_rng(0)
    x = toy.x1
    first, second = toy.branch(x, True), toy.branch(x, False)
    hits = 0
    for _ in range(2000):
        g = toy_sample_grad(x, rng)
        is_first = np.array_equal(g, first)
        assert is_first or np.array_equal(g, second)
        hits += is_first
    assert abs(hits / 2000 - 0.1) < 5 * math.sqrt(0.09 / 2000)
    with pytest.raises(ShapeError):
        toy_sample_grad(np.zeros((3, 2)), rng)


def test_toy_objective_and_smoothness_identities():
    toy = ToyProblem()
    rng = make_rng(1)
    for _ in range(20):
        x, y = rng.standard_normal((2, 2, 2)) * 10
        assert abs(toy.value(x) - fro_norm(x - toy.x_star) ** 2 / 200) < 1e-12
        lhs = fro_norm(toy.exact_grad(x) - toy.exact_grad(y))
        assert abs(lhs - 0.01 * fro_norm(x - y)) < 1e-12


def test_oracles_satisfy_protocol():
    assert isinstance(ToyProblem(), GradOracle)
    assert isinstance(quadratic_oracle(2, 3), GradOracle)
    assert isinstance(matrix_factorization_oracle(4, 2), GradOracle)


def test_quadratic_noise_free_and_identity_cases():
    q = quadratic_oracle(3, 2, condition=10, noise=0.0, seed=4)
    x = make_rng(2).standard_normal((3, 2))
    assert np.array_equal(q.sample_grad(x, make_rng(0)), q.exact_grad(x))
    q1 = quadratic_oracle(3, 2, condition=1, noise=0.0, seed=4)
    assert np.allclose(q1.exact_grad(x), x - q1.x_star, atol=1e-14)
    assert q1.smoothness == pytest.approx(1.0)


def test_quadratic_declared_constants():
    q = quadratic_oracle(4, 3, condition=10, noise=0.2, seed=1)
    assert q.sigma_sq == pytest.approx(12 * 0.04)
    lmax = np.linalg.eigvalsh(q.h_left)[-1] * np.linalg.eigvalsh(q.h_right)[-1]
    assert q.smoothness == pytest.approx(lmax)
    with pytest.raises(ValueError):
        quadratic_oracle(2, 2, condition=0.5)
    with pytest.raises(ValueError):
        quadratic_oracle(2, 2, noise=-1)


def test_quadratic_empirical_variance_below_declared():
    q = quadratic_oracle(3, 3, noise=0.3, seed=2)
    x = np.zeros((3, 3))
    rng = make_rng(5)
    draws = np.stack([q.sample_grad(x, rng) for _ in range(20000)])
    var = np.mean(np.sum((draws - q.exact_grad(x)) ** 2, axis=(1, 2)))
    assert var <= q.sigma_sq * (1 + 5 * math.sqrt(2 / (9 * 20000)))


@pytest.mark.parametrize("make", [ToyProblem, lambda: quadratic_oracle(3, 2, seed=3),
                                  lambda: matrix_factorization_oracle(4, 2, seed=1)])
def test_finite_differences_match_exact_gradient(make):
    oracle = make()
    rng = make_rng(8)
    for _ in range(5):
        x = rng.standard_normal(oracle.shape) * 2
        fd = finite_diff_grad(oracle, x, h=1e-4)
        assert np.abs(fd - oracle.exact_grad(x)).max() < 1e-6


def test_finite_diff_needs_value_and_positive_h():
    class NoValue:
        shape = (1, 1)

        def sample_grad(self, x, rng):
            return x

    with pytest.raises(MissingCapability):
        finite_diff_grad(NoValue(), [[1.0]])
    with pytest.raises(ValueError):
        finite_diff_grad(ToyProblem(), np.zeros((2, 2)), h=0)

    class Constant(NoValue):
        def value(self, x):
            return 3.0

    assert np.array_equal(finite_diff_grad(Constant(), np.ones((2, 3))), np.zeros((2, 3)))


def test_sampled_gradients_are_unbiased():
    toy = ToyProblem()
    assert mean_within_se(toy, toy.x1, 20000, seed=1)
    q = quadratic_oracle(3, 2, noise=0.5, seed=1)
    assert mean_within_se(q, np.ones((3, 2)), 20000, seed=2)


def test_gaussian_grad_moments():
    rng = make_rng(3)
    g = gaussian_grad(2, 2, 1.5, 0.5, rng, size=250_000)
    assert abs(g.mean() - 1.5) < 4 * 0.5 / 1e3
    assert g.std() == pytest.approx(0.5, rel=1e-2)
    c = np.einsum("kij,klj->il", g, g) / len(g)
    closed = 2 * 1.5**2 * np.ones((2, 2)) + 2 * 0.25 * np.eye(2)
    assert np.abs(c - closed).max() < 0.02
    with pytest.raises(ValueError):
        gaussian_grad(2, 2, 0.0, 0.0, rng)
    assert gaussian_grad(3, 4, 0.0, 1.0, rng).shape == (3, 4)


def test_make_rng_substreams_are_stable_and_distinct():
    a = make_rng(5, 1, 2).random(4)
    assert np.array_equal(a, make_rng(5, 1, 2).random(4))
    assert not np.array_equal(a, make_rng(5, 2, 1).random(4))
    assert not np.array_equal(make_rng(5).random(4), make_rng(6).random(4))
