"""Stochastic gradient oracles and gradient checks.

An oracle is any object with ``shape`` and ``sample_grad(x, rng)``. The
optional ``exact_grad(x)`` and ``value(x)`` methods, and the constants
``smoothness``, ``sigma_sq`` and ``f_star`` (``None`` when unknown), are
discovered by duck typing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .matfun import ShapeError, as_matrix
from .rng import make_rng


@runtime_checkable
class GradOracle(Protocol):
    shape: tuple[int, int]

    def sample_grad(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


class MissingCapability(AttributeError):
    pass


def _check_shape(x: np.ndarray, shape: tuple[int, int]) -> None:
    if x.shape != shape:
        raise ShapeError(f"expected a {shape} matrix, got {x.shape}")


@dataclass(frozen=True)
class ToyProblem:
    """``f(X) = ||X - X*||_F^2 / 200`` with a two-branch stochastic gradient.

    With probability ``branch_prob`` the sample is ``X - X* - A``, otherwise
    ``-(X - X* - (10/9) A) / 10``. Both branches average to ``(X - X*) / 100``.
    """

    x_star: np.ndarray = field(default_factory=lambda: np.full((2, 2), 4.0))
    a: np.ndarray = field(default_factory=lambda: np.ones((2, 2)))
    branch_prob: float = 0.1

    shape = (2, 2)
    smoothness = 0.01
    f_star = 0.0

    @property
    def x1(self) -> np.ndarray:
        """The starting point used in the weight-decay experiment."""
        return self.x_star + np.array([[-1.0, -2.0], [2.0, 1.0]])

    # The noise g - grad f has a D-dependent part (0.99 D or -0.11 D), so its
    # variance is unbounded over all X.
    sigma_sq = None

    def branch(self, x, first: bool) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.x_star
        if first:
            return d - self.a
        return -0.1 * (d - (10.0 / 9.0) * self.a)

    def sample_grad(self, x, rng: np.random.Generator) -> np.ndarray:
        return self.branch(x, rng.random() < self.branch_prob)

    def exact_grad(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.x_star) / 100.0

    def value(self, x) -> float:
        d = np.asarray(x, dtype=float) - self.x_star
        return float(np.sum(d * d)) / 200.0


def toy_sample_grad(x, rng: np.random.Generator, problem: ToyProblem | None = None) -> np.ndarray:
    problem = problem or ToyProblem()
    x = np.asarray(x, dtype=float)
    _check_shape(x, problem.shape)
    return problem.sample_grad(x, rng)


def _random_spd(dim: int, condition: float, rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = np.geomspace(1.0, 1.0 / condition, dim) if dim > 1 else np.ones(1)
    return (q * eig) @ q.T


@dataclass(frozen=True)
class QuadraticProblem:
    """``f(X) = 0.5 <X - X0, H_L (X - X0) H_R>`` with Gaussian gradient noise."""

    h_left: np.ndarray
    h_right: np.ndarray
    x0: np.ndarray
    noise: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.x0.shape

    @property
    def x_star(self) -> np.ndarray:
        return self.x0

    @property
    def smoothness(self) -> float:
        return float(np.linalg.eigvalsh(self.h_left)[-1] * np.linalg.eigvalsh(self.h_right)[-1])

    @property
    def sigma_sq(self) -> float:
        m, n = self.shape
        return m * n * self.noise**2

    f_star = 0.0

    def exact_grad(self, x) -> np.ndarray:
        return self.h_left @ (np.asarray(x, dtype=float) - self.x0) @ self.h_right

    def value(self, x) -> float:
        d = np.asarray(x, dtype=float) - self.x0
        return 0.5 * float(np.sum(d * (self.h_left @ d @ self.h_right)))

    def sample_grad(self, x, rng: np.random.Generator) -> np.ndarray:
        g = self.exact_grad(x)
        if self.noise > 0:
            g = g + self.noise * rng.standard_normal(g.shape)
        return g


def quadratic_oracle(
    m: int, n: int, condition: float = 10.0, noise: float = 0.1, seed: int = 0
) -> QuadraticProblem:
    if condition < 1:
        raise ValueError(f"condition must be >= 1, got {condition}")
    if noise < 0:
        raise ValueError(f"noise must be >= 0, got {noise}")
    rng = make_rng(seed)
    return QuadraticProblem(
        h_left=_random_spd(m, condition, rng),
        h_right=_random_spd(n, condition, rng),
        x0=rng.standard_normal((m, n)),
        noise=float(noise),
    )


@dataclass(frozen=True)
class MatrixFactorizationProblem:
    """Nonconvex ``f(X) = ||X X^T - T||_F^2 / 4`` for a PSD target of rank ``n``."""

    target: np.ndarray
    n: int
    noise: float = 0.0

    f_star = 0.0
    smoothness = None
    x_star = None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.target.shape[0], self.n)

    @property
    def sigma_sq(self) -> float:
        m, n = self.shape
        return m * n * self.noise**2

    def exact_grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x @ x.T - self.target) @ x

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        r = x @ x.T - self.target
        return 0.25 * float(np.sum(r * r))

    def sample_grad(self, x, rng: np.random.Generator) -> np.ndarray:
        g = self.exact_grad(x)
        if self.noise > 0:
            g = g + self.noise * rng.standard_normal(g.shape)
        return g


def matrix_factorization_oracle(m: int, n: int, noise: float = 0.01, seed: int = 0):
    rng = make_rng(seed)
    u = rng.standard_normal((m, n)) / np.sqrt(m)
    return MatrixFactorizationProblem(target=u @ u.T, n=n, noise=float(noise))


def gaussian_grad(
    m: int, n: int, mu: float, xi: float, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Independent Gaussian entries with mean ``mu`` and standard deviation ``xi``.

    With ``size`` a ``(size, m, n)`` stack of independent draws is returned.
    """
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    shape = (m, n) if size is None else (size, m, n)
    return mu + xi * rng.standard_normal(shape)


def finite_diff_grad(oracle, x, h: float = 1e-4) -> np.ndarray:
    """Entry-wise central differences of ``oracle.value``."""
    value = getattr(oracle, "value", None)
    if not callable(value):
        raise MissingCapability(f"{type(oracle).__name__} has no value() method")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    x = as_matrix(x)
    grad = np.empty_like(x)
    for idx in np.ndindex(*x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (value(xp) - value(xm)) / (2.0 * h)
    return grad
