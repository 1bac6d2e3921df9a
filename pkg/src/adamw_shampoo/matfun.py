"""Fractional powers of symmetric PSD matrices and matrix norms.

Matrices are plain 2-D float ``numpy`` arrays. Symmetric PSD operands are
wrapped in :class:`SymPsd`, which symmetrizes on construction and caches its
eigendecomposition so a preconditioner root and its trace diagnostics share
one ``eigh`` call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Relative tolerance below which negative eigenvalues count as rounding noise.
PSD_TOL = 1e-10


class ShapeError(ValueError):
    pass


class InvalidParameterError(ValueError):
    pass


class NotPsdError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    pass


class NumericFailure(ArithmeticError):
    def __init__(self, message: str, shape: tuple[int, ...]):
        super().__init__(f"{message} (input shape {shape})")
        self.shape = shape


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float array."""
    out = np.asarray(a, dtype=float)
    if out.ndim == 0:
        out = out.reshape(1, 1)
    if out.ndim != 2 or out.size == 0:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {out.shape}")
    if not np.isfinite(out).all():
        raise ValueError(f"{name} has non-finite entries")
    return out


@dataclass(frozen=True)
class ExponentPair:
    """Conjugate exponents ``1/p + 1/q = 1``; ``math.inf`` marks a one-sided mode."""

    p: float = 2.0
    q: float = 2.0

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        if not (p >= 1 and q >= 1):
            raise InvalidParameterError(f"exponents must be >= 1, got p={p}, q={q}")
        if abs(1.0 / p + 1.0 / q - 1.0) > 1e-12:
            raise InvalidParameterError(f"1/p + 1/q must equal 1, got p={p}, q={q}")

    @classmethod
    def from_p(cls, p: float) -> ExponentPair:
        p = float(p)
        if math.isinf(p):
            return cls(math.inf, 1.0)
        if p == 1.0:
            return cls(1.0, math.inf)
        return cls(p, p / (p - 1.0))

    @property
    def inv_p(self) -> float:
        return 1.0 / self.p

    @property
    def inv_q(self) -> float:
        return 1.0 / self.q

    def __str__(self) -> str:
        return f"({self.p:g},{self.q:g})"


class EigenDecomp(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class SymPsd:
    """Symmetric positive semidefinite matrix.

    The input is replaced by ``(S + S.T) / 2``. With ``check=True`` the
    eigendecomposition is computed immediately and negative eigenvalues beyond
    ``PSD_TOL`` relative to the spectrum scale raise :class:`NotPsdError`;
    otherwise the same check runs the first time :attr:`eig` is accessed.
    """

    __slots__ = ("matrix", "_eig")

    def __init__(self, matrix, *, check: bool = True):
        a = as_matrix(matrix)
        if a.shape[0] != a.shape[1]:
            raise ShapeError(f"SymPsd needs a square matrix, got {a.shape}")
        self.matrix = 0.5 * (a + a.T)
        self._eig: EigenDecomp | None = None
        if check:
            self.eig

    @classmethod
    def _trusted(cls, matrix: np.ndarray) -> SymPsd:
        # Caller guarantees a finite, exactly symmetric square array.
        obj = cls.__new__(cls)
        obj.matrix = matrix
        obj._eig = None
        return obj

    @classmethod
    def zeros(cls, dim: int) -> SymPsd:
        return cls._trusted(np.zeros((dim, dim)))

    @classmethod
    def identity(cls, dim: int) -> SymPsd:
        return cls._trusted(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eig(self) -> EigenDecomp:
        if self._eig is None:
            self._eig = sym_eig(self)
        return self._eig

    def shifted(self, eps: float) -> SymPsd:
        """Return ``S + eps * I``.

        The eigendecomposition is inherited from ``S`` with the eigenvalues
        clamped at zero before the shift, so the result stays invertible even
        when ``eps`` is below the rounding error of ``S``'s largest eigenvalue.
        """
        w, v = self.eig
        out = SymPsd._trusted(self.matrix + eps * np.eye(self.dim))
        out._eig = EigenDecomp(np.maximum(w, 0.0) + eps, v)
        return out

    def __repr__(self) -> str:
        return f"SymPsd({self.matrix!r})"


def sym_eig(s: SymPsd) -> EigenDecomp:
    """Eigendecomposition with ascending eigenvalues and orthonormal columns."""
    a = s.matrix
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigensolver did not converge: {exc}", a.shape) from exc
    scale = float(np.max(np.abs(w)))
    if w[0] < -PSD_TOL * scale:
        raise NotPsdError(
            f"matrix is not PSD: smallest eigenvalue {w[0]:.3e} vs scale {scale:.3e}"
        )
    return EigenDecomp(w, v)


def _power_from_eig(eig: EigenDecomp, t: float) -> np.ndarray:
    w, v = eig
    if t == 0:
        return np.eye(len(w))
    w = np.maximum(w, 0.0)
    if t < 0 and w[0] <= 0.0:
        raise SingularMatrixError(
            f"negative power {t} of a singular matrix (smallest eigenvalue {w[0]:.3e})"
        )
    return (v * w**t) @ v.T


def psd_power(s: SymPsd, t: float) -> SymPsd:
    """``U diag(max(lambda, 0)**t) U^T``; ``t = 0`` gives the identity."""
    out = _power_from_eig(s.eig, t)
    return SymPsd._trusted(0.5 * (out + out.T))


def singular_values(a) -> np.ndarray:
    """Singular values in descending order.

    LAPACK's SVD keeps small singular values accurate to ~1e-16 of the largest;
    square roots of Gram eigenvalues would only give ~1e-8, which is too coarse
    for rank-deficient inputs.
    """
    a = as_matrix(a)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}", a.shape) from exc


def schatten_norm(a, p: float) -> float:
    if not (p >= 1):
        raise InvalidParameterError(f"Schatten exponent must be >= 1 or inf, got {p}")
    sv = singular_values(a)
    if math.isinf(p):
        return float(sv[0])
    if sv[0] == 0.0:
        return 0.0
    # Normalize by the largest singular value so large p cannot overflow.
    top = sv[0]
    return float(top * np.sum((sv / top) ** p) ** (1.0 / p))


def nuclear_norm(a) -> float:
    return schatten_norm(a, 1)


def spectral_norm(a) -> float:
    return schatten_norm(a, math.inf)


def fro_norm(a) -> float:
    a = np.asarray(a, dtype=float)
    return math.sqrt(float(np.sum(a * a)))


def batch_singular_values(stack: np.ndarray) -> np.ndarray:
    """Singular values of every matrix in a ``(batch, m, n)`` stack, descending."""
    return np.linalg.svd(np.asarray(stack, dtype=float), compute_uv=False)


def precondition(
    l_eps: SymPsd | None, m, r_eps: SymPsd | None, pq: ExponentPair
) -> np.ndarray:
    """Two-sided preconditioned direction ``L^(-1/2p) M R^(-1/2q)``.

    An infinite exponent makes that side the identity; the corresponding
    preconditioner is then never decomposed and may be ``None``.
    """
    m = np.asarray(m, dtype=float)
    rows, cols = m.shape
    out = m
    if not math.isinf(pq.p):
        if l_eps is None or l_eps.dim != rows:
            raise ShapeError(f"left preconditioner does not match {m.shape}")
        out = _power_from_eig(l_eps.eig, -0.5 / pq.p) @ out
    if not math.isinf(pq.q):
        if r_eps is None or r_eps.dim != cols:
            raise ShapeError(f"right preconditioner does not match {m.shape}")
        out = out @ _power_from_eig(r_eps.eig, -0.5 / pq.q)
    return out
