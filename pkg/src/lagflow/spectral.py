"""Closed-form 2x2 symmetric eigen-algebra and matrix versions of F_tau."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite
from .operators import SpectralOperator


@dataclass(frozen=True)
class SymMatrix2:
    a11: float
    a12: float
    a22: float

    @classmethod
    def from_array(cls, m) -> "SymMatrix2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]), float(m[1, 1]))

    def to_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    @property
    def trace(self) -> float:
        return self.a11 + self.a22


@dataclass(frozen=True)
class EigenPair:
    lambdas: np.ndarray  # ascending
    vectors: np.ndarray  # columns match lambdas


def eigenvalues(a11, a12, a22):
    """Ascending eigenvalues; works elementwise on arrays."""
    m = 0.5 * (a11 + a22)
    d = 0.5 * (a11 - a22)
    r = np.sqrt(d * d + a12 * a12)
    return m - r, m + r


def eigen(A: SymMatrix2) -> EigenPair:
    lo, hi = eigenvalues(A.a11, A.a12, A.a22)
    if A.a12 == 0.0 and A.a11 == A.a22:
        vecs = np.eye(2)
    else:
        phi = 0.5 * math.atan2(A.a12, 0.5 * (A.a11 - A.a22))
        c, s = math.cos(phi), math.sin(phi)
        vecs = np.array([[-s, c], [c, s]])
    # deterministic sign: largest-magnitude entry of each column positive
    for j in range(2):
        k = int(np.argmax(np.abs(vecs[:, j]) + np.array([1e-15, 0.0])))
        if vecs[k, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return EigenPair(np.array([lo, hi], dtype=float), vecs)


def _positive_spectrum(A: SymMatrix2) -> EigenPair:
    pair = eigen(A)
    if not pair.lambdas[0] > 0.0:
        raise NotPositiveDefinite(f"matrix {A!r} has eigenvalues {pair.lambdas!r}")
    return pair


def apply_operator(op: SpectralOperator, A: SymMatrix2) -> float:
    """F[A] = F(lambda(A)) for a positive definite 2x2 matrix."""
    return float(op.eval(_positive_spectrum(A).lambdas))


def operator_derivative(op: SpectralOperator, A: SymMatrix2) -> SymMatrix2:
    """The coefficient matrix ``F^{ij} = dF[A]/da_ij``: ``V diag(F_lambda) V^T``."""
    pair = _positive_spectrum(A)
    d = op.grad(pair.lambdas)
    V = pair.vectors
    return SymMatrix2.from_array((V * d) @ V.T)
