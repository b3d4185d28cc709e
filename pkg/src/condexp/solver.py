"""Tikhonov-regularized least squares through the SVD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .kernels import OperatorMatrix

# Singular values below this fraction of the largest are exact zeros.
ZERO_SV = 1e-15


class IllPosedError(ArithmeticError):
    """Unregularized solve of a numerically rank-deficient system."""


@dataclass(frozen=True, eq=False)
class SvdFactors:
    singular_values: NDArray[np.float64]
    left_vectors: NDArray[np.float64]
    right_vectors: NDArray[np.float64]

    def reconstruct(self) -> NDArray[np.float64]:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T

    def nonzero(self) -> NDArray[np.bool_]:
        s = self.singular_values
        return s > ZERO_SV * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)


@dataclass(frozen=True)
class SolverConfig:
    """Regularization ``epsilon`` and the relative rank cutoff used when it is 0.

    With ``epsilon == 0`` and ``rank_cutoff=None`` a numerically singular
    system raises :class:`IllPosedError` instead of being truncated.
    """

    epsilon: float = 0.0
    rank_cutoff: float | None = 1e-12

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.rank_cutoff is not None and not self.rank_cutoff > 0:
            raise ValueError(f"rank_cutoff must be positive, got {self.rank_cutoff}")


def _entries(matrix) -> NDArray[np.float64]:
    return matrix.entries if isinstance(matrix, OperatorMatrix) else np.asarray(matrix, dtype=float)


def svd(matrix) -> SvdFactors:
    """Thin SVD, ``matrix = U diag(s) V^T`` with ``s`` nonincreasing."""
    a = _entries(matrix)
    if a.ndim != 2:
        raise ValueError(f"svd needs a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("svd needs finite entries")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"SVD did not converge: {exc}") from exc
    return SvdFactors(s, u, vt.T)


def filter_factors(s: NDArray[np.float64], config: SolverConfig) -> NDArray[np.float64]:
    """Spectral filter ``s / (s^2 + eps)`` applied to the singular values."""
    keep = s > ZERO_SV * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    out = np.zeros_like(s)
    if config.epsilon > 0:
        out[keep] = s[keep] / (s[keep] ** 2 + config.epsilon)
        return out
    if config.rank_cutoff is None:
        if not keep.all():
            raise IllPosedError(
                "epsilon = 0 on a rank-deficient system; set epsilon > 0 or a rank_cutoff"
            )
    else:
        keep &= s >= config.rank_cutoff * s[0]
    out[keep] = 1.0 / s[keep]
    return out


def solve_regularized(lhs, rhs: ArrayLike, config: SolverConfig, factors: SvdFactors | None = None):
    """``a = (M^T M + eps I)^{-1} M^T b`` evaluated through the SVD of ``M``.

    Pass precomputed ``factors`` to reuse one decomposition across solves.
    """
    b = np.asarray(rhs, dtype=float)
    f = svd(lhs) if factors is None else factors
    if b.shape[0] != f.left_vectors.shape[0]:
        raise ValueError(f"rhs of length {b.shape[0]} for a matrix with {f.left_vectors.shape[0]} rows")
    coef = filter_factors(f.singular_values, config) * (f.left_vectors.T @ b)
    return f.right_vectors @ coef


def effective_rank(factors: SvdFactors, config: SolverConfig) -> int:
    return int(np.count_nonzero(filter_factors(factors.singular_values, config)))


def apply_BA(lhs, v: ArrayLike, epsilon: float, factors: SvdFactors | None = None) -> NDArray[np.float64]:
    """Regularized pseudo-inverse after the operator, ``B_eps A v``.

    In the right singular basis this is the diagonal filter
    ``s^2 / (s^2 + eps)``; at ``eps = 0`` it is the projection onto the
    row space.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    v = np.asarray(v, dtype=float)
    f = svd(lhs) if factors is None else factors
    if v.shape[0] != f.right_vectors.shape[0]:
        raise ValueError(f"vector of length {v.shape[0]} for a matrix with {f.right_vectors.shape[0]} columns")
    s = f.singular_values
    gain = np.zeros_like(s)
    keep = f.nonzero()
    gain[keep] = 1.0 if epsilon == 0 else s[keep] ** 2 / (s[keep] ** 2 + epsilon)
    return f.right_vectors @ (gain * (f.right_vectors.T @ v))
