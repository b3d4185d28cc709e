"""Discretized operators of the estimation problem.

The left-hand side is the Markov smoother applied to the RKHS kernel
sections, ``P K``; the right-hand side is the Markov smoother applied to the
Gaussian-smoothed samples, ``P G y``. On a cloud with distinct ``x`` values
each fiber carries a single sample, so the conditional expectation over the
empirical measure of pairs is ``y`` itself and needs no explicit averaging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .kernels import (
    EmpiricalMeasure,
    KernelError,
    KernelSpec,
    OperatorMatrix,
    as_points,
    evaluate_kernel,
    markov_gaussian,
)

# Rows per block when streaming N x N Markov matrices (~64 MB per block at N=8000).
_BLOCK_BYTES = 64 * 2**20


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sampled pairs ``(x_n, y_n)``."""

    xs: NDArray[np.float64]
    ys: NDArray[np.float64]

    def __post_init__(self):
        xs = as_points(self.xs)
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.shape[0] != ys.shape[0]:
            raise KernelError(f"{xs.shape[0]} points but {ys.shape[0]} values")
        if xs.shape[0] < 2:
            raise KernelError("a dataset needs at least two samples")
        if not np.all(np.isfinite(ys)):
            raise KernelError("sample values must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def with_values(self, ys: ArrayLike) -> "Dataset":
        return Dataset(self.xs, ys)


@dataclass(frozen=True, eq=False)
class InverseProblem:
    """``lhs @ a = rhs`` with ``lhs = P K`` (N x M) and ``rhs = P G y``."""

    lhs: OperatorMatrix
    rhs: NDArray[np.float64]
    centers: NDArray[np.float64]
    smoother_bandwidth: float
    markov_bandwidth: float

    def __post_init__(self):
        n, m = self.lhs.shape
        if m > n:
            raise KernelError(f"more centers ({m}) than samples ({n})")
        if self.rhs.shape != (n,):
            raise KernelError(f"rhs has shape {self.rhs.shape}, expected ({n},)")


@dataclass(frozen=True, eq=False)
class SmoothedTarget:
    values: NDArray[np.float64]


def build_markov(data_xs: ArrayLike, measure: EmpiricalMeasure, markov_bandwidth: float) -> OperatorMatrix:
    """Markov-normalized Gaussian matrix ``P`` over the samples."""
    return markov_gaussian(data_xs, measure, markov_bandwidth)


def build_smoother(data_xs: ArrayLike, measure: EmpiricalMeasure, delta: float) -> OperatorMatrix:
    """Smoothing matrix ``G_delta``; same construction as ``P``, own bandwidth."""
    return markov_gaussian(data_xs, measure, delta)


def _row_blocks(n_rows: int, n_cols: int):
    step = max(1, _BLOCK_BYTES // (8 * max(n_cols, 1)))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


def apply_markov(
    rows: ArrayLike, measure: EmpiricalMeasure, bandwidth: float, values: ArrayLike
) -> NDArray[np.float64]:
    """Apply a Markov-normalized Gaussian to ``values`` without storing the matrix.

    ``values`` may be a vector or a matrix with one row per measure point.
    """
    rows = as_points(rows, measure.points.shape[1])
    values = np.asarray(values, dtype=float)
    if values.shape[0] != len(measure):
        raise KernelError(f"{values.shape[0]} values for a measure of {len(measure)} points")
    wv = measure.weights * values if values.ndim == 1 else measure.weights[:, None] * values
    out = np.empty((rows.shape[0],) + values.shape[1:])
    for blk in _row_blocks(rows.shape[0], len(measure)):
        out[blk] = build_markov(rows[blk], measure, bandwidth).entries @ wv
    return out


def select_centers(xs: ArrayLike, m: int, seed: int | None = None) -> NDArray[np.intp]:
    """Indices of ``m`` subsampled centers.

    Without a seed the indices are evenly strided, ``floor(k N / m)``, which is
    every ``N/m``-th sample when ``m`` divides ``N``. With a seed they are a
    sorted uniform draw without replacement.
    """
    n = as_points(xs).shape[0]
    if not 1 <= m <= n:
        raise KernelError(f"number of centers must be in [1, {n}], got {m}")
    if seed is None:
        return (np.arange(m) * n) // m
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


def center_measure(centers: ArrayLike) -> EmpiricalMeasure:
    """Uniform sampling measure on the centers; the reference for diffusion kernels."""
    return EmpiricalMeasure.uniform(centers)


def section_matrix(kspec: KernelSpec, points: ArrayLike, centers: ArrayLike) -> NDArray[np.float64]:
    """``K[i, m] = k(points[i], centers[m])``."""
    centers = as_points(centers)
    return evaluate_kernel(kspec, points, centers, center_measure(centers) if kspec.needs_reference else None)


def assemble_problem(
    data: Dataset,
    centers: ArrayLike,
    kspec: KernelSpec,
    delta: float,
    markov_bw: float | None = None,
    measure: EmpiricalMeasure | None = None,
) -> InverseProblem:
    """Build ``P K`` and ``P G_delta y`` over the empirical measure of ``data``.

    ``measure`` defaults to uniform weights on the samples and ``markov_bw``
    to ``delta``.
    """
    markov_bw = delta if markov_bw is None else markov_bw
    for name, bw in (("delta", delta), ("markov_bw", markov_bw)):
        if not (np.isfinite(bw) and bw > 0):
            raise KernelError(f"{name} must be positive, got {bw}")
    centers = as_points(centers, data.dim)
    measure = EmpiricalMeasure.uniform(data.xs) if measure is None else measure
    if not np.array_equal(measure.points, data.xs):
        raise KernelError("the measure must live on the sample points")

    K = section_matrix(kspec, data.xs, centers)
    gy = apply_markov(data.xs, measure, delta, data.ys)
    both = apply_markov(data.xs, measure, markov_bw, np.column_stack([K, gy]))
    lhs = OperatorMatrix(both[:, :-1], data.xs, centers)
    rhs = both[:, -1].copy()
    if not (np.all(np.isfinite(lhs.entries)) and np.all(np.isfinite(rhs))):
        raise KernelError("assembled operators are not finite")
    return InverseProblem(lhs, rhs, centers, float(delta), float(markov_bw))


def smoothed_truth(truth_values: ArrayLike, smoother: OperatorMatrix, measure: EmpiricalMeasure) -> SmoothedTarget:
    """Apply the smoother to the true conditional mean sampled on ``measure``."""
    truth = np.asarray(truth_values, dtype=float).ravel()
    if truth.shape[0] != len(measure):
        raise KernelError(f"{truth.shape[0]} truth values for {len(measure)} sample points")
    if not np.array_equal(smoother.col_points, measure.points):
        raise KernelError("smoother columns must be the measure's points")
    return SmoothedTarget(smoother.entries @ (measure.weights * truth))
