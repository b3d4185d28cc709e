"""Kernels and their matrix discretizations over empirical measures.

Points are stored as ``(n, d)`` float arrays. A kernel integral operator over
an empirical measure with weights ``w`` acts on a vector ``v`` as
``entries @ (w * v)``; :class:`OperatorMatrix` keeps the weights next to the
entries so that composition and application stay consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist, pdist

KernelFamily = Literal["gaussian", "markov-gaussian", "diffusion", "symmetrized-diffusion"]
FAMILIES = ("gaussian", "markov-gaussian", "diffusion", "symmetrized-diffusion")
SYMMETRIC_FAMILIES = ("gaussian", "symmetrized-diffusion")

# Degrees below this are treated as underflowed.
_TINY = np.finfo(float).tiny * 1e3


class KernelError(ValueError):
    """Invalid kernel input or a numerically degenerate kernel matrix."""


class UnderflowError(KernelError):
    """A kernel row (or degree) underflowed to zero."""


def as_points(x: ArrayLike, d: int | None = None) -> NDArray[np.float64]:
    """Coerce ``x`` into an ``(n, d)`` array of finite coordinates.

    A 1-D input is read as ``n`` points in one dimension unless ``d`` says
    otherwise.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if d is not None and d > 1 and arr.size == d else arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise KernelError(f"points must be a 1-D or 2-D array, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise KernelError(f"dimension mismatch: expected d={d}, got d={arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise KernelError("point coordinates must be finite")
    return arr


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth.

    ``bandwidth`` is the ``delta`` in ``exp(-|x - y|^2 / delta)``; for the
    diffusion families it is the bandwidth of the underlying Gaussian.
    """

    family: KernelFamily = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise KernelError(f"bandwidth must be positive and finite, got {self.bandwidth}")

    @property
    def needs_reference(self) -> bool:
        return self.family != "gaussian"


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Weighted point masses; weights are positive and sum to one."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self):
        pts = as_points(self.points)
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] == 0:
            raise KernelError("empirical measure needs at least one point")
        if w.shape[0] != pts.shape[0]:
            raise KernelError(f"{w.shape[0]} weights for {pts.shape[0]} points")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise KernelError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise KernelError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points: ArrayLike) -> "EmpiricalMeasure":
        pts = as_points(points)
        n = pts.shape[0]
        if n == 0:
            raise KernelError("empirical measure needs at least one point")
        return cls(pts, np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense discretization of a kernel integral operator.

    ``entries[i, j]`` is the kernel value at ``(row_points[i], col_points[j])``
    and ``col_weights`` are the quadrature weights of the input measure.
    """

    entries: NDArray[np.float64]
    row_points: NDArray[np.float64]
    col_points: NDArray[np.float64]
    col_weights: NDArray[np.float64] = field(default=None)

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        rows = as_points(self.row_points)
        cols = as_points(self.col_points)
        if e.shape != (rows.shape[0], cols.shape[0]):
            raise KernelError(f"entries shape {e.shape} does not match {rows.shape[0]} x {cols.shape[0]} points")
        w = self.col_weights
        w = np.full(cols.shape[0], 1.0 / cols.shape[0]) if w is None else np.asarray(w, dtype=float).ravel()
        if w.shape[0] != cols.shape[0]:
            raise KernelError(f"{w.shape[0]} column weights for {cols.shape[0]} columns")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "row_points", rows)
        object.__setattr__(self, "col_points", cols)
        object.__setattr__(self, "col_weights", w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def weighted(self) -> NDArray[np.float64]:
        """The matrix that maps column values to row values, ``entries @ diag(w)``."""
        return self.entries * self.col_weights[None, :]

    def apply(self, v: ArrayLike) -> NDArray[np.float64]:
        """Apply the integral operator to values ``v`` at the column points."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.shape[1]:
            raise KernelError(f"vector of length {v.shape[0]} for operator with {self.shape[1]} columns")
        wv = self.col_weights * v if v.ndim == 1 else self.col_weights[:, None] * v
        return self.entries @ wv


@dataclass(frozen=True, eq=False)
class DegreeData:
    """Right/left degrees of a diffusion kernel and its symmetrizing factor."""

    deg_r: NDArray[np.float64]
    deg_l: NDArray[np.float64]
    symmetrizer: NDArray[np.float64]

    def __post_init__(self):
        for name in ("deg_r", "deg_l", "symmetrizer"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
                raise UnderflowError(f"{name} must be strictly positive and finite")
            object.__setattr__(self, name, arr)


def _same_points(a: NDArray, b: NDArray) -> bool:
    return a.shape == b.shape and np.array_equal(a, b)


def _check_delta(delta: float) -> None:
    if not (np.isfinite(delta) and delta > 0):
        raise KernelError(f"bandwidth must be positive and finite, got {delta}")


def squared_distances(rows: ArrayLike, cols: ArrayLike) -> NDArray[np.float64]:
    rows, cols = as_points(rows), as_points(cols)
    if rows.shape[1] != cols.shape[1]:
        raise KernelError(f"dimension mismatch: {rows.shape[1]} vs {cols.shape[1]}")
    return cdist(rows, cols, "sqeuclidean")


def gaussian_kernel(x: ArrayLike, x2: ArrayLike, delta: float) -> float:
    """``exp(-|x - x2|^2 / delta)`` for two single points."""
    _check_delta(delta)
    a = np.atleast_1d(np.asarray(x, dtype=float))
    b = np.atleast_1d(np.asarray(x2, dtype=float))
    if a.ndim != 1 or b.ndim != 1:
        raise KernelError("gaussian_kernel takes single points; use gaussian_matrix for sets")
    if a.shape != b.shape:
        raise KernelError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise KernelError("point coordinates must be finite")
    return float(np.exp(-np.sum((a - b) ** 2) / delta))


def gaussian_matrix(rows: ArrayLike, cols: ArrayLike, delta: float) -> NDArray[np.float64]:
    """Raw Gaussian kernel values between two point sets."""
    _check_delta(delta)
    return np.exp(-squared_distances(rows, cols) / delta)


def kernel_matrix(
    spec: KernelSpec,
    rows: ArrayLike,
    cols: ArrayLike,
    col_weights: ArrayLike | None = None,
) -> OperatorMatrix:
    """Gaussian kernel matrix ``K[i, j] = k(rows[i], cols[j])``."""
    if spec.family != "gaussian":
        raise KernelError(f"kernel_matrix builds gaussian matrices; got family {spec.family!r}")
    rows, cols = as_points(rows), as_points(cols)
    if rows.shape[0] == 0 or cols.shape[0] == 0:
        raise KernelError("kernel_matrix needs non-empty point lists")
    return OperatorMatrix(gaussian_matrix(rows, cols, spec.bandwidth), rows, cols, col_weights)


def _normalizers(raw: NDArray, weights: NDArray, what: str = "row") -> NDArray:
    sums = raw @ weights
    bad = np.flatnonzero(~(sums > _TINY) | ~np.isfinite(sums))
    if bad.size:
        raise UnderflowError(
            f"weighted kernel {what} sum underflowed to zero at {what} {int(bad[0])} "
            f"({bad.size} {what}s affected); use a larger bandwidth"
        )
    return sums


def markov_normalize(raw: OperatorMatrix, measure: EmpiricalMeasure) -> OperatorMatrix:
    """Divide each row by its weighted sum so the operator preserves constants."""
    if not _same_points(raw.col_points, measure.points):
        raise KernelError("column points of the raw kernel must be the measure's points")
    if np.any(raw.entries < 0):
        raise KernelError("markov_normalize needs a nonnegative kernel")
    sums = _normalizers(raw.entries, measure.weights)
    return OperatorMatrix(raw.entries / sums[:, None], raw.row_points, measure.points, measure.weights)


def markov_gaussian(rows: ArrayLike, measure: EmpiricalMeasure, delta: float) -> OperatorMatrix:
    """Markov-normalized Gaussian kernel from ``rows`` onto ``measure``."""
    rows = as_points(rows, measure.points.shape[1])
    raw = OperatorMatrix(gaussian_matrix(rows, measure.points, delta), rows, measure.points, measure.weights)
    return markov_normalize(raw, measure)


def convolve(k1: OperatorMatrix, k2: OperatorMatrix, measure: EmpiricalMeasure) -> OperatorMatrix:
    """Quadrature of ``(k1 * k2)(x, z) = int k1(x, y) k2(y, z) d measure(y)``.

    The result keeps ``k2``'s column weights, so applying it equals applying
    ``k2`` and then ``k1``.
    """
    if not (_same_points(k1.col_points, measure.points) and _same_points(k2.row_points, measure.points)):
        raise KernelError("convolve: k1 columns, measure points and k2 rows must coincide")
    entries = (k1.entries * measure.weights[None, :]) @ k2.entries
    return OperatorMatrix(entries, k1.row_points, k2.col_points, k2.col_weights)


def diffusion_degrees(
    query: ArrayLike, reference: EmpiricalMeasure, eps: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Right and left degrees at ``query`` points relative to ``reference``.

    ``deg_r(x) = sum_j w_j k(x, r_j)`` and
    ``deg_l(x) = sum_j w_j k(x, r_j) / deg_r(r_j)``.
    """
    query = as_points(query, reference.points.shape[1])
    k_ref = gaussian_matrix(reference.points, reference.points, eps)
    deg_r_ref = _normalizers(k_ref, reference.weights, "reference point")
    k_q = gaussian_matrix(query, reference.points, eps)
    deg_r = _normalizers(k_q, reference.weights, "query point")
    deg_l = _normalizers(k_q, reference.weights / deg_r_ref, "query point")
    return deg_r, deg_l


def diffusion_kernel(
    points: ArrayLike, measure: EmpiricalMeasure, eps: float
) -> tuple[OperatorMatrix, DegreeData]:
    """Diffusion kernel ``k(x, y) / (deg_l(x) deg_r(y))`` on the measure's support."""
    points = as_points(points)
    if not _same_points(points, measure.points):
        raise KernelError("diffusion_kernel: points must be the measure's points")
    k = gaussian_matrix(points, points, eps)
    deg_r = _normalizers(k, measure.weights)
    deg_l = _normalizers(k, measure.weights / deg_r)
    entries = k / deg_l[:, None] / deg_r[None, :]
    deg = DegreeData(deg_r, deg_l, np.sqrt(deg_l / deg_r))
    return OperatorMatrix(entries, points, points, measure.weights), deg


def symmetrize_diffusion(diff: OperatorMatrix, deg: DegreeData) -> OperatorMatrix:
    """Conjugate by the degree ratio: ``s_i * diff_ij / s_j``."""
    s = deg.symmetrizer
    if diff.shape != (s.shape[0], s.shape[0]):
        raise KernelError(f"diffusion matrix of shape {diff.shape} vs {s.shape[0]} degrees")
    entries = s[:, None] * diff.entries / s[None, :]
    return OperatorMatrix(entries, diff.row_points, diff.col_points, diff.col_weights)


def evaluate_kernel(
    spec: KernelSpec,
    rows: ArrayLike,
    cols: ArrayLike,
    reference: EmpiricalMeasure | None = None,
) -> NDArray[np.float64]:
    """Kernel values for any family, at arbitrary (out-of-sample) rows.

    The measure-dependent families (Markov and diffusion) are built relative
    to ``reference``; it defaults to the uniform measure on ``cols``.
    """
    cols = as_points(cols)
    rows = as_points(rows, cols.shape[1])
    if spec.family == "gaussian":
        return gaussian_matrix(rows, cols, spec.bandwidth)
    ref = EmpiricalMeasure.uniform(cols) if reference is None else reference
    eps = spec.bandwidth
    if spec.family == "markov-gaussian":
        k = gaussian_matrix(rows, cols, eps)
        return k / _normalizers(gaussian_matrix(rows, ref.points, eps), ref.weights)[:, None]
    r_deg_r, r_deg_l = diffusion_degrees(rows, ref, eps)
    c_deg_r, c_deg_l = diffusion_degrees(cols, ref, eps)
    k = gaussian_matrix(rows, cols, eps)
    if spec.family == "diffusion":
        return k / r_deg_l[:, None] / c_deg_r[None, :]
    return k / np.sqrt(np.outer(r_deg_r * r_deg_l, c_deg_r * c_deg_l))


def rkhs_inner(
    a_coeffs: ArrayLike,
    a_centers: ArrayLike,
    b_coeffs: ArrayLike,
    b_centers: ArrayLike,
    spec: KernelSpec,
    reference: EmpiricalMeasure | None = None,
) -> float:
    """Inner product of two finite sums of kernel sections.

    ``<sum_n a_n k(., x_n), sum_m b_m k(., y_m)> = a^T K(x, y) b``. Only the
    symmetric positive definite families induce an RKHS. The symmetrized
    diffusion kernel needs its ``reference`` measure.
    """
    if spec.family not in SYMMETRIC_FAMILIES:
        raise KernelError(f"{spec.family!r} is not symmetric; rkhs_inner needs one of {SYMMETRIC_FAMILIES}")
    if spec.family == "symmetrized-diffusion" and reference is None:
        raise KernelError("the symmetrized diffusion kernel needs a reference measure")
    a = np.atleast_1d(np.asarray(a_coeffs, dtype=float))
    b = np.atleast_1d(np.asarray(b_coeffs, dtype=float))
    xa, xb = as_points(a_centers), as_points(b_centers)
    if a.shape[0] != xa.shape[0] or b.shape[0] != xb.shape[0]:
        raise KernelError("one coefficient per center is required")
    return float(a @ evaluate_kernel(spec, xa, xb, reference) @ b)


def median_heuristic(points: ArrayLike, scale: float = 0.05) -> float:
    """``scale`` times the median squared pairwise distance.

    Only a starting point for a bandwidth; nothing here tunes it.
    """
    pts = as_points(points)
    if pts.shape[0] < 2:
        raise KernelError("need at least two points for a median distance")
    d = pdist(pts[:2000])
    return scale * float(np.median(d)) ** 2
