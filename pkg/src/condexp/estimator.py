"""Fit, evaluate and persist RKHS models of a conditional expectation."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .kernels import KernelError, KernelSpec, as_points
from .operators import Dataset, assemble_problem, section_matrix, select_centers
from .solver import SolverConfig, effective_rank, solve_regularized, svd

MODEL_VERSION = 1

# Default regularization relative to the largest squared singular value of P K.
DEFAULT_RELATIVE_EPSILON = 1e-6


class ModelFormatError(ValueError):
    """A model file that cannot be parsed or validated."""


class UnsupportedVersionError(ModelFormatError):
    pass


@dataclass(frozen=True, eq=False)
class RkhsModel:
    """``x -> sum_m a_m k(x, c_m)`` over centers ``c_m``.

    For the diffusion families the kernel is built relative to the uniform
    measure on the centers, so the model is self-contained.
    """

    centers: NDArray[np.float64]
    coefficients: NDArray[np.float64]
    kspec: KernelSpec
    fit_meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        c = as_points(self.centers)
        a = np.asarray(self.coefficients, dtype=float).ravel()
        if c.shape[0] < 1 or c.shape[0] != a.shape[0]:
            raise KernelError(f"{c.shape[0]} centers for {a.shape[0]} coefficients")
        if not np.all(np.isfinite(a)):
            raise KernelError("model coefficients must be finite")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "coefficients", a)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __call__(self, query: ArrayLike) -> NDArray[np.float64]:
        return evaluate(self, query)


@dataclass(frozen=True)
class FitReport:
    residual_norm: float
    rhs_norm: float
    effective_rank: int
    epsilon: float


def fit(
    data: Dataset,
    m: int,
    kspec: KernelSpec,
    delta: float,
    markov_bw: float | None = None,
    epsilon: float | None = None,
    seed: int | None = None,
    centers: ArrayLike | None = None,
) -> tuple[RkhsModel, FitReport]:
    """Solve the regularized problem ``P K a = P G_delta y``.

    Parameters
    ----------
    data : Dataset
        Samples ``(x_n, y_n)``.
    m : int
        Number of centers, ``1 <= m <= N``. Ignored when ``centers`` is given.
    kspec : KernelSpec
        RKHS kernel whose sections span the model.
    delta : float
        Bandwidth of the Markov-normalized Gaussian smoother ``G_delta``.
    markov_bw : float, optional
        Bandwidth of the Markov kernel ``P``; defaults to ``delta``.
    epsilon : float, optional
        Tikhonov parameter. Defaults to ``1e-6 * s_max^2`` of ``P K``.
    seed : int, optional
        Draw centers at random with this seed instead of striding.
    centers : array_like, optional
        Explicit centers.

    Returns
    -------
    model : RkhsModel
    report : FitReport
    """
    if centers is None:
        if not 1 <= m <= data.n:
            raise KernelError(f"m must be in [1, N={data.n}], got {m}")
        centers = data.xs[select_centers(data.xs, m, seed)]
    centers = as_points(centers, data.dim)
    problem = assemble_problem(data, centers, kspec, delta, markov_bw)
    factors = svd(problem.lhs)
    if epsilon is None:
        epsilon = DEFAULT_RELATIVE_EPSILON * float(factors.singular_values[0]) ** 2
    config = SolverConfig(epsilon=float(epsilon))
    a = solve_regularized(problem.lhs, problem.rhs, config, factors)
    meta = {
        "delta": float(delta),
        "markov_bw": float(problem.markov_bandwidth),
        "epsilon": float(epsilon),
        "N": int(data.n),
        "M": int(centers.shape[0]),
        "seed": seed,
    }
    model = RkhsModel(centers, a, kspec, meta)
    report = FitReport(
        residual_norm=float(np.linalg.norm(problem.lhs.entries @ a - problem.rhs)),
        rhs_norm=float(np.linalg.norm(problem.rhs)),
        effective_rank=effective_rank(factors, config),
        epsilon=float(epsilon),
    )
    return model, report


def evaluate(model: RkhsModel, query: ArrayLike) -> NDArray[np.float64]:
    """``out[i] = sum_m a_m k(query[i], c_m)``."""
    q = as_points(query, model.dim)
    if q.shape[0] == 0:
        return np.zeros(0)
    return section_matrix(model.kspec, q, model.centers) @ model.coefficients


def fit_conditional_variance(
    data: Dataset,
    mean_model: RkhsModel,
    m: int,
    kspec: KernelSpec,
    delta: float,
    markov_bw: float | None = None,
    epsilon: float | None = None,
    seed: int | None = None,
    centers: ArrayLike | None = None,
) -> RkhsModel:
    """Fit the conditional mean of squared residuals against ``mean_model``."""
    resid = (data.ys - evaluate(mean_model, data.xs)) ** 2
    if centers is None:
        centers = mean_model.centers
    model, _ = fit(data.with_values(resid), m, kspec, delta, markov_bw, epsilon, seed, centers)
    return model


def model_to_dict(model: RkhsModel) -> dict[str, Any]:
    return {
        "version": MODEL_VERSION,
        "kernel_family": model.kspec.family,
        "bandwidth": model.kspec.bandwidth,
        "centers": model.centers.tolist(),
        "coefficients": model.coefficients.tolist(),
        "fit_meta": model.fit_meta,
    }


def model_from_dict(doc: Any) -> RkhsModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(f"unsupported model version {version!r}; this library reads version {MODEL_VERSION}")
    missing = [k for k in ("kernel_family", "bandwidth", "centers", "coefficients") if k not in doc]
    if missing:
        raise ModelFormatError(f"model document is missing {', '.join(missing)}")
    try:
        kspec = KernelSpec(doc["kernel_family"], float(doc["bandwidth"]))
        centers = np.array(doc["centers"], dtype=float)
        if centers.ndim != 2:
            raise ModelFormatError("centers must be an array of coordinate arrays")
        return RkhsModel(centers, np.array(doc["coefficients"], dtype=float), kspec, dict(doc.get("fit_meta") or {}))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"invalid model contents: {exc}") from exc


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model: RkhsModel, path: str | os.PathLike) -> None:
    # json writes floats with repr, which round-trips exactly
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path: str | os.PathLike) -> RkhsModel:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: malformed model file at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return model_from_dict(doc)
