"""Synthetic benchmarks: image denoising, principal curve, variance, convergence.

Truths are analytic; errors are measured on interior points only (a 5%
margin is dropped on every side) because Markov normalization is biased at
the boundary of the sampling domain.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .estimator import evaluate, fit, fit_conditional_variance
from .kernels import EmpiricalMeasure, KernelSpec, as_points, markov_gaussian
from .operators import Dataset, smoothed_truth

MARGIN = 0.05

ExperimentKind = Literal["image", "curve", "variance", "convergence"]


# ---------------------------------------------------------------------------
# analytic truths


def image_truth(x1: ArrayLike, x2: ArrayLike, kappa: int) -> NDArray[np.float64] | float:
    """``cos(2 pi kappa x1) + exp(sin(2 pi kappa x2))``."""
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    out = np.cos(2 * np.pi * kappa * np.asarray(x1, dtype=float)) + np.exp(
        np.sin(2 * np.pi * kappa * np.asarray(x2, dtype=float))
    )
    return float(out) if out.ndim == 0 else out


def lambda_curve(x: ArrayLike):
    """Principal curve ``exp(sin(2 pi x)^2)``."""
    out = np.exp(np.sin(2 * np.pi * np.asarray(x, dtype=float)) ** 2)
    return float(out) if out.ndim == 0 else out


def lambda_dd(x: ArrayLike):
    """Second derivative of :func:`lambda_curve`."""
    x = np.asarray(x, dtype=float)
    out = 4 * np.pi**2 * lambda_curve(x) * (2 - (np.cos(4 * np.pi * x) - 1) ** 2)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def curvature_constant(grid_points: int = 100_001) -> float:
    """``4 / max |lambda''|`` over a uniform grid on [0, 1]."""
    x = np.linspace(0.0, 1.0, grid_points)
    return 4.0 / float(np.max(np.abs(lambda_dd(x))))


def rho_spread(x: ArrayLike, c_const: float | None = None):
    """Conditional standard deviation ``3 / (2 + C |lambda''(x)|)``, in [0.5, 1.5]."""
    c = curvature_constant() if c_const is None else c_const
    out = 3.0 / (2.0 + c * np.abs(lambda_dd(x)))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class ImageSpec:
    kappa: int = 2
    grid: int = 50
    noise_std: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.kappa < 1 or self.grid < 2 or self.noise_std < 0:
            raise ValueError(f"invalid image spec {self}")


@dataclass(frozen=True)
class CurveSpec:
    n: int = 4000
    seed: int = 0
    c_const: float = field(default_factory=curvature_constant)

    def __post_init__(self):
        if self.n < 10:
            raise ValueError(f"curve datasets need n >= 10, got {self.n}")


def image_lattice(grid: int) -> NDArray[np.float64]:
    """Pixel centers of a ``grid x grid`` image on [0, 1]^2, row-major."""
    t = (np.arange(grid) + 0.5) / grid
    g1, g2 = np.meshgrid(t, t, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def generate_image_dataset(spec: ImageSpec) -> Dataset:
    xs = image_lattice(spec.grid)
    truth = image_truth(xs[:, 0], xs[:, 1], spec.kappa)
    rng = np.random.default_rng(spec.seed)
    return Dataset(xs, truth + spec.noise_std * rng.standard_normal(truth.shape[0]))


def generate_curve_dataset(spec: CurveSpec, zero_noise: bool = False) -> Dataset:
    """``x ~ U[0, 1]``, ``y = lambda(x) + rho(x) z`` with ``z ~ N(0, 1)``.

    ``zero_noise`` forces ``z = 0`` while drawing the same ``x``.
    """
    rng = np.random.default_rng(spec.seed)
    x = rng.uniform(0.0, 1.0, spec.n)
    z = rng.standard_normal(spec.n)
    if zero_noise:
        z = np.zeros_like(z)
    return Dataset(x[:, None], lambda_curve(x) + rho_spread(x, spec.c_const) * z)


def binned_conditional_mean(data: Dataset, bins: int) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.intp]]:
    """Per-bin averages of ``y`` over equal-width bins of a 1-D ``x``.

    Returns bin centers, bin means and counts.
    """
    if data.dim != 1:
        raise ValueError("binned_conditional_mean needs one-dimensional x")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    x = data.xs[:, 0]
    edges = np.linspace(x.min(), x.max(), bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    if np.any(counts == 0):
        raise ValueError(f"bin {int(np.flatnonzero(counts == 0)[0])} is empty; use fewer bins")
    means = np.bincount(idx, weights=data.ys, minlength=bins) / counts
    return 0.5 * (edges[:-1] + edges[1:]), means, counts


def interior_mask(points: ArrayLike, lo: float = 0.0, hi: float = 1.0, margin: float = MARGIN) -> NDArray[np.bool_]:
    pts = as_points(points)
    pad = margin * (hi - lo)
    return np.all((pts >= lo + pad) & (pts <= hi - pad), axis=1)


def rmse(a: ArrayLike, b: ArrayLike) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(d**2)))


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class CurveConfig:
    """Fit parameters for the principal-curve family of experiments."""

    n: int = 4000
    seed: int = 7
    m: int = 200
    kernel: str = "diffusion"
    kernel_bw: float = 2e-3
    delta: float = 1e-3
    markov_bw: float | None = None
    epsilon: float | None = None
    grid: int = 201


@dataclass(frozen=True)
class VarianceConfig(CurveConfig):
    """Curve parameters for the squared-residual fit: more samples, less smoothing."""

    n: int = 8000
    kernel_bw: float = 1e-3
    delta: float = 3e-4


@dataclass(frozen=True)
class ImageConfig:
    kappa: int = 2
    grid: int = 50
    noise_std: float = 0.25
    seed: int = 1
    m: int = 625
    kernel: str = "diffusion"
    kernel_bw: float = 2e-3
    delta: float = 6e-4
    markov_bw: float | None = None
    epsilon: float | None = None


@dataclass
class ExperimentReport:
    """Configuration echo, error metrics and the per-point table."""

    kind: str
    params: dict[str, Any]
    rmse_vs_truth: float
    rmse_vs_smoothed_truth: float
    columns: list[str]
    per_point: NDArray[np.float64]
    runtime_ms: int = 0
    summary: dict[str, Any] = field(default_factory=dict)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "params": self.params,
            "rmse_vs_truth": self.rmse_vs_truth,
            "rmse_vs_smoothed_truth": self.rmse_vs_smoothed_truth,
            "runtime_ms": self.runtime_ms,
            "summary": self.summary,
            "n_points": int(self.per_point.shape[0]),
            "columns": self.columns,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.per_point:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _fit_kwargs(cfg) -> dict[str, Any]:
    return dict(
        m=cfg.m,
        kspec=KernelSpec(cfg.kernel, cfg.kernel_bw),
        delta=cfg.delta,
        markov_bw=cfg.markov_bw,
        epsilon=cfg.epsilon,
    )


def _smoothed_at(points: NDArray, data: Dataset, truth_at_samples: NDArray, delta: float) -> NDArray:
    measure = EmpiricalMeasure.uniform(data.xs)
    return smoothed_truth(truth_at_samples, markov_gaussian(points, measure, delta), measure).values


def run_curve(cfg: CurveConfig) -> ExperimentReport:
    t0 = time.perf_counter()
    data = generate_curve_dataset(CurveSpec(n=cfg.n, seed=cfg.seed))
    model, fit_report = fit(data, **_fit_kwargs(cfg))
    grid = np.linspace(0.0, 1.0, cfg.grid)[:, None]
    pred = evaluate(model, grid)
    truth = lambda_curve(grid[:, 0])
    smooth = _smoothed_at(grid, data, lambda_curve(data.xs[:, 0]), cfg.delta)
    inner = interior_mask(grid)
    return ExperimentReport(
        kind="curve",
        params={**asdict(cfg), "epsilon_used": fit_report.epsilon},
        rmse_vs_truth=rmse(pred[inner], truth[inner]),
        rmse_vs_smoothed_truth=rmse(pred[inner], smooth[inner]),
        columns=["x1", "truth", "smoothed_truth", "prediction"],
        per_point=np.column_stack([grid[:, 0], truth, smooth, pred]),
        runtime_ms=int(1000 * (time.perf_counter() - t0)),
        summary={"residual_norm": fit_report.residual_norm, "effective_rank": fit_report.effective_rank},
    )


def run_variance(cfg: VarianceConfig) -> ExperimentReport:
    """Fit the mean, then the conditional mean of squared residuals.

    The truth is ``rho(x)^2``; ``rmse_vs_truth`` is reported relative to the
    RMS of the truth on the interior grid.
    """
    t0 = time.perf_counter()
    data = generate_curve_dataset(CurveSpec(n=cfg.n, seed=cfg.seed))
    kw = _fit_kwargs(cfg)
    mean_model, _ = fit(data, **kw)
    var_model = fit_conditional_variance(data, mean_model, **kw)
    grid = np.linspace(0.0, 1.0, cfg.grid)[:, None]
    pred = evaluate(var_model, grid)
    truth = rho_spread(grid[:, 0]) ** 2
    smooth = _smoothed_at(grid, data, rho_spread(data.xs[:, 0]) ** 2, cfg.delta)
    inner = interior_mask(grid)
    scale = float(np.sqrt(np.mean(truth[inner] ** 2)))
    return ExperimentReport(
        kind="variance",
        params=asdict(cfg),
        rmse_vs_truth=rmse(pred[inner], truth[inner]) / scale,
        rmse_vs_smoothed_truth=rmse(pred[inner], smooth[inner]) / scale,
        columns=["x1", "truth", "smoothed_truth", "prediction"],
        per_point=np.column_stack([grid[:, 0], truth, smooth, pred]),
        runtime_ms=int(1000 * (time.perf_counter() - t0)),
        summary={"relative": True, "truth_rms": scale},
    )


def run_image(cfg: ImageConfig) -> ExperimentReport:
    t0 = time.perf_counter()
    data = generate_image_dataset(ImageSpec(cfg.kappa, cfg.grid, cfg.noise_std, cfg.seed))
    model, fit_report = fit(data, **_fit_kwargs(cfg))
    pts = data.xs
    pred = evaluate(model, pts)
    truth = image_truth(pts[:, 0], pts[:, 1], cfg.kappa)
    smooth = _smoothed_at(pts, data, truth, cfg.delta)
    inner = interior_mask(pts)
    return ExperimentReport(
        kind="image",
        params={**asdict(cfg), "epsilon_used": fit_report.epsilon},
        rmse_vs_truth=rmse(pred[inner], truth[inner]),
        rmse_vs_smoothed_truth=rmse(pred[inner], smooth[inner]),
        columns=["x1", "x2", "truth", "smoothed_truth", "prediction"],
        per_point=np.column_stack([pts, truth, smooth, pred]),
        runtime_ms=int(1000 * (time.perf_counter() - t0)),
        summary={"noisy_rmse": rmse(data.ys[inner], truth[inner])},
    )


def run_convergence(
    sizes: tuple[int, ...] = (250, 1000, 4000), seeds: int | tuple[int, ...] = 5, base: CurveConfig | None = None
) -> ExperimentReport:
    """Median interior RMSE of the curve fit across seeds, per sample size.

    ``per_point`` rows are ``(N, seed, rmse_vs_smoothed_truth, rmse_vs_truth)``.
    """
    t0 = time.perf_counter()
    base = CurveConfig() if base is None else base
    seed_list = tuple(range(seeds)) if isinstance(seeds, int) else tuple(seeds)
    rows = []
    for n in sizes:
        for s in seed_list:
            cfg = CurveConfig(**{**asdict(base), "n": n, "seed": s, "m": min(base.m, n)})
            rep = run_curve(cfg)
            rows.append((n, s, rep.rmse_vs_smoothed_truth, rep.rmse_vs_truth))
    table = np.array(rows, dtype=float)
    med_s = [float(np.median(table[table[:, 0] == n, 2])) for n in sizes]
    med_t = [float(np.median(table[table[:, 0] == n, 3])) for n in sizes]
    return ExperimentReport(
        kind="convergence",
        params={**asdict(base), "sizes": list(sizes), "seeds": list(seed_list)},
        rmse_vs_truth=med_t[-1],
        rmse_vs_smoothed_truth=med_s[-1],
        columns=["n", "seed", "rmse_vs_smoothed_truth", "rmse_vs_truth"],
        per_point=table,
        runtime_ms=int(1000 * (time.perf_counter() - t0)),
        summary={
            "sizes": list(sizes),
            "median_rmse_vs_smoothed_truth": med_s,
            "median_rmse_vs_truth": med_t,
            "strictly_decreasing": bool(all(a > b for a, b in zip(med_s, med_s[1:]))),
        },
    )


def run_experiment(kind: ExperimentKind, config=None, **overrides) -> ExperimentReport:
    """Dispatch one experiment by name."""
    if kind == "convergence":
        return run_convergence(**overrides) if config is None else run_convergence(base=config, **overrides)
    runners = {"image": (run_image, ImageConfig), "curve": (run_curve, CurveConfig), "variance": (run_variance, VarianceConfig)}
    if kind not in runners:
        raise ValueError(f"unknown experiment kind {kind!r}")
    runner, cfg_cls = runners[kind]
    if config is None:
        config = cfg_cls(**overrides)
    elif overrides:
        config = cfg_cls(**{**asdict(config), **overrides})
    return runner(config)
