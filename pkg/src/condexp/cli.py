"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .estimator import ModelFormatError, atomic_write_text, evaluate, fit, load_model, save_model
from .kernels import FAMILIES, KernelError, KernelSpec, UnderflowError, median_heuristic
from .operators import Dataset
from .solver import IllPosedError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> float:
    v = float(text)
    if not (np.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not (np.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _posint(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 10:
        raise argparse.ArgumentTypeError("sizes must be integers >= 10")
    return vals


def read_table(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a headed numeric CSV; errors carry the offending line number."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {p}")
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return [], np.zeros((0, 0))
        header = [h.strip() for h in header]
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{p}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"{p}:{reader.line_num}: non-numeric value in {row!r}") from None
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(arr), axis=1))[0])
        raise DataError(f"{p}: non-finite value in data row {bad + 1}")
    return header, arr


def _csv_text(header: list[str], rows: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


def cmd_fit(args) -> int:
    header, table = read_table(args.input)
    if table.shape[1] < 2:
        raise DataError(f"{args.input}: need columns x1,...,xd,y")
    if table.shape[0] < 2:
        raise DataError(f"{args.input}: need at least two data rows, got {table.shape[0]}")
    data = Dataset(table[:, :-1], table[:, -1])
    m = min(args.m, data.n) if args.m else min(200, data.n)
    # unset bandwidths fall back to the median heuristic; no tuning happens here
    heuristic = median_heuristic(data.xs) if args.delta is None or args.kernel_bw is None else None
    delta = args.delta if args.delta is not None else heuristic
    kernel_bw = args.kernel_bw if args.kernel_bw is not None else heuristic
    t0 = time.perf_counter()
    model, report = fit(
        data,
        m,
        KernelSpec(args.kernel, kernel_bw),
        delta,
        args.markov_bw,
        args.epsilon,
        seed=args.seed if args.random_centers else None,
    )
    elapsed = time.perf_counter() - t0
    model.fit_meta["columns"] = header
    save_model(model, args.model)
    print(f"model: {args.model}")
    print(f"samples: {data.n}  centers: {model.centers.shape[0]}  dim: {data.dim}")
    print(f"epsilon: {report.epsilon!r}")
    print(f"residual_norm: {report.residual_norm!r}  rhs_norm: {report.rhs_norm!r}")
    print(f"effective_rank: {report.effective_rank}")
    print(f"time_s: {elapsed:.3f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model = load_model(args.model)
    except FileNotFoundError:
        raise DataError(f"model file not found: {args.model}") from None
    header, pts = read_table(args.points)
    cols = [f"x{i + 1}" for i in range(model.dim)]
    if pts.size == 0:
        pred = np.zeros(0)
        pts = np.zeros((0, model.dim))
    else:
        if pts.shape[1] != model.dim:
            raise DataError(f"points have {pts.shape[1]} columns; the model expects d={model.dim}")
        pred = evaluate(model, pts)
    text = _csv_text(cols + ["prediction"], np.column_stack([pts, pred]))
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _write_report(report: ex.ExperimentReport, out: str) -> None:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    atomic_write_text(d / f"{report.kind}_report.json", json.dumps(report.to_json_dict(), indent=1) + "\n")
    atomic_write_text(d / f"{report.kind}_points.csv", report.to_csv())


def _curve_overrides(args, cfg_cls) -> dict:
    base = cfg_cls()
    return {
        "n": args.n if args.n is not None else base.n,
        "seed": args.seed,
        "m": args.m if args.m is not None else base.m,
        "kernel": args.kernel or base.kernel,
        "kernel_bw": args.kernel_bw if args.kernel_bw is not None else base.kernel_bw,
        "delta": args.delta if args.delta is not None else base.delta,
        "markov_bw": args.markov_bw,
        "epsilon": args.epsilon,
    }


def cmd_experiment(args) -> int:
    kind = args.kind
    if kind == "convergence":
        return cmd_convergence(args)
    if kind == "image":
        base = ex.ImageConfig()
        cfg = ex.ImageConfig(
            kappa=args.kappa,
            grid=args.grid,
            noise_std=args.noise,
            seed=args.seed,
            m=args.m if args.m is not None else base.m,
            kernel=args.kernel or base.kernel,
            kernel_bw=args.kernel_bw if args.kernel_bw is not None else base.kernel_bw,
            delta=args.delta if args.delta is not None else base.delta,
            markov_bw=args.markov_bw,
            epsilon=args.epsilon,
        )
    elif kind == "curve":
        cfg = ex.CurveConfig(**_curve_overrides(args, ex.CurveConfig))
    else:
        cfg = ex.VarianceConfig(**_curve_overrides(args, ex.VarianceConfig))
    report = ex.run_experiment(kind, cfg)
    _write_report(report, args.out)
    print(f"{kind}: rmse_vs_truth={report.rmse_vs_truth:.6g} rmse_vs_smoothed_truth={report.rmse_vs_smoothed_truth:.6g}")
    print(f"wrote {Path(args.out) / (kind + '_report.json')} and {kind}_points.csv ({report.per_point.shape[0]} rows)")
    return EXIT_OK


def cmd_convergence(args) -> int:
    base = ex.CurveConfig(**_curve_overrides(args, ex.CurveConfig))
    report = ex.run_convergence(sizes=args.sizes, seeds=args.seeds, base=base)
    _write_report(report, args.out)
    print("n,median_rmse_vs_smoothed_truth,median_rmse_vs_truth")
    s = report.summary
    for n, a, b in zip(s["sizes"], s["median_rmse_vs_smoothed_truth"], s["median_rmse_vs_truth"]):
        print(f"{n},{a:.6g},{b:.6g}")
    print(f"strictly_decreasing: {s['strictly_decreasing']}")
    return EXIT_OK


def _add_fit_flags(p, defaults: bool) -> None:
    p.add_argument("--m", type=_posint, default=None, help="number of centers M (default: min(200, N) for fit)")
    p.add_argument("--kernel", choices=FAMILIES, default="diffusion" if defaults else None, help="RKHS kernel family")
    p.add_argument("--kernel-bw", type=_positive, default=None, help="RKHS kernel bandwidth (fit default: 0.05 x median squared distance)")
    p.add_argument("--delta", type=_positive, default=None, help="smoothing bandwidth of G_delta (fit default: as --kernel-bw)")
    p.add_argument("--markov-bw", type=_positive, default=None, help="bandwidth of the Markov kernel P (default: delta)")
    p.add_argument("--epsilon", type=_nonneg, default=None, help="Tikhonov parameter (default: 1e-6 * s_max^2)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="condexp", description="Kernel estimates of conditional expectations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model from a CSV with header x1,...,xd,y")
    p.add_argument("input", help="input CSV")
    p.add_argument("--model", required=True, help="output model JSON")
    _add_fit_flags(p, defaults=True)
    p.add_argument("--random-centers", action="store_true", help="draw centers with --seed instead of striding")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a model at points from a CSV with header x1,...,xd")
    p.add_argument("model", help="model JSON written by fit")
    p.add_argument("points", help="points CSV")
    p.add_argument("--out", default=None, help="predictions CSV (default: standard output)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a built-in experiment and write report JSON + per-point CSV")
    p.add_argument("kind", choices=["image", "curve", "variance", "convergence"])
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--n", type=_posint, default=None, help="sample count (curve, variance)")
    p.add_argument("--kappa", type=_posint, default=2, help="image frequency index")
    p.add_argument("--grid", type=_posint, default=50, help="image side length in pixels")
    p.add_argument("--noise", type=_nonneg, default=0.25, help="image noise standard deviation")
    p.add_argument("--sizes", type=_int_list, default=(250, 1000, 4000), help="convergence sample sizes")
    p.add_argument("--seeds", type=_posint, default=5, help="convergence seeds per size")
    _add_fit_flags(p, defaults=False)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("convergence", help="median curve RMSE over seeds for increasing N")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--n", type=_posint, default=None, help=argparse.SUPPRESS)
    p.add_argument("--sizes", type=_int_list, default=(250, 1000, 4000), help="comma-separated sample sizes")
    p.add_argument("--seeds", type=_posint, default=5, help="seeds per size")
    _add_fit_flags(p, defaults=False)
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ModelFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UnderflowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KernelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IllPosedError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
