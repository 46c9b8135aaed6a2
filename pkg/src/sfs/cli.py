"""Command-line interface: ``sfs generate | run | scale``.

Options can come from a JSON file (``--config``); flags given on the
command line win over file values. Every failure is reported as a single
``error: <kind>: <message>`` line on stderr with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .data import Dataset, RingConfig, generate_rings, load_csv, write_csv
from .eigensolve import SolverOptions
from .evaluate import DEFAULT_ELL_GRID, EvalReport, PipelineConfig, run_pipeline
from .pencil import SPLIT_MODES
from .pipeline import PER_SPLIT, STACKED, SFSConfig, learn_scaling
from .scaling import METHODS

SCHEMA_VERSION = 1

# options that are plumbing rather than part of a run's identity
_NOT_ECHOED = {"command", "config", "out", "emit_plots"}


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(f"usage: {message}")


def _sweep(text: str) -> tuple[float, float, float]:
    try:
        a, b, c = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
    if c <= 0 or b < a or a <= 0:
        raise argparse.ArgumentTypeError("need 0 < start <= stop and step > 0")
    return a, b, c


def _ell_grid(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("ell values must be >= 1")
    return vals


def _add_source(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data source (CSV or synthetic rings)")
    g.add_argument("--csv", help="headered CSV file; omit to use synthetic rings")
    g.add_argument("--label-column", default="label")
    g.add_argument("--samples", type=int, default=200, help="ring samples per class")
    g.add_argument("--classes", type=int, default=3)
    g.add_argument("--features", type=int, default=10)
    g.add_argument("--noise-variance", type=float, default=1.0)
    g.add_argument("--standardize", action="store_true",
                   help="z-score every feature over the whole dataset first (default off)")


def _add_method(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scaling")
    g.add_argument("--split-mode", choices=SPLIT_MODES, default=SPLIT_MODES[0])
    g.add_argument("--integration", choices=METHODS, default="rms")
    g.add_argument("--solve-mode", choices=(PER_SPLIT, STACKED), default=PER_SPLIT)
    g.add_argument("--k-local", type=int, default=7)
    g.add_argument("--sparsify-k", type=int, default=7)
    g.add_argument("--accept-tol", type=float, default=None,
                   help="relative sigma_min acceptance threshold; default accepts "
                        "the nearest singular pencil")
    g.add_argument("--identity-scaling", action="store_true",
                   help="skip scaling (plain spectral embedding)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sfs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.commands = sub.choices

    gen = sub.add_parser("generate", help="write the synthetic ring dataset as CSV")
    gen.add_argument("--out", required=True)
    gen.add_argument("--samples", type=int, default=200)
    gen.add_argument("--classes", type=int, default=3)
    gen.add_argument("--features", type=int, default=10)
    gen.add_argument("--noise-variance", type=float, default=1.0)
    gen.add_argument("--label-column", default="label")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--config")

    run = sub.add_parser("run", help="nested cross-validation of the full pipeline")
    _add_source(run)
    _add_method(run)
    g = run.add_argument_group("evaluation")
    g.add_argument("--classifier", choices=("knn", "logistic"), default="knn")
    g.add_argument("--knn-k", type=int, default=1)
    g.add_argument("--ell", type=int, default=None, help="fixed embedding dimension (default: inner CV)")
    g.add_argument("--ell-grid", type=_ell_grid, default=DEFAULT_ELL_GRID)
    g.add_argument("--outer-folds", type=int, default=5)
    g.add_argument("--inner-folds", type=int, default=4)
    g.add_argument("--no-orientation-search", action="store_true")
    g.add_argument("--variance-sweep", type=_sweep, default=None, metavar="START:STOP:STEP",
                   help="also rerun on rings for each noise variance in the range")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="result JSON path (default: stdout)")
    g.add_argument("--emit-plots", metavar="DIR", help="directory for plot-data CSVs")
    g.add_argument("--config")

    sc = sub.add_parser("scale", help="learn scaling factors on a full dataset")
    _add_source(sc)
    _add_method(sc)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--out", help="result JSON path (default: stdout)")
    sc.add_argument("--config")
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        path = Path(args.config)
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"config {path}: {exc}") from None
        if not isinstance(values, dict):
            raise CLIError(f"config {path}: expected a JSON object")
        known = set(vars(args)) - {"command", "config"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise CLIError(f"config {path}: unknown keys {unknown}")
        # re-parse with file values as defaults so explicit flags still win
        subparser = parser.commands[args.command]
        for key in ("ell_grid", "variance_sweep"):
            if isinstance(values.get(key), list):
                values[key] = tuple(values[key])
        subparser.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _echo(args: argparse.Namespace) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _clean(obj):
    """JSON-safe copy with NaN/inf as null and numpy scalars unwrapped."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(_clean(payload), indent=2, allow_nan=False)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _standardized(ds: Dataset) -> Dataset:
    sd = ds.X.std(axis=0)
    sd[sd == 0] = 1.0
    return Dataset((ds.X - ds.X.mean(axis=0)) / sd, ds.labels, ds.feature_names, ds.raw_labels)


def load_source(args, noise_variance: Optional[float] = None) -> Dataset:
    if args.csv:
        ds = load_csv(args.csv, args.label_column)
    else:
        var = args.noise_variance if noise_variance is None else noise_variance
        ds = generate_rings(RingConfig(args.samples, args.classes, args.features, var, args.seed))
    return _standardized(ds) if args.standardize else ds


def sfs_config(args) -> SFSConfig:
    return SFSConfig(split_mode=args.split_mode, integration=args.integration,
                     k_local=args.k_local, sparsify_k=args.sparsify_k,
                     solve_mode=args.solve_mode, identity_scaling=args.identity_scaling,
                     solver=SolverOptions(accept_tol=args.accept_tol))


def pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(sfs=sfs_config(args), classifier=args.classifier, knn_k=args.knn_k,
                          ell=args.ell, ell_grid=tuple(args.ell_grid),
                          outer_folds=args.outer_folds, inner_folds=args.inner_folds,
                          orientation_search=not args.no_orientation_search,
                          seed=args.seed, threads=args.threads)


def report_payload(report: EvalReport, args) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        **report.summary(),
        "failed": [{"fold": f.fold, "error": f.error} for f in report.failed],
        "folds": [f.to_dict() for f in report.folds],
        "ell_range": list(report.ell_range),
        "config_echo": _echo(args),
        "seed": report.seed,
    }


def _sweep_values(sweep: tuple[float, float, float]) -> list[float]:
    a, b, c = sweep
    count = int(math.floor((b - a) / c + 1e-9)) + 1
    return [a + i * c for i in range(count)]


def write_plot_data(report: EvalReport, ds: Dataset, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    ok = [f for f in report.folds if f.error is None]
    width = max((f.coords.shape[1] for f in ok), default=0)
    with (outdir / "embedding.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "row", *[f"u{j + 1}" for j in range(width)],
                    "true_label", "predicted_label", "set"])
        for f in ok:
            rows = np.concatenate([f.train_idx, f.test_idx])
            for pos, row in enumerate(rows):
                coords = [repr(float(x)) for x in f.coords[pos]]
                coords += [""] * (width - len(coords))
                test = pos >= f.n_train
                pred = int(f.predicted[pos - f.n_train]) if test else ""
                w.writerow([f.fold, int(row) + 1, *coords, int(ds.labels[row]), pred,
                            "test" if test else "train"])
    names = ds.feature_names or tuple(f"f{j + 1}" for j in range(ds.m))
    with (outdir / "scaling_factors.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "feature", "name", "abs_factor"])
        for f in ok:
            for j, val in enumerate(f.scaling):
                w.writerow([f.fold, j + 1, names[j], repr(abs(float(val)))])


def cmd_generate(args) -> int:
    cfg = RingConfig(args.samples, args.classes, args.features, args.noise_variance, args.seed)
    ds = generate_rings(cfg)
    write_csv(ds, args.out, args.label_column)
    print(f"wrote {ds.n} samples x {ds.m} features, {ds.K} classes to {args.out}")
    return 0


def cmd_run(args) -> int:
    if args.variance_sweep and args.csv:
        raise CLIError("--variance-sweep needs the synthetic ring source, not --csv")
    ds = load_source(args)
    cfg = pipeline_config(args)
    report = run_pipeline(ds, cfg)
    payload = report_payload(report, args)

    plots = Path(args.emit_plots) if args.emit_plots else None
    if plots:
        write_plot_data(report, ds, plots)
    if args.variance_sweep:
        rows = []
        for var in _sweep_values(args.variance_sweep):
            rep = run_pipeline(load_source(args, var), cfg)
            rows.append({"variance": var, **rep.summary(), "failed_folds": len(rep.failed)})
        payload["sweep"] = rows
        if plots:
            with (plots / "variance_sweep.csv").open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["variance", "oa_mean", "aa_mean", "nmi_mean"])
                for r in rows:
                    w.writerow([repr(r["variance"]),
                                *("" if math.isnan(r[k]) else repr(r[k])
                                  for k in ("oa_mean", "aa_mean", "nmi_mean"))])
    _write_json(payload, args.out)
    if len(report.failed) == len(report.folds):
        raise CLIError(f"every fold failed; first: {report.folds[0].error}")
    return 0


def cmd_scale(args) -> int:
    ds = load_source(args)
    fit = learn_scaling(ds.X, ds.labels, ds.K, sfs_config(args))
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": fit.result.method,
        "sign_policy": fit.result.sign_policy,
        "splits": [{"positive_classes": sorted(sp.positive_classes), "b": sp.b}
                   for sp in fit.splits],
        # one entry per split, or a single entry for the stacked pencil
        "solutions": [{"mu": s.mu, "residual": s.residual, "sigma_min": s.sigma_min,
                       "status": s.status, "candidate": s.s} for s in fit.solutions],
        "candidates": fit.result.candidates,
        "integrated": fit.s_half,
        "clamped": fit.result.clamped,
        "feature_names": list(ds.feature_names) if ds.feature_names else None,
        "config_echo": _echo(args),
        "seed": args.seed,
    }
    _write_json(payload, args.out)
    return 0


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "scale": cmd_scale}


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        # --help / --version
        return int(exc.code or 0)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
