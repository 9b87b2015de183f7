"""``volmodel`` command line: ``fit``, ``synth`` and ``report``.

Exit codes: 0 success, 1 input or usage error, 2 no window could be ranked.
Log verbosity comes from ``VOLMODEL_LOG`` (error, warn, info, debug).
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from ._backend import BACKEND
from .empirical import EmptyInputError, SnapshotParseError
from .pipeline import DEFAULT_SEED, RunConfig, run_fit
from .ranking import KINDS, VARIANTS, matrix_from_ranks, read_table
from .synth import SynthSpecError, generate, load_spec, write_run

log = logging.getLogger("volmodel")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY = 0, 1, 2
_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


class MissingArtifactError(FileNotFoundError):
    pass


def setup_logging() -> None:
    level = _LEVELS.get(os.environ.get("VOLMODEL_LOG", "warn").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _print_matrix(title: str, matrix: np.ndarray, out) -> None:
    print(title, file=out)
    print(f"  {'model':<14}" + "".join(f"{'rank ' + str(r + 1):>10}" for r in range(4)), file=out)
    for kind in KINDS:
        row = matrix[int(kind)]
        print(f"  {kind.label:<14}" + "".join(f"{v:>9.2f}%" for v in row), file=out)


def cmd_fit(args, out=None) -> int:
    out = out or sys.stdout
    try:
        config = RunConfig(
            input=args.input,
            out=args.out,
            window_minutes=args.window_minutes,
            bins_per_decade=args.bins_per_decade,
            min_samples=args.min_samples,
            variant=args.variant,
            jobs=args.jobs,
            seed=args.seed,
        )
        summary, _ = run_fit(config)
    except (OSError, SnapshotParseError, EmptyInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    excluded = summary.windows_total - summary.windows_ranked
    print(f"windows: {summary.windows_total} processed, {summary.windows_ranked} ranked, {excluded} excluded", file=out)
    for reason, count in summary.excluded.items():
        if count:
            print(f"  excluded ({reason}): {count}", file=out)
    for variant in config.variants:
        pct = summary.rank1(variant)
        if pct:
            line = ", ".join(f"{k}={v:.2f}%" for k, v in pct.items())
            print(f"rank-1 {variant}: {line}", file=out)
    if summary.windows_ranked == 0:
        print("error: no window could be ranked", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_synth(args, out=None) -> int:
    out = out or sys.stdout
    try:
        spec = load_spec(args.spec)
        if args.seed is not None:
            spec.seed = args.seed
        run = generate(spec)
        csv_path, manifest_path = write_run(run, args.out, seed=spec.seed)
    except (OSError, ValueError, KeyError, SynthSpecError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"wrote {len(run.windows)} windows to {csv_path} and {manifest_path}", file=out)
    return EXIT_OK


def _require(run_dir: str, name: str) -> str:
    path = os.path.join(run_dir, name)
    if not os.path.isfile(path):
        raise MissingArtifactError(f"missing run artifact: {path}")
    return path


def report_text(run_dir: str) -> str:
    """Rank matrices and distance statistics of a completed run."""
    with open(_require(run_dir, "summary.json"), encoding="utf-8") as fh:
        summary = json.load(fh)
    variants = [v for v in summary.get("variants", VARIANTS) if v in VARIANTS]
    buf = io.StringIO()
    print(f"run: {run_dir}", file=buf)
    print(
        f"windows: {summary['windows_total']} total, {summary['windows_ranked']} ranked; "
        f"excluded {json.dumps(summary['excluded'], sort_keys=True)}",
        file=buf,
    )
    for variant in variants:
        _, rank_rows = read_table(_require(run_dir, f"ranks_{variant}.csv"))
        header, dist_rows = read_table(_require(run_dir, f"dist_{variant}.csv"))
        print("", file=buf)
        if rank_rows:
            _print_matrix(f"rank matrix ({variant}), percent of {len(rank_rows)} windows", matrix_from_ranks(rank_rows), buf)
        else:
            print(f"rank matrix ({variant}): no ranked windows", file=buf)
        label = "D" if variant == "standard" else "|D|"
        print(f"distance {label} ({variant})", file=buf)
        print(f"  {'model':<14}{'mean':>14}{'median':>14}{'min':>14}{'max':>14}", file=buf)
        for j, kind in enumerate(KINDS):
            vals = np.array([float(r[1 + j]) for r in dist_rows])
            if variant == "tail":
                vals = np.abs(vals)
            if len(vals) == 0:
                print(f"  {kind.label:<14}{'-':>14}{'-':>14}{'-':>14}{'-':>14}", file=buf)
                continue
            print(
                f"  {kind.label:<14}{np.mean(vals):>14.6g}{np.median(vals):>14.6g}"
                f"{np.min(vals):>14.6g}{np.max(vals):>14.6g}",
                file=buf,
            )
    return buf.getvalue()


def cmd_report(args, out=None) -> int:
    out = out or sys.stdout
    try:
        text = report_text(args.run_dir)
    except (OSError, ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volmodel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit, score and rank the four models per window")
    fit.add_argument("--input", required=True, help="snapshot CSV (.csv or .csv.gz)")
    fit.add_argument("--out", required=True, help="output directory for run artifacts")
    fit.add_argument("--window-minutes", type=int, default=10)
    fit.add_argument("--bins-per-decade", type=int, default=8)
    fit.add_argument("--min-samples", type=int, default=32)
    fit.add_argument("--variant", choices=("standard", "tail", "both"), default="both")
    fit.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    fit.add_argument("--seed", type=int, default=DEFAULT_SEED)
    fit.set_defaults(func=cmd_fit)

    synth = sub.add_parser("synth", help="generate a synthetic snapshot file from a JSON spec")
    synth.add_argument("spec", nargs="?", help="JSON synthesis spec")
    synth.add_argument("--input", dest="spec_flag", help="alternative to the positional spec path")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--seed", type=int, default=None, help="override the seed given in the spec file")
    synth.set_defaults(func=cmd_synth)

    report = sub.add_parser("report", help="print rank matrices and distance statistics of a run")
    report.add_argument("run_dir")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth":
        args.spec = args.spec or args.spec_flag
        if not args.spec:
            parser.error("synth needs a spec file")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
