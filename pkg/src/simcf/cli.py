"""``simcf`` command line: ingest, split, eval, compare, report.

Exit codes: 0 success, 1 bad input data or arguments, 2 usage error,
3 evaluation finished but some metric cells were undefined.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .evaluation import DEFAULT_RATIOS, ExperimentConfig, sweep_k
from .knn import DEFAULT_K
from .ratings import (
    MOVIELENS_100K_SHAPE,
    RatingParseError,
    RatingValidationError,
    compute_stats,
    dump_ratings,
    load_ratings,
    split_fold,
)
from .reference import calibrate, dump_calibration, reference_report
from .report import FORMATS, METRICS, MetricReport, emit_report, load_report
from .similarity import Measure

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2
EXIT_GAPS = 3

DATA_DIR_ENV = "SIMCF_DATA_DIR"
DEFAULT_DATA_FILE = "u.data"
PUBLISHED = "published"

_EXTENSIONS = {"csv": ".csv", "markdown": ".md", "json": ".json", "radar-data": "_radar.csv"}

log = logging.getLogger("simcf")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _measure_list(text: str) -> tuple[Measure, ...]:
    try:
        return tuple(Measure.parse(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _format_list(text: str) -> tuple[str, ...]:
    fmts = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [f for f in fmts if f not in FORMATS]
    if bad or not fmts:
        raise argparse.ArgumentTypeError(f"unknown format {','.join(bad) or text!r}; choose from {', '.join(FORMATS)}")
    return fmts


def resolve_dataset(path: str | None) -> Path:
    """An explicit file, a directory holding ``u.data``, or the env default."""
    if path is None:
        root = os.environ.get(DATA_DIR_ENV)
        if not root:
            raise CliError(f"no dataset given and {DATA_DIR_ENV} is not set", EXIT_USAGE)
        path = root
    p = Path(path)
    if p.is_dir():
        p = p / DEFAULT_DATA_FILE
    if not p.is_file():
        raise CliError(f"dataset not found: {p}")
    return p


def _load(path: Path):
    try:
        return load_ratings(path)
    except RatingParseError as exc:
        raise CliError(f"{path}: {exc}") from None
    except RatingValidationError as exc:
        raise CliError(f"{path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise CliError(f"{path}: not UTF-8 text ({exc.reason})") from None


def _write(dest: Path | None, data: bytes):
    if dest is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(data)


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


# -- commands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    path = resolve_dataset(args.dataset)
    matrix = _load(path)
    stats = compute_stats(matrix, args.threshold)
    print(f"{matrix.num_users} users, {matrix.num_items} items, {len(matrix)} ratings")
    print(f"rated items: {stats.rated_item_count}")
    print(f"relevant ratings (>= {args.threshold:g}): {stats.relevant_count}")
    print(f"sr: {stats.sr:.6f}")
    return EXIT_OK


def cmd_split(args) -> int:
    path = resolve_dataset(args.dataset)
    matrix = _load(path)
    split = split_fold(matrix, args.ratio, args.fold, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_ratings(split.train, out / "train.data")
    dump_ratings(split.test, out / "test.data")
    manifest = {
        "command": "split",
        "dataset": {"path": str(path.resolve()), "hash": matrix.content_hash()},
        "ratio": args.ratio,
        "fold": args.fold,
        "seed": args.seed,
        "train_ratings": len(split.train),
        "test_ratings": len(split.test),
        "tool_version": __version__,
        "timestamp": _timestamp(),
    }
    _write(out / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    print(f"train: {len(split.train)} ratings, test: {len(split.test)} ratings -> {out}")
    return EXIT_OK


def _computed_gaps(report: MetricReport, recommendation: bool):
    metrics = METRICS if recommendation else ("mae",)
    return [g for g in report.gaps() if g[0] in metrics]


def cmd_eval(args) -> int:
    path = resolve_dataset(args.dataset)
    matrix = _load(path)
    ks = args.k
    if not ks or min(ks) < 1:
        raise CliError(f"--k needs positive integers, got {ks}", EXIT_USAGE)
    try:
        config = ExperimentConfig(
            ratios=args.ratios,
            n_folds=args.folds,
            measures=args.measures,
            k=ks[0],
            relevance_threshold=args.threshold,
            seed=args.seed,
            allow_negative=args.allow_negative,
            full_norms=args.full_norms,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    out = Path(args.out) if args.out else None
    if out is None and (len(ks) > 1 or len(args.format) > 1):
        raise CliError("several k values or formats need --out DIR", EXIT_USAGE)

    recommendation = not args.no_recommend
    reports = sweep_k(matrix, config, ks, jobs=args.jobs, recommendation=recommendation)
    dataset = {
        "path": str(path.resolve()),
        "hash": matrix.content_hash(),
        "shape": list(matrix.shape),
        "ratings": len(matrix),
    }
    manifest = {
        "command": "eval",
        "config": config.to_dict(),
        "ks": list(sorted(set(ks))),
        "recommendation": recommendation,
        "dataset": dataset,
        "tool_version": __version__,
    }
    gaps = 0
    for k, report in reports.items():
        # the timestamp stays in manifest.json only, so reports are byte-reproducible
        report.provenance["manifest"] = manifest
        gaps += len(_computed_gaps(report, recommendation))
        for fmt in args.format:
            dest = None if out is None else out / f"report_k{k}{_EXTENSIONS[fmt]}"
            _write(dest, emit_report(report, fmt))
    if out is not None:
        stamped = {**manifest, "timestamp": _timestamp()}
        _write(out / "manifest.json", (json.dumps(stamped, indent=2, sort_keys=True) + "\n").encode())
        if args.calibrate or (matrix.shape == MOVIELENS_100K_SHAPE and len(matrix) == 100_000):
            cal = calibrate(reports, notes=[f"dataset {dataset['hash']}", f"full_norms={config.full_norms}"])
            _write(out / "calibration.json", dump_calibration(cal))
            _write(out / "calibration.md", cal.to_markdown().encode())
            status = f"k={cal.passing_ks} within band" if cal.passed else "no k within band"
            print(f"calibration: {status}", file=sys.stderr)
    if gaps:
        print(f"warning: {gaps} undefined metric cell(s)", file=sys.stderr)
        return EXIT_GAPS
    return EXIT_OK


def _open_report(source: str) -> MetricReport:
    if source == PUBLISHED:
        return reference_report()
    try:
        return load_report(Path(source).read_bytes())
    except FileNotFoundError:
        raise CliError(f"report not found: {source}") from None
    except (ValueError, KeyError) as exc:
        raise CliError(f"{source}: not a valid report ({exc})") from None


def _dominance(a: tuple, b: tuple) -> str:
    # every radar axis is larger-is-better
    if any(x is None for x in a + b):
        return "undefined"
    if a == b:
        return "tie"
    if all(x >= y for x, y in zip(a, b)):
        return "dominates"
    if all(x <= y for x, y in zip(a, b)):
        return "dominated"
    return "mixed"


def cmd_compare(args) -> int:
    report = _open_report(args.report)
    names = []
    for m in args.measures:
        try:
            name = Measure.parse(m).value
        except ValueError as exc:
            raise CliError(str(exc)) from None
        if name not in report.measures:
            raise CliError(f"measure {name} not in report; available: {', '.join(report.measures)}")
        names.append(name)
    triples = {m: report.radar(m) for m in names}
    lines = ["measure,imae,precision,recall"]
    for m in names:
        lines.append(m + "," + ",".join("" if v is None else f"{v:.4f}" for v in triples[m]))
    lines.append("")
    lines.append("first,second,relation,imae_diff,precision_diff,recall_diff")
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            diffs = ["" if x is None or y is None else f"{x - y:+.6f}" for x, y in zip(triples[a], triples[b])]
            lines.append(f"{a},{b},{_dominance(triples[a], triples[b])}," + ",".join(diffs))
    _write(Path(args.out) if args.out else None, ("\n".join(lines) + "\n").encode())
    return EXIT_OK


def cmd_report(args) -> int:
    report = _open_report(args.report)
    _write(Path(args.out) if args.out else None, emit_report(report, args.format))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simcf", description="Neighbourhood collaborative filtering evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    data_help = f"rating file or directory with {DEFAULT_DATA_FILE} (default: ${DATA_DIR_ENV})"

    s = sub.add_parser("ingest", help="validate a rating file and print its summary")
    s.add_argument("dataset", nargs="?", help=data_help)
    s.add_argument("--threshold", type=float, default=4.0, help="relevance threshold for sr")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("split", help="write one train/test partition")
    s.add_argument("dataset", nargs="?", help=data_help)
    s.add_argument("--ratio", type=float, default=0.1, help="test ratio r")
    s.add_argument("--fold", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("eval", help="run the ratio x fold x measure grid")
    s.add_argument("dataset", nargs="?", help=data_help)
    s.add_argument("--ratios", type=_float_list, default=DEFAULT_RATIOS, help="comma-separated test ratios")
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--measures", type=_measure_list, default=tuple(Measure), help="comma-separated measure ids")
    s.add_argument("--k", type=_int_list, default=(DEFAULT_K,), help="neighbourhood size; a comma list sweeps k")
    s.add_argument("--threshold", type=float, default=4.0, help="relevance threshold")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", type=_format_list, default=("csv",), help=f"comma list of {', '.join(FORMATS)}")
    s.add_argument("--out", help="output directory (stdout when omitted)")
    s.add_argument("--jobs", type=int, default=1, help="concurrent grid cells")
    s.add_argument("--allow-negative", action="store_true", help="keep negatively similar neighbours")
    s.add_argument("--full-norms", action="store_true", help="cosine and TA lengths over full rating vectors")
    s.add_argument("--no-recommend", action="store_true", help="skip precision/recall")
    s.add_argument("--calibrate", action="store_true", help="write the MAE calibration report")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("compare", help="radar triples and dominance for chosen measures")
    s.add_argument("report", help=f"report JSON, or '{PUBLISHED}' for the published tables")
    s.add_argument("measures", nargs="+")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("report", help="re-emit a JSON report in another format")
    s.add_argument("report", help=f"report JSON, or '{PUBLISHED}' for the published tables")
    s.add_argument("--format", choices=FORMATS, default="markdown")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"simcf {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
