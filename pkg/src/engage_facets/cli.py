"""Command-line front end.

Exit codes: 0 success, 1 usage or validation error, 2 I/O error, 3 numerical
failure during training.  ``ENGAGE_FACETS_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifiers import KINDS, ClassifierSpec
from .corpus import (
    KEYWORDS_FILE,
    CorpusError,
    atomic_write,
    interaction_folders,
    load_interaction,
    load_keywords,
    write_corpus,
)
from .dataset import balance, pool, read_dataset_csv, stratified_kfold, write_dataset_csv, write_folds_csv
from .evaluation import (
    ConfusionMatrix,
    CrossValidationError,
    cross_validate,
    matrix_report,
    render_json_as_text,
    render_report,
)
from .features import KeywordConfig, get_schema
from .pipeline import extract_interaction
from .synthgen import ScenarioConfig, generate_corpus_with_truth
from .timeline import DEFAULT_FRAME_RATE_HZ, TierParseError, TierValidationError, validate_bundle

log = logging.getLogger("engage_facets")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class IOFailure(Exception):
    pass


@dataclass
class RunConfig:
    frame_rate_hz: float | None = None  # None: use the rate recorded with the corpus
    schema_version: str = "v1"
    classifiers: list[str] = field(default_factory=lambda: list(KINDS))
    k: int = 5
    seed: int = 0
    n_interactions: int = 4
    out: str | None = None
    keywords: str | None = None


_CONFIG_KEYS = {
    "frame_rate_hz": float,
    "schema_version": str,
    "classifiers": lambda v: [c.strip() for c in v.split(",") if c.strip()],
    "k": int,
    "seed": int,
    "n_interactions": int,
    "out": str,
    "keywords": str,
}


def read_config_file(path: str) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc.strerror or exc}") from None
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown or malformed setting {line!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value.strip())
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}") from None
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Built-in defaults, then the config file, then command-line flags."""
    config = RunConfig()
    if getattr(args, "config", None):
        config = replace(config, **read_config_file(args.config))
    flags = {
        "frame_rate_hz": getattr(args, "frame_rate", None),
        "k": getattr(args, "k", None),
        "seed": getattr(args, "seed", None),
        "n_interactions": getattr(args, "n", None),
        "out": getattr(args, "out", None),
        "keywords": getattr(args, "keywords", None),
        "classifiers": getattr(args, "classifier", None) or None,
    }
    config = replace(config, **{k: v for k, v in flags.items() if v is not None})
    if config.k < 2:
        raise UsageError("k must be at least 2")
    if config.frame_rate_hz is not None and config.frame_rate_hz <= 0:
        raise UsageError("frame rate must be positive")
    try:
        get_schema(config.schema_version)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return config


def _keywords(path) -> KeywordConfig:
    try:
        return load_keywords(path)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _require_out(config: RunConfig) -> Path:
    if not config.out:
        raise UsageError("--out is required")
    return Path(config.out)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    config = resolve_config(args)
    out = _require_out(config)
    if config.n_interactions < 1:
        raise UsageError("number of interactions must be at least 1")
    keywords = _keywords(config.keywords) if config.keywords else KeywordConfig()
    base = ScenarioConfig(frame_rate_hz=config.frame_rate_hz or DEFAULT_FRAME_RATE_HZ, keywords=keywords)
    interactions = generate_corpus_with_truth(config.n_interactions, base, config.seed)
    try:
        folders = write_corpus(out, interactions, keywords)
    except OSError as exc:
        raise IOFailure(f"cannot write corpus to {out}: {exc.strerror or exc}") from None
    for folder in folders:
        log.info("wrote %s", folder)
    print(f"generated {len(folders)} interactions in {out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    config = resolve_config(args)
    out = _require_out(config)
    corpus = Path(args.corpus)
    schema = get_schema(config.schema_version)
    keywords_path = config.keywords or (corpus / KEYWORDS_FILE if (corpus / KEYWORDS_FILE).exists() else None)
    keywords = _keywords(keywords_path) if keywords_path else KeywordConfig()
    folders = interaction_folders(corpus)
    if not folders:
        raise IOFailure(f"no interactions found under {corpus}")
    rate = config.frame_rate_hz
    written = 0
    for folder in folders:
        tiers_path = folder / "tiers.tsv"
        try:
            bundle = load_interaction(folder, rate)
        except (TierParseError, TierValidationError) as exc:
            raise IOFailure(f"{tiers_path}: {exc}") from None
        missing = [f for f in validate_bundle(bundle) if f.kind == "missing_channel"]
        if missing:
            raise IOFailure(f"{tiers_path}: missing channel {missing[0].tier}")
        for pid, labeled in extract_interaction(bundle, schema, keywords).items():
            target = out / f"{bundle.interaction_id}_{pid}.csv"
            try:
                atomic_write(target, write_dataset_csv(labeled))
            except OSError as exc:
                raise IOFailure(f"cannot write {target}: {exc.strerror or exc}") from None
            written += 1
            log.info("wrote %s (%d labeled frames)", target, len(labeled))
    print(f"extracted {written} feature files to {out}")
    return EXIT_OK


def _load_features(folder: Path):
    if not folder.is_dir():
        raise IOFailure(f"features directory {folder} does not exist")
    paths = sorted(p for p in folder.glob("*.csv") if p.name != "balanced.csv")
    if not paths:
        raise IOFailure(f"no feature CSVs under {folder}")
    datasets = []
    for path in paths:
        try:
            datasets.append(read_dataset_csv(path.read_text(encoding="utf-8")))
        except OSError as exc:
            raise IOFailure(f"cannot read {path}: {exc.strerror or exc}") from None
        except ValueError as exc:
            raise IOFailure(f"{path}: {exc}") from None
    return pool(datasets)


def cmd_evaluate(args) -> int:
    config = resolve_config(args)
    out = _require_out(config)
    try:
        specs = [ClassifierSpec.parse(c) for c in config.classifiers]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dataset = _load_features(Path(args.features))
    try:
        balanced = balance(dataset, config.seed)
        folds = stratified_kfold(balanced, config.k, config.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    log.info("balanced %d -> %d rows", len(dataset), len(balanced))

    reports, status = [], EXIT_OK
    for spec in specs:
        try:
            reports.append(cross_validate(balanced, spec, config.k, config.seed))
        except CrossValidationError as exc:
            log.error("%s failed: %s", spec.kind, exc)
            print(f"error: {spec.kind} failed in {exc}", file=sys.stderr)
            status = EXIT_NUMERIC
            break
    if status != EXIT_OK:
        reports = [replace(r, complete=False) for r in reports]

    try:
        atomic_write(out / "balanced.csv", write_dataset_csv(balanced))
        atomic_write(out / "folds.csv", write_folds_csv(folds))
        rows = [(r.classifier, r.metrics.accuracy_percent()) for r in reports]
        text = render_report(reports, "text", comparison=rows)
        if status != EXIT_OK:
            text = "INCOMPLETE REPORT: a classifier failed to train\n\n" + text
        atomic_write(out / "report.txt", text)
        atomic_write(out / "report.json", render_report(reports, "json", comparison=rows))
    except OSError as exc:
        raise IOFailure(f"cannot write reports to {out}: {exc.strerror or exc}") from None
    sys.stdout.write(text)
    return status


def read_matrix_csv(text: str) -> ConfusionMatrix:
    """3x3 counts, rows = predicted; an optional header row and row labels are skipped."""
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        try:
            values = [int(c) for c in cells]
        except ValueError:
            try:
                values = [int(c) for c in cells[1:]]
            except ValueError:
                if rows:
                    raise UsageError(f"malformed matrix row {line!r}") from None
                continue  # header
            if not cells[1:]:
                raise UsageError(f"malformed matrix row {line!r}")
        rows.append(values)
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise UsageError("confusion matrix must have 3 rows of 3 integers")
    try:
        return ConfusionMatrix(np.array(rows, dtype=np.int64))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_metrics(args) -> int:
    try:
        text = Path(args.matrix).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {args.matrix}: {exc.strerror or exc}") from None
    matrix = read_matrix_csv(text)
    try:
        report = matrix_report(matrix)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(render_report(report, args.format))
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        text = Path(args.report).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {args.report}: {exc.strerror or exc}") from None
    try:
        sys.stdout.write(render_json_as_text(text))
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{args.report}: not a report file ({exc})") from None
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="engage-facets", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, out=True):
        p.add_argument("--config", help="key = value run configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--frame-rate", type=float, dest="frame_rate", help="frames per second")
        if out:
            p.add_argument("--out", help="output directory")

    p = sub.add_parser("generate", help="write a synthetic corpus of tier files")
    common(p)
    p.add_argument("--n", type=int, help="number of interactions (default 4)")
    p.add_argument("--keywords", help="keyword configuration TSV")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", help="tier files -> labeled 39-feature CSVs")
    common(p)
    p.add_argument("corpus", help="corpus directory")
    p.add_argument("--keywords", help="keyword configuration TSV (default: <corpus>/keywords.tsv)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="balance, cross-validate and report")
    common(p)
    p.add_argument("features", help="directory of extracted CSVs")
    p.add_argument("--k", type=int, help="number of folds (default 5)")
    p.add_argument(
        "--classifier", action="append", help=f"one of {', '.join(KINDS)}, optionally kind:param=value,..."
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("metrics", help="class-wise metrics from a 3x3 confusion matrix CSV")
    p.add_argument("matrix", help="CSV, rows = predicted, columns = actual")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="render a JSON report as text")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("ENGAGE_FACETS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IOFailure, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
