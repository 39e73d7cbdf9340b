"""Confusion matrices, class-wise metrics, cross-validation and reports.

Confusion matrices are oriented rows = predicted class, columns = actual
class.  Rates are computed exactly from integer counts and rounded half-up
for display: metrics to 3 decimals, accuracy to 2 decimals in percent.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

import numpy as np

from .classifiers import ClassifierSpec, predict, train
from .dataset import CLASS_NAMES, LabeledDataset, facet_index, stratified_kfold

N = len(CLASS_NAMES)
METRIC_NAMES = ("tpr", "fpr", "precision", "recall", "f")
METRIC_LABELS = {"tpr": "TPR", "fpr": "FPR", "precision": "Precision", "recall": "Recall", "f": "F-score"}


class CrossValidationError(RuntimeError):
    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold


def round_half_up(value: Fraction | float, places: int) -> Decimal:
    """Round half away from zero at ``places`` decimals, exactly for fractions."""
    x = Fraction(value)
    scaled = abs(x) * 10**places
    q = math.floor(scaled + Fraction(1, 2))
    return Decimal(-q if x < 0 else q).scaleb(-places)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (N, N):
            raise ValueError(f"confusion matrix must be {N}x{N}")
        if np.any(counts < 0):
            raise ValueError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> list[int]:
        return [int(v) for v in self.counts.sum(axis=1)]

    def col_sums(self) -> list[int]:
        return [int(v) for v in self.counts.sum(axis=0)]

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def __hash__(self) -> int:
        return hash(self.counts.tobytes())

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.counts + other.counts)

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()


def _index(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    return facet_index(label)


def confusion(pairs: Iterable[tuple]) -> ConfusionMatrix:
    """Accumulate ``(predicted, actual)`` pairs of facets or class indices."""
    counts = np.zeros((N, N), dtype=np.int64)
    seen = False
    for predicted, actual in pairs:
        counts[_index(predicted), _index(actual)] += 1
        seen = True
    if not seen:
        raise ValueError("confusion matrix needs at least one prediction")
    return ConfusionMatrix(counts)


def confusion_from_arrays(predicted, actual) -> ConfusionMatrix:
    predicted, actual = np.asarray(predicted), np.asarray(actual)
    counts = np.zeros((N, N), dtype=np.int64)
    np.add.at(counts, (predicted, actual), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetric:
    tpr: float
    fpr: float
    precision: float
    recall: float
    f: float
    precision_undefined: bool = False
    exact: dict = field(default_factory=dict, repr=False, compare=False)

    def display(self) -> dict[str, str]:
        return {name: str(round_half_up(self.exact[name], 3)) for name in METRIC_NAMES}


@dataclass(frozen=True)
class ClassMetrics:
    per_class: dict[str, ClassMetric]
    accuracy: float
    accuracy_exact: Fraction = field(repr=False, compare=False, default=Fraction(0))

    def accuracy_percent(self) -> str:
        return str(round_half_up(self.accuracy_exact * 100, 2))


def class_metrics(matrix: ConfusionMatrix) -> ClassMetrics:
    c = matrix.counts
    total = matrix.total
    rows, cols = matrix.row_sums(), matrix.col_sums()
    if any(v == 0 for v in cols):
        raise ValueError("every actual class needs at least one instance (zero column)")
    per_class = {}
    for i, name in enumerate(CLASS_NAMES):
        tp = int(c[i, i])
        recall = Fraction(tp, cols[i])
        undefined = rows[i] == 0
        precision = Fraction(0) if undefined else Fraction(tp, rows[i])
        negatives = total - cols[i]
        fpr = Fraction(rows[i] - tp, negatives) if negatives else Fraction(0)
        f = Fraction(0) if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        exact = {"tpr": recall, "fpr": fpr, "precision": precision, "recall": recall, "f": f}
        per_class[name] = ClassMetric(
            float(recall), float(fpr), float(precision), float(recall), float(f), undefined, exact
        )
    accuracy = Fraction(int(np.trace(c)), total)
    return ClassMetrics(per_class, float(accuracy), accuracy)


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldResult:
    index: int
    n_train: int
    n_test: int
    confusion: ConfusionMatrix
    metrics: ClassMetrics | None


@dataclass(frozen=True)
class EvaluationReport:
    classifier: str | None
    seed: int | None
    k: int | None
    confusion: ConfusionMatrix
    metrics: ClassMetrics
    folds: tuple[FoldResult, ...] = ()
    complete: bool = True


def _metrics_or_none(matrix: ConfusionMatrix) -> ClassMetrics | None:
    try:
        return class_metrics(matrix)
    except ValueError:
        return None


def cross_validate(dataset: LabeledDataset, spec: ClassifierSpec, k: int = 5, seed: int = 0) -> EvaluationReport:
    folds = stratified_kfold(dataset, k, seed)
    X = dataset.X.astype(np.float64)
    y = dataset.y
    pooled = ConfusionMatrix(np.zeros((N, N), dtype=np.int64))
    results = []
    for i, test_idx in enumerate(folds):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        try:
            model = train(spec, X[train_mask], y[train_mask], dataset.schema_version)
        except Exception as exc:  # noqa: BLE001 - re-raised with fold context
            raise CrossValidationError(i, exc) from exc
        predicted = predict(model, X[test_idx])
        fold_matrix = confusion_from_arrays(predicted, y[test_idx])
        pooled = pooled + fold_matrix
        results.append(
            FoldResult(i, int(train_mask.sum()), len(test_idx), fold_matrix, _metrics_or_none(fold_matrix))
        )
    return EvaluationReport(spec.kind, seed, k, pooled, class_metrics(pooled), tuple(results))


def matrix_report(matrix: ConfusionMatrix) -> EvaluationReport:
    """Report for a bare confusion matrix (no training run)."""
    return EvaluationReport(None, None, None, matrix, class_metrics(matrix))


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _metrics_doc(metrics: ClassMetrics) -> dict:
    return {
        name: {m: getattr(cm, m) for m in METRIC_NAMES} | {"precision_undefined": cm.precision_undefined}
        for name, cm in metrics.per_class.items()
    }


def _display_doc(metrics: ClassMetrics) -> dict:
    return {
        "metrics": {name: cm.display() for name, cm in metrics.per_class.items()},
        "accuracy_percent": metrics.accuracy_percent(),
    }


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "classifier": report.classifier,
        "seed": report.seed,
        "k": report.k,
        "complete": report.complete,
        "folds": [
            {
                "index": f.index,
                "n_train": f.n_train,
                "n_test": f.n_test,
                "confusion": f.confusion.tolist(),
                "accuracy": None if f.metrics is None else f.metrics.accuracy,
            }
            for f in report.folds
        ],
        "confusion": report.confusion.tolist(),
        "metrics": _metrics_doc(report.metrics),
        "accuracy": report.metrics.accuracy,
        "display": _display_doc(report.metrics),
    }


def report_from_dict(doc: dict) -> EvaluationReport:
    """Rebuild a report; metrics are recomputed from the stored counts."""
    matrix = ConfusionMatrix(doc["confusion"])
    folds = tuple(
        FoldResult(
            f["index"], f["n_train"], f["n_test"], ConfusionMatrix(f["confusion"]),
            _metrics_or_none(ConfusionMatrix(f["confusion"])),
        )
        for f in doc.get("folds", [])
    )
    return EvaluationReport(
        doc.get("classifier"), doc.get("seed"), doc.get("k"), matrix, class_metrics(matrix), folds,
        doc.get("complete", True),
    )


def _pad(cells: Sequence[str], widths: Sequence[int]) -> str:
    return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()


def render_comparison_text(rows: Sequence[tuple[str, str]]) -> list[str]:
    if not rows:
        return []
    width = max(len("Classifier"), *(len(name) for name, _ in rows))
    lines = ["Classifier comparison", _pad(["Classifier", "Accuracy (%)"], [width, 12])]
    lines += [_pad([name, acc], [width, 12]) for name, acc in rows]
    return lines + [""]


def _render_single_text(report: EvaluationReport) -> list[str]:
    lines = []
    title = report.classifier or "confusion matrix"
    lines.append(f"== {title} ==")
    if report.k is not None:
        lines.append(f"{report.k}-fold cross-validation, seed {report.seed}, {report.confusion.total} instances")
        if not report.complete:
            lines.append("INCOMPLETE: training failed")
    widths = [10] + [max(10, len(n)) for n in CLASS_NAMES]
    lines.append("Confusion matrix (rows = predicted, columns = actual)")
    lines.append(_pad(["", *CLASS_NAMES], widths))
    for name, row in zip(CLASS_NAMES, report.confusion.tolist()):
        lines.append(_pad([name, *(str(v) for v in row)], widths))
    lines.append("")
    lines.append("Class-wise metrics")
    lines.append(_pad(["Metrics", *CLASS_NAMES], widths))
    shown = {name: cm.display() for name, cm in report.metrics.per_class.items()}
    for m in METRIC_NAMES:
        lines.append(_pad([METRIC_LABELS[m], *(shown[name][m] for name in CLASS_NAMES)], widths))
    flagged = [n for n, cm in report.metrics.per_class.items() if cm.precision_undefined]
    if flagged:
        lines.append(f"precision undefined (never predicted): {', '.join(flagged)}")
    lines.append(f"Accuracy (%)  {report.metrics.accuracy_percent()}")
    if report.folds:
        lines.append("Per-fold accuracy (%)")
        for f in report.folds:
            acc = "n/a" if f.metrics is None else f.metrics.accuracy_percent()
            lines.append(f"  fold {f.index}: {acc} ({f.n_test} test / {f.n_train} train)")
    return lines


def render_report(
    report: EvaluationReport | Sequence[EvaluationReport],
    fmt: str = "text",
    comparison: Sequence[tuple[str, str]] | None = None,
) -> str:
    """Render one report or a classifier suite as ``text`` or ``json``.

    For a suite the accuracy comparison table is built from the reports;
    a single report shows it only when ``comparison`` rows are passed.
    """
    reports = [report] if isinstance(report, EvaluationReport) else list(report)
    if comparison is None:
        comparison = (
            [(r.classifier or "?", r.metrics.accuracy_percent()) for r in reports]
            if not isinstance(report, EvaluationReport)
            else []
        )
    if fmt == "json":
        if isinstance(report, EvaluationReport) and not comparison:
            doc = report_to_dict(report)
        else:
            doc = {
                "comparison": [{"classifier": n, "accuracy_percent": a} for n, a in comparison],
                "complete": all(r.complete for r in reports),
                "reports": [report_to_dict(r) for r in reports],
            }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = render_comparison_text(list(comparison))
    for i, r in enumerate(reports):
        if i:
            lines.append("")
        lines += _render_single_text(r)
    return "\n".join(lines) + "\n"


def render_json_as_text(text: str) -> str:
    doc = json.loads(text)
    if "reports" in doc:
        reports = [report_from_dict(d) for d in doc["reports"]]
        rows = [(c["classifier"], c["accuracy_percent"]) for c in doc["comparison"]]
        return render_report(reports, "text", comparison=rows)
    return render_report(report_from_dict(doc), "text")
