"""Facet labels, pooled labeled datasets, balancing and stratified folds."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .features import ENGAGEMENT_CODES, FeatureMatrix, get_schema
from .timeline import NO_LABEL


class EngagementState(str, Enum):
    LISTENING = "EL"
    WAITING_FEEDBACK = "EWF"
    THINKING = "ETh"
    CONCENTRATING = "EC"
    LISTENING_PERSON2 = "ELP2"
    RESPONDING = "ER"
    POSITIVE_REACTION = "EPR"
    NEGATIVE_REACTION = "ENR"


assert tuple(s.value for s in EngagementState) == ENGAGEMENT_CODES


class Facet(str, Enum):
    BEHAVIORAL = "behavioral"
    EMOTIONAL = "emotional"
    MENTAL = "mental"


# class order used by every model, matrix and report
CLASS_ORDER = (Facet.BEHAVIORAL, Facet.EMOTIONAL, Facet.MENTAL)
CLASS_NAMES = tuple(f.value for f in CLASS_ORDER)

_FACETS = {
    EngagementState.LISTENING: Facet.MENTAL,
    EngagementState.WAITING_FEEDBACK: Facet.MENTAL,
    EngagementState.THINKING: Facet.MENTAL,
    EngagementState.CONCENTRATING: Facet.MENTAL,
    EngagementState.LISTENING_PERSON2: Facet.MENTAL,
    EngagementState.RESPONDING: Facet.BEHAVIORAL,
    EngagementState.POSITIVE_REACTION: Facet.EMOTIONAL,
    EngagementState.NEGATIVE_REACTION: Facet.EMOTIONAL,
}


def facet_of(state: EngagementState | str) -> Facet:
    return _FACETS[EngagementState(state)]


def facet_index(facet: Facet | str) -> int:
    return CLASS_ORDER.index(Facet(facet))


@dataclass(frozen=True)
class Provenance:
    interaction_id: str
    participant_id: str
    frame_index: int


@dataclass(frozen=True)
class LabeledDataset:
    """Feature rows with facet labels (indices into ``CLASS_ORDER``)."""

    schema_version: str
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    provenance: tuple[Provenance, ...] = field(repr=False, default=())

    def __post_init__(self):
        n = len(self.y)
        if self.X.shape[0] != n or len(self.provenance) != n:
            raise ValueError("X, y and provenance must have the same number of rows")
        if n and len(set(self.provenance)) != n:
            raise ValueError("provenance must be unique per row")

    def __len__(self):
        return len(self.y)

    def class_counts(self) -> dict[Facet, int]:
        counts = np.bincount(self.y, minlength=len(CLASS_ORDER))
        return {facet: int(counts[i]) for i, facet in enumerate(CLASS_ORDER)}

    def subset(self, indices) -> LabeledDataset:
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.schema_version, self.X[idx], self.y[idx], tuple(self.provenance[i] for i in idx)
        )

    @classmethod
    def empty(cls, schema_version: str = "v1") -> LabeledDataset:
        n_features = len(get_schema(schema_version))
        return cls(schema_version, np.zeros((0, n_features), np.uint8), np.zeros(0, np.int64), ())


def attach_labels(features: FeatureMatrix, states: Sequence[str]) -> LabeledDataset:
    if len(states) != features.n_frames:
        raise ValueError(f"{len(states)} state frames for {features.n_frames} feature frames")
    keep = [f for f, s in enumerate(states) if s != NO_LABEL]
    y = np.array([facet_index(facet_of(states[f])) for f in keep], dtype=np.int64)
    prov = tuple(Provenance(features.interaction_id, features.participant_id, f) for f in keep)
    X = features.rows[np.asarray(keep, dtype=np.int64)] if keep else features.rows[:0]
    return LabeledDataset(features.schema_version, X, y, prov)


def pool(datasets: Iterable[LabeledDataset]) -> LabeledDataset:
    datasets = list(datasets)
    if not datasets:
        return LabeledDataset.empty()
    versions = {d.schema_version for d in datasets}
    if len(versions) != 1:
        raise ValueError(f"cannot pool datasets with schema versions {sorted(versions)}")
    return LabeledDataset(
        versions.pop(),
        np.vstack([d.X for d in datasets]),
        np.concatenate([d.y for d in datasets]),
        tuple(p for d in datasets for p in d.provenance),
    )


def balance(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Undersample every facet uniformly to the minority-class size.

    Selected rows keep their original relative order.
    """
    counts = dataset.class_counts()
    missing = [f.value for f, n in counts.items() if n == 0]
    if missing:
        raise ValueError(f"cannot balance: facet(s) absent: {', '.join(missing)}")
    per_class = min(counts.values())
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(len(CLASS_ORDER)):
        members = np.flatnonzero(dataset.y == c)
        chosen.append(rng.choice(members, size=per_class, replace=False))
    return dataset.subset(np.sort(np.concatenate(chosen)))


def stratified_fold_assignment(
    labels, k: int, seed: int, allow_small_classes: bool = False
) -> np.ndarray:
    """Fold index per row; class members are dealt round-robin after shuffling.

    The dealing position carries over from one class to the next so overall
    fold sizes also differ by at most one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(labels) < k:
        raise ValueError(f"cannot split {len(labels)} rows into {k} folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if len(members) < k and not allow_small_classes:
            raise ValueError(f"class {c} has {len(members)} rows, fewer than k={k}")
        members = rng.permutation(members)
        folds[members] = (offset + np.arange(len(members))) % k
        offset = (offset + len(members)) % k
    return folds


def stratified_kfold(
    dataset: LabeledDataset, k: int, seed: int, allow_small_classes: bool = False
) -> list[np.ndarray]:
    """Sorted test-row indices of each of the ``k`` folds."""
    assignment = stratified_fold_assignment(dataset.y, k, seed, allow_small_classes)
    return [np.flatnonzero(assignment == i) for i in range(k)]


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

PROVENANCE_COLUMNS = ("interaction_id", "participant_id", "frame_index")


def write_dataset_csv(dataset: LabeledDataset) -> str:
    schema = get_schema(dataset.schema_version)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["schema_version", dataset.schema_version])
    writer.writerow([*PROVENANCE_COLUMNS, *schema.names, "facet"])
    for p, x, y in zip(dataset.provenance, dataset.X, dataset.y):
        writer.writerow([p.interaction_id, p.participant_id, p.frame_index, *x.tolist(), CLASS_NAMES[y]])
    return buf.getvalue()


def read_dataset_csv(text: str) -> LabeledDataset:
    reader = csv.reader(io.StringIO(text))
    head = next(reader, None)
    if not head or len(head) != 2 or head[0] != "schema_version":
        raise ValueError("dataset CSV must start with a schema_version row")
    schema = get_schema(head[1])
    expected = [*PROVENANCE_COLUMNS, *schema.names, "facet"]
    header = next(reader, None)
    if header != expected:
        raise ValueError("dataset CSV header does not match the schema")
    n_features = len(schema)
    X, y, prov = [], [], []
    for lineno, rec in enumerate(reader, start=3):
        if len(rec) != len(expected):
            raise ValueError(f"dataset CSV line {lineno}: expected {len(expected)} fields, got {len(rec)}")
        try:
            prov.append(Provenance(rec[0], rec[1], int(rec[2])))
            X.append([int(v) for v in rec[3 : 3 + n_features]])
            y.append(facet_index(rec[-1]))
        except ValueError as exc:
            raise ValueError(f"dataset CSV line {lineno}: {exc}") from None
    if not y:
        return LabeledDataset.empty(schema.version)
    return LabeledDataset(
        schema.version, np.array(X, dtype=np.uint8), np.array(y, dtype=np.int64), tuple(prov)
    )


def write_folds_csv(folds: Sequence[np.ndarray]) -> str:
    pairs = sorted((int(row), i) for i, rows in enumerate(folds) for row in rows)
    return "row_id,fold\n" + "".join(f"{row},{fold}\n" for row, fold in pairs)


def read_folds_csv(text: str) -> list[np.ndarray]:
    lines = text.strip().splitlines()
    if not lines or lines[0] != "row_id,fold":
        raise ValueError("fold CSV must start with 'row_id,fold'")
    pairs = [tuple(int(v) for v in line.split(",")) for line in lines[1:]]
    k = max(f for _, f in pairs) + 1
    return [np.array(sorted(r for r, f in pairs if f == i), dtype=np.int64) for i in range(k)]
