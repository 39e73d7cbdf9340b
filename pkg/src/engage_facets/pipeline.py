"""End-to-end glue: bundles to labeled rows, labeled rows to reports."""

from __future__ import annotations

from collections.abc import Iterable, Sequence

from .classifiers import ClassifierSpec
from .dataset import LabeledDataset, attach_labels, balance, pool
from .evaluation import EvaluationReport, cross_validate
from .features import DEFAULT_SCHEMA, FeatureSchema, KeywordConfig, assemble_features
from .timeline import PARTICIPANT_IDS, Channel, InteractionBundle, discretize, tier_key


def extract_interaction(
    bundle: InteractionBundle,
    schema: FeatureSchema = DEFAULT_SCHEMA,
    keywords: KeywordConfig | None = None,
) -> dict[str, LabeledDataset]:
    """Labeled feature rows per participant of one interaction."""
    table = discretize(bundle)
    out = {}
    for pid in PARTICIPANT_IDS:
        matrix = assemble_features(table, pid, schema, keywords)
        out[pid] = attach_labels(matrix, table.column(tier_key(pid, Channel.ENGAGEMENT_STATE)))
    return out


def extract_corpus(
    bundles: Iterable[InteractionBundle],
    schema: FeatureSchema = DEFAULT_SCHEMA,
    keywords: KeywordConfig | None = None,
) -> LabeledDataset:
    return pool(ds for b in bundles for ds in extract_interaction(b, schema, keywords).values())


def evaluate_suite(
    dataset: LabeledDataset, specs: Sequence[ClassifierSpec], k: int = 5, seed: int = 0
) -> tuple[LabeledDataset, list[EvaluationReport]]:
    """Balance the pooled rows once, then cross-validate every classifier on them."""
    balanced = balance(dataset, seed)
    return balanced, [cross_validate(balanced, spec, k, seed) for spec in specs]
