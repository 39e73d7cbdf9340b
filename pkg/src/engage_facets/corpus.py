"""On-disk layout of interaction corpora.

::

    <corpus>/keywords.tsv              cue_kind<TAB>token
    <corpus>/<interaction_id>/tiers.tsv
    <corpus>/<interaction_id>/meta.tsv  key<TAB>value (interaction_id, span_ms, frame_rate_hz)
    <corpus>/<interaction_id>/truth.csv frame_index,p1,p2 ground-truth states (synthetic only)
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .features import KeywordConfig, format_keyword_file, parse_keyword_file
from .synthgen import SyntheticInteraction
from .timeline import InteractionBundle, format_tier_file, parse_tier_file

TIERS_FILE = "tiers.tsv"
META_FILE = "meta.tsv"
TRUTH_FILE = "truth.csv"
KEYWORDS_FILE = "keywords.tsv"


class CorpusError(OSError):
    """Corpus files are missing or unreadable."""


def atomic_write(path: Path | str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_interaction(root: Path | str, interaction: SyntheticInteraction) -> Path:
    bundle = interaction.bundle
    folder = Path(root) / bundle.interaction_id
    atomic_write(folder / TIERS_FILE, format_tier_file(bundle.tiers.values()))
    meta = {
        "interaction_id": bundle.interaction_id,
        "span_ms": str(bundle.span_ms),
        "frame_rate_hz": repr(float(bundle.frame_rate_hz)),
    }
    atomic_write(folder / META_FILE, "".join(f"{k}\t{v}\n" for k, v in meta.items()))
    pids = sorted(interaction.truth)
    lines = ["frame_index," + ",".join(pids)]
    for f, states in enumerate(zip(*(interaction.truth[p] for p in pids))):
        lines.append(f"{f}," + ",".join(states))
    atomic_write(folder / TRUTH_FILE, "\n".join(lines) + "\n")
    return folder


def write_corpus(root: Path | str, interactions, keywords: KeywordConfig) -> list[Path]:
    root = Path(root)
    folders = [write_interaction(root, it) for it in interactions]
    atomic_write(root / KEYWORDS_FILE, format_keyword_file(keywords))
    return folders


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc.strerror or exc}") from None


def read_meta(folder: Path) -> dict[str, str]:
    path = folder / META_FILE
    if not path.exists():
        return {}
    meta = {}
    for line in _read(path).splitlines():
        if line.strip():
            key, _, value = line.partition("\t")
            meta[key] = value
    return meta


def load_interaction(folder: Path | str, frame_rate_hz: float | None = None) -> InteractionBundle:
    """Parse one interaction folder.

    ``frame_rate_hz`` overrides the rate recorded in ``meta.tsv``.
    Tier parse errors propagate with the offending line number.
    """
    folder = Path(folder)
    tiers = parse_tier_file(_read(folder / TIERS_FILE))
    meta = read_meta(folder)
    rate = frame_rate_hz or float(meta.get("frame_rate_hz", 25.0))
    span = int(meta["span_ms"]) if "span_ms" in meta else None
    return InteractionBundle.from_tiers(meta.get("interaction_id", folder.name), tiers, span, rate)


def interaction_folders(root: Path | str) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus directory {root} does not exist")
    return sorted(p for p in root.iterdir() if (p / TIERS_FILE).exists())


def load_keywords(path: Path | str) -> KeywordConfig:
    return parse_keyword_file(_read(Path(path)))


def read_truth(folder: Path | str) -> dict[str, tuple[str, ...]]:
    lines = _read(Path(folder) / TRUTH_FILE).splitlines()
    pids = lines[0].split(",")[1:]
    cols: dict[str, list[str]] = {p: [] for p in pids}
    for line in lines[1:]:
        cells = line.split(",")[1:]
        for p, c in zip(pids, cells):
            cols[p].append(c)
    return {p: tuple(v) for p, v in cols.items()}
