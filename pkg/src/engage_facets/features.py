"""Contextual and relational feature streams and the 39-column feature schema."""

from __future__ import annotations

import csv
import io
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .timeline import NO_LABEL, Channel, FrameTable, tier_key


@dataclass(frozen=True)
class Vocabulary:
    channel: str
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"vocabulary {self.channel!r} has duplicate labels")

    def __len__(self):
        return len(self.labels)


VFOA_VOCAB = Vocabulary(
    "vfoa",
    (
        "nao",
        "other_participant",
        "painting_manray",
        "painting_warhol",
        "painting_arp",
        "paintings_other",
        "windows",
        "table",
        "unfocused",
    ),
)
ADDRESSEE_VOCAB = Vocabulary("addressee", (NO_LABEL, "Nao", "Group", "PRight", "PLeft", "Silence"))
ROBOT_ACTIVITY_VOCAB = Vocabulary("robot_activity", ("Speech", "Silence"))
ROBOT_ADDRESSEE_VOCAB = Vocabulary(
    "robot_addressee",
    (
        "Person1",
        "Person2",
        "GroupExplicit",
        "GroupPerson1",
        "GroupPerson2",
        "Person1Group",
        "Person2Group",
        "Group",
        "Silence",
    ),
)
TOPIC_VOCAB = Vocabulary("robot_topic", ("manray", "warhol", "arp", "paintings"))
NO_TOPIC = "none"

SPEAKING_LABEL = "Speaking"
LAUGHTER_LABEL = "Laughter"
OTHER_PARTICIPANT = "other_participant"
PARTNER_ADDRESSEES = frozenset({"PRight", "PLeft"})

DEFAULT_VFOA_TOPICS = {
    "painting_manray": "manray",
    "painting_warhol": "warhol",
    "painting_arp": "arp",
    "paintings_other": "paintings",
}

ENGAGEMENT_CODES = ("EL", "EWF", "ETh", "EC", "ELP2", "ER", "EPR", "ENR")


def default_channel_vocabularies() -> dict[Channel, tuple[str, ...]]:
    return {
        Channel.VFOA: VFOA_VOCAB.labels,
        Channel.ADDRESSEE: ADDRESSEE_VOCAB.labels,
        Channel.SPEAKING: (SPEAKING_LABEL,),
        Channel.LAUGHTER: (LAUGHTER_LABEL,),
        Channel.ENGAGEMENT_STATE: ENGAGEMENT_CODES,
    }


# ---------------------------------------------------------------------------
# keyword configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KeywordConfig:
    """Cue words spotted in the robot's speech.

    Topic keywords are kept in file order; that order breaks ties when an
    utterance mentions several topics.
    """

    person1: tuple[str, ...] = ("anna",)
    person2: tuple[str, ...] = ("ben",)
    group: tuple[str, ...] = ("everyone", "both", "all", "guys")
    topic: tuple[str, ...] = TOPIC_VOCAB.labels

    def __post_init__(self):
        for name in ("person1", "person2", "group", "topic"):
            object.__setattr__(self, name, tuple(t.lower() for t in getattr(self, name)))
        if not self.topic:
            raise ValueError("topic keyword set must be non-empty")


CUE_KINDS = ("person1", "person2", "group", "topic")


def parse_keyword_file(text: str) -> KeywordConfig:
    cues: dict[str, list[str]] = {k: [] for k in CUE_KINDS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        fields = raw.split("\t")
        if len(fields) != 2 or fields[0] not in cues or not fields[1].strip():
            raise ValueError(f"keyword file line {lineno}: expected 'cue_kind<TAB>token'")
        cues[fields[0]].append(fields[1].strip())
    return KeywordConfig(**{k: tuple(v) for k, v in cues.items()})


def format_keyword_file(config: KeywordConfig) -> str:
    return "".join(f"{kind}\t{tok}\n" for kind in CUE_KINDS for tok in getattr(config, kind))


_WORD = re.compile(r"[a-z0-9]+")


def _words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


# ---------------------------------------------------------------------------
# stream operators
# ---------------------------------------------------------------------------


def _binary(stream) -> np.ndarray:
    arr = np.asarray(stream, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("streams must be one-dimensional")
    return arr


def _same_length(*streams: Sequence) -> None:
    lengths = {len(s) for s in streams}
    if len(lengths) > 1:
        raise ValueError(f"stream length mismatch: {sorted(lengths)}")


def one_hot(column: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    index = {label: j for j, label in enumerate(vocab.labels)}
    out = np.zeros((len(column), len(vocab)), dtype=np.uint8)
    for f, label in enumerate(column):
        j = index.get(label)
        if j is not None:
            out[f, j] = 1
    return out


def indicator(column: Sequence[str], labels: Iterable[str]) -> np.ndarray:
    """1 where the frame label is one of ``labels``."""
    wanted = set(labels)
    return np.fromiter((label in wanted for label in column), dtype=np.uint8, count=len(column))


def presence(column: Sequence[str]) -> np.ndarray:
    """1 where any segment covers the frame."""
    return np.fromiter((label != NO_LABEL for label in column), dtype=np.uint8, count=len(column))


def vfoa_shift(vfoa: Sequence[str]) -> np.ndarray:
    if len(vfoa) == 0:
        raise ValueError("vfoa stream is empty")
    out = np.zeros(len(vfoa), dtype=np.uint8)
    for f in range(1, len(vfoa)):
        if vfoa[f] != vfoa[f - 1]:
            out[f] = 1
    return out


def robot_utterance_activity(utterances: Sequence[str]) -> list[str]:
    return ["Speech" if text != NO_LABEL else "Silence" for text in utterances]


def classify_robot_addressee(text: str, keywords: KeywordConfig) -> str:
    """Addressee label of a single utterance from its cue words."""
    first: dict[str, int] = {}
    for pos, word in enumerate(_words(text)):
        for kind in ("person1", "person2", "group"):
            if word in getattr(keywords, kind) and kind not in first:
                first[kind] = pos
    persons = [k for k in ("person1", "person2") if k in first]
    if len(persons) == 2:
        # both participants named explicitly
        return "GroupExplicit"
    if not persons:
        return "GroupExplicit" if "group" in first else "Group"
    person = persons[0]
    x = person[-1]
    if "group" not in first:
        return f"Person{x}"
    if first["group"] < first[person]:
        return f"GroupPerson{x}"
    return f"Person{x}Group"


def robot_addressee(utterances: Sequence[str], keywords: KeywordConfig | None = None) -> list[str]:
    keywords = keywords or KeywordConfig()
    cache: dict[str, str] = {}
    out = []
    for text in utterances:
        if text == NO_LABEL:
            out.append("Silence")
            continue
        if text not in cache:
            cache[text] = classify_robot_addressee(text, keywords)
        out.append(cache[text])
    return out


def classify_topic(text: str, topics: Sequence[str]) -> str:
    words = set(_words(text))
    for keyword in topics:
        if keyword.lower() in words:
            return keyword
    return NO_TOPIC


def robot_topic(utterances: Sequence[str], topics: Sequence[str] = TOPIC_VOCAB.labels) -> list[str]:
    if not topics:
        raise ValueError("topic keyword set must be non-empty")
    cache: dict[str, str] = {}
    out = []
    for text in utterances:
        if text == NO_LABEL:
            out.append(NO_TOPIC)
            continue
        if text not in cache:
            cache[text] = classify_topic(text, topics)
        out.append(cache[text])
    return out


def mutual_and(a, b) -> np.ndarray:
    _same_length(a, b)
    return _binary(a) & _binary(b)


def gaze_speech_alignment(
    vfoa: Sequence[str], topic: Sequence[str], mapping: Mapping[str, str] = DEFAULT_VFOA_TOPICS
) -> np.ndarray:
    _same_length(vfoa, topic)
    return np.fromiter(
        (t != NO_TOPIC and mapping.get(v) == t for v, t in zip(vfoa, topic)),
        dtype=np.uint8,
        count=len(vfoa),
    )


def participant_talks_during_robot_speech(speaking, addressee: Sequence[str], robot_activity: Sequence[str]) -> np.ndarray:
    _same_length(speaking, addressee, robot_activity)
    to_partner = indicator(addressee, PARTNER_ADDRESSEES)
    robot_speaks = indicator(robot_activity, ("Speech",))
    return _binary(speaking) & to_partner & robot_speaks


def mutual_looks(p1_vfoa: Sequence[str], p2_vfoa: Sequence[str]) -> np.ndarray:
    _same_length(p1_vfoa, p2_vfoa)
    return mutual_and(indicator(p1_vfoa, (OTHER_PARTICIPANT,)), indicator(p2_vfoa, (OTHER_PARTICIPANT,)))


def mutual_laughter(p1_laughter, p2_laughter) -> np.ndarray:
    return mutual_and(p1_laughter, p2_laughter)


def passive_looks_at_active_speaker(passive_vfoa: Sequence[str], active_speaking, active_addressee: Sequence[str]) -> np.ndarray:
    _same_length(passive_vfoa, active_speaking, active_addressee)
    looks = indicator(passive_vfoa, (OTHER_PARTICIPANT,))
    to_robot = indicator(active_addressee, ("Nao",))
    return looks & _binary(active_speaking) & to_robot


# ---------------------------------------------------------------------------
# schema and assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    source: str  # contextual | relational
    producer: str


@dataclass(frozen=True)
class FeatureSchema:
    version: str
    columns: tuple[FeatureColumn, ...]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __len__(self):
        return len(self.columns)

    def count(self, source: str) -> int:
        return sum(c.source == source for c in self.columns)


def _onehot_columns(prefix: str, vocab: Vocabulary, producer: str) -> list[FeatureColumn]:
    return [FeatureColumn(f"{prefix}={label}", "contextual", producer) for label in vocab.labels]


def _schema_v1() -> FeatureSchema:
    cols = []
    cols += _onehot_columns("vfoa", VFOA_VOCAB, "one_hot")
    cols.append(FeatureColumn("vfoa_shift", "contextual", "vfoa_shift"))
    cols += _onehot_columns("addressee", ADDRESSEE_VOCAB, "one_hot")
    cols.append(FeatureColumn("speaking", "contextual", "presence"))
    cols.append(FeatureColumn("laughing", "contextual", "presence"))
    cols += _onehot_columns("robot_activity", ROBOT_ACTIVITY_VOCAB, "robot_utterance_activity")
    cols += _onehot_columns("robot_addressee", ROBOT_ADDRESSEE_VOCAB, "robot_addressee")
    cols += _onehot_columns("robot_topic", TOPIC_VOCAB, "robot_topic")
    cols.append(FeatureColumn("other_speaking", "contextual", "presence"))
    cols += [
        FeatureColumn("gaze_speech_alignment", "relational", "gaze_speech_alignment"),
        FeatureColumn("talks_during_robot_speech", "relational", "participant_talks_during_robot_speech"),
        FeatureColumn("mutual_looks", "relational", "mutual_looks"),
        FeatureColumn("mutual_laughter", "relational", "mutual_laughter"),
        FeatureColumn("passive_looks_at_active_speaker", "relational", "passive_looks_at_active_speaker"),
    ]
    return FeatureSchema("v1", tuple(cols))


SCHEMAS = {"v1": _schema_v1()}
DEFAULT_SCHEMA = SCHEMAS["v1"]

# one-hot groups of the v1 schema as (first column, width)
ONE_HOT_GROUPS_V1 = {
    "vfoa": (0, 9),
    "addressee": (10, 6),
    "robot_activity": (18, 2),
    "robot_addressee": (20, 9),
    "robot_topic": (29, 4),
}


def get_schema(version: str) -> FeatureSchema:
    try:
        return SCHEMAS[version]
    except KeyError:
        raise ValueError(f"unknown feature schema version {version!r}") from None


@dataclass(frozen=True)
class FeatureMatrix:
    interaction_id: str
    participant_id: str
    schema_version: str
    rows: np.ndarray = field(repr=False)

    @property
    def n_frames(self) -> int:
        return self.rows.shape[0]


def _other(participant_id: str) -> str:
    if participant_id == "p1":
        return "p2"
    if participant_id == "p2":
        return "p1"
    raise ValueError(f"unknown participant {participant_id!r}")


def assemble_features(
    table: FrameTable,
    target: str,
    schema: FeatureSchema = DEFAULT_SCHEMA,
    keywords: KeywordConfig | None = None,
    vfoa_topics: Mapping[str, str] = DEFAULT_VFOA_TOPICS,
) -> FeatureMatrix:
    """Feature rows for ``target`` with the co-participant as the partner."""
    if schema.version not in SCHEMAS:
        raise ValueError(f"unknown feature schema version {schema.version!r}")
    keywords = keywords or KeywordConfig()
    other = _other(target)

    def col(owner: str, channel: Channel) -> tuple[str, ...]:
        key = tier_key(owner, channel)
        if key not in table.columns:
            raise KeyError(f"missing channel {key!r} in interaction {table.interaction_id!r}")
        return table.columns[key]

    vfoa = col(target, Channel.VFOA)
    addressee = col(target, Channel.ADDRESSEE)
    speaking = presence(col(target, Channel.SPEAKING))
    laughing = presence(col(target, Channel.LAUGHTER))
    other_vfoa = col(other, Channel.VFOA)
    other_addressee = col(other, Channel.ADDRESSEE)
    other_speaking = presence(col(other, Channel.SPEAKING))
    other_laughing = presence(col(other, Channel.LAUGHTER))
    utterances = col("robot", Channel.UTTERANCE_TEXT)

    activity = robot_utterance_activity(utterances)
    topic = robot_topic(utterances, keywords.topic)

    blocks = [
        one_hot(vfoa, VFOA_VOCAB),
        vfoa_shift(vfoa)[:, None],
        one_hot(addressee, ADDRESSEE_VOCAB),
        speaking[:, None],
        laughing[:, None],
        one_hot(activity, ROBOT_ACTIVITY_VOCAB),
        one_hot(robot_addressee(utterances, keywords), ROBOT_ADDRESSEE_VOCAB),
        one_hot(topic, TOPIC_VOCAB),
        other_speaking[:, None],
        gaze_speech_alignment(vfoa, topic, vfoa_topics)[:, None],
        participant_talks_during_robot_speech(speaking, addressee, activity)[:, None],
        mutual_looks(vfoa, other_vfoa)[:, None],
        mutual_laughter(laughing, other_laughing)[:, None],
        passive_looks_at_active_speaker(vfoa, other_speaking, other_addressee)[:, None],
    ]
    rows = np.hstack(blocks).astype(np.uint8)
    if rows.shape[1] != len(schema):
        raise AssertionError(f"assembled {rows.shape[1]} columns for a {len(schema)}-column schema")
    return FeatureMatrix(table.interaction_id, target, schema.version, rows)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def write_feature_csv(matrix: FeatureMatrix) -> str:
    schema = get_schema(matrix.schema_version)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["schema_version", matrix.schema_version])
    writer.writerow(["interaction_id", "participant_id", "frame_index", *schema.names])
    for f, row in enumerate(matrix.rows):
        writer.writerow([matrix.interaction_id, matrix.participant_id, f, *row.tolist()])
    return buf.getvalue()


def read_feature_csv(text: str) -> FeatureMatrix:
    reader = csv.reader(io.StringIO(text))
    head = next(reader, None)
    if not head or head[0] != "schema_version" or len(head) != 2:
        raise ValueError("feature CSV must start with a schema_version row")
    schema = get_schema(head[1])
    header = next(reader, None)
    if header != ["interaction_id", "participant_id", "frame_index", *schema.names]:
        raise ValueError("feature CSV header does not match the schema")
    records = list(reader)
    if not records:
        raise ValueError("feature CSV has no rows")
    rows = np.array([[int(v) for v in r[3:]] for r in records], dtype=np.uint8)
    return FeatureMatrix(records[0][0], records[0][1], schema.version, rows)
