"""Annotation tiers, interaction bundles and the shared frame clock.

Tier files are tab-separated, one segment per line::

    p1.vfoa<TAB>0<TAB>400<TAB>nao
    robot.utterance<TAB>0<TAB>2300<TAB>here is a painting by warhol

Blank lines and lines starting with ``#`` are ignored.  Times are integer
milliseconds and segments are half-open ``[start, end)``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

NO_LABEL = "NoLabel"
DEFAULT_FRAME_RATE_HZ = 25.0


class TierParseError(ValueError):
    """A tier-file line could not be parsed."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class TierValidationError(ValueError):
    """Segments of a tier violate the tier invariants."""

    def __init__(self, tier_name: str, message: str):
        super().__init__(f"tier {tier_name!r}: {message}")
        self.tier_name = tier_name


class Owner(str, Enum):
    PARTICIPANT_1 = "participant_1"
    PARTICIPANT_2 = "participant_2"
    ROBOT = "robot"


class Channel(str, Enum):
    VFOA = "vfoa"
    ADDRESSEE = "addressee"
    SPEAKING = "speaking"
    LAUGHTER = "laughter"
    ENGAGEMENT_STATE = "engagement_state"
    UTTERANCE_TEXT = "utterance_text"


OWNER_TOKENS = {"p1": Owner.PARTICIPANT_1, "p2": Owner.PARTICIPANT_2, "robot": Owner.ROBOT}
CHANNEL_TOKENS = {
    "vfoa": Channel.VFOA,
    "addressee": Channel.ADDRESSEE,
    "speaking": Channel.SPEAKING,
    "laughter": Channel.LAUGHTER,
    "engagement": Channel.ENGAGEMENT_STATE,
    "utterance": Channel.UTTERANCE_TEXT,
}
_OWNER_TO_TOKEN = {v: k for k, v in OWNER_TOKENS.items()}
_CHANNEL_TO_TOKEN = {v: k for k, v in CHANNEL_TOKENS.items()}

PARTICIPANT_IDS = ("p1", "p2")
PARTICIPANT_CHANNELS = (
    Channel.VFOA,
    Channel.ADDRESSEE,
    Channel.SPEAKING,
    Channel.LAUGHTER,
    Channel.ENGAGEMENT_STATE,
)
ROBOT_CHANNELS = (Channel.UTTERANCE_TEXT,)


def tier_key(owner: Owner | str, channel: Channel | str) -> str:
    """Canonical ``<owner>.<channel>`` tier name, e.g. ``p1.vfoa``."""
    if isinstance(owner, str) and owner in OWNER_TOKENS:
        owner_token = owner
    else:
        owner_token = _OWNER_TO_TOKEN[Owner(owner)]
    if isinstance(channel, str) and channel in CHANNEL_TOKENS:
        channel_token = channel
    else:
        channel_token = _CHANNEL_TO_TOKEN[Channel(channel)]
    return f"{owner_token}.{channel_token}"


def required_tier_keys() -> list[str]:
    keys = [tier_key(p, c) for p in PARTICIPANT_IDS for c in PARTICIPANT_CHANNELS]
    keys.extend(tier_key("robot", c) for c in ROBOT_CHANNELS)
    return keys


def split_tier_name(tier_name: str) -> tuple[Owner, Channel]:
    owner_token, sep, channel_token = tier_name.partition(".")
    if not sep or owner_token not in OWNER_TOKENS or channel_token not in CHANNEL_TOKENS:
        raise ValueError(f"tier name {tier_name!r} is not <owner>.<channel>")
    owner = OWNER_TOKENS[owner_token]
    channel = CHANNEL_TOKENS[channel_token]
    if (owner is Owner.ROBOT) != (channel is Channel.UTTERANCE_TEXT):
        raise ValueError(f"tier name {tier_name!r}: channel {channel.value} not valid for {owner.value}")
    return owner, channel


@dataclass(frozen=True, order=True)
class Segment:
    start_ms: int
    end_ms: int
    label: str

    def __post_init__(self):
        if not self.start_ms < self.end_ms:
            raise ValueError(f"segment start {self.start_ms} must precede end {self.end_ms}")
        if not self.label:
            raise ValueError("segment label must be non-empty")


@dataclass(frozen=True)
class SegmentTier:
    """Time-ordered, non-overlapping segments of one annotation channel."""

    tier_name: str
    owner: Owner
    channel: Channel
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        segments = tuple(sorted(self.segments, key=lambda s: (s.start_ms, s.end_ms)))
        for prev, cur in zip(segments, segments[1:]):
            if cur.start_ms < prev.end_ms:
                raise TierValidationError(
                    self.tier_name,
                    f"segments [{prev.start_ms},{prev.end_ms}) and [{cur.start_ms},{cur.end_ms}) overlap",
                )
        object.__setattr__(self, "segments", segments)

    @classmethod
    def named(cls, tier_name: str, segments: Iterable[Segment] = ()) -> SegmentTier:
        owner, channel = split_tier_name(tier_name)
        return cls(tier_name, owner, channel, tuple(segments))


@dataclass(frozen=True)
class InteractionBundle:
    interaction_id: str
    tiers: Mapping[str, SegmentTier]
    span_ms: int
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ

    def __post_init__(self):
        if self.frame_rate_hz <= 0:
            raise ValueError("frame rate must be positive")
        object.__setattr__(self, "tiers", dict(sorted(self.tiers.items())))

    @classmethod
    def from_tiers(
        cls,
        interaction_id: str,
        tiers: Iterable[SegmentTier],
        span_ms: int | None = None,
        frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ,
    ) -> InteractionBundle:
        tiers = list(tiers)
        if span_ms is None:
            span_ms = max((s.end_ms for t in tiers for s in t.segments), default=0)
        return cls(interaction_id, {t.tier_name: t for t in tiers}, span_ms, frame_rate_hz)

    @property
    def n_frames(self) -> int:
        return frame_count(self.span_ms, self.frame_rate_hz)


@dataclass(frozen=True)
class FrameTable:
    """Per-frame labels of every channel of one interaction."""

    interaction_id: str
    n_frames: int
    frame_rate_hz: float
    columns: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for key, col in self.columns.items():
            if len(col) != self.n_frames:
                raise ValueError(f"column {key!r} has {len(col)} frames, expected {self.n_frames}")

    def column(self, key: str) -> tuple[str, ...]:
        try:
            return self.columns[key]
        except KeyError:
            raise KeyError(f"frame table {self.interaction_id!r} has no channel {key!r}") from None


def _rate(frame_rate_hz: float) -> Fraction:
    return Fraction(frame_rate_hz)


def frame_count(span_ms: int, frame_rate_hz: float) -> int:
    return math.ceil(Fraction(span_ms) * _rate(frame_rate_hz) / 1000)


def span_for_frames(n_frames: int, frame_rate_hz: float) -> int:
    """Smallest-error integer span (ms) whose frame count is exactly ``n_frames``."""
    return math.floor(Fraction(n_frames * 1000) / _rate(frame_rate_hz))


def _first_frame_at_or_after(t_ms: int, rate: Fraction) -> int:
    # frame f starts at f * 1000 / rate ms
    return math.ceil(Fraction(t_ms) * rate / 1000)


def discretize_segments(
    segments: Sequence[Segment], n_frames: int, frame_rate_hz: float
) -> tuple[str, ...]:
    """Label each frame with the segment containing its start instant."""
    rate = _rate(frame_rate_hz)
    out = [NO_LABEL] * n_frames
    for seg in segments:
        lo = max(_first_frame_at_or_after(seg.start_ms, rate), 0)
        hi = min(_first_frame_at_or_after(seg.end_ms, rate), n_frames)
        for f in range(lo, hi):
            out[f] = seg.label
    return tuple(out)


def discretize(bundle: InteractionBundle) -> FrameTable:
    if bundle.span_ms <= 0:
        raise ValueError(f"interaction {bundle.interaction_id!r} has zero duration")
    n = bundle.n_frames
    columns = {
        name: discretize_segments(tier.segments, n, bundle.frame_rate_hz)
        for name, tier in bundle.tiers.items()
    }
    return FrameTable(bundle.interaction_id, n, bundle.frame_rate_hz, columns)


def segments_from_frames(column: Sequence[str], frame_rate_hz: float) -> list[Segment]:
    """Collapse maximal runs of equal labels back into millisecond segments.

    Inverse of :func:`discretize_segments` for frame rates up to 1000 Hz, where
    every frame is at least one millisecond long.
    """
    rate = _rate(frame_rate_hz)
    if rate > 1000:
        raise ValueError("frame rates above 1000 Hz cannot be represented in integer ms")

    def start_ms(f: int) -> int:
        return math.floor(Fraction(f * 1000) / rate)

    segments = []
    run_start = 0
    for f in range(1, len(column) + 1):
        if f == len(column) or column[f] != column[run_start]:
            label = column[run_start]
            if label != NO_LABEL:
                segments.append(Segment(start_ms(run_start), start_ms(f), label))
            run_start = f
    return segments


def parse_tier_file(text: str) -> list[SegmentTier]:
    grouped: dict[str, list[Segment]] = defaultdict(list)
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise TierParseError(lineno, f"expected 4 tab-separated fields, got {len(fields)}")
        name, start, end, label = fields
        try:
            split_tier_name(name)
        except ValueError as exc:
            raise TierParseError(lineno, str(exc)) from None
        try:
            start_ms, end_ms = int(start), int(end)
        except ValueError:
            raise TierParseError(lineno, f"non-numeric time in {start!r}, {end!r}") from None
        try:
            grouped[name].append(Segment(start_ms, end_ms, label))
        except ValueError as exc:
            raise TierParseError(lineno, str(exc)) from None
    return [SegmentTier.named(name, segs) for name, segs in sorted(grouped.items())]


def _clean_field(text: str) -> str:
    return " ".join(text.split())


def format_tier_file(tiers: Iterable[SegmentTier]) -> str:
    lines = []
    for tier in sorted(tiers, key=lambda t: t.tier_name):
        for seg in tier.segments:
            lines.append(f"{tier.tier_name}\t{seg.start_ms}\t{seg.end_ms}\t{_clean_field(seg.label)}")
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    kind: str  # missing_channel | out_of_span | unknown_label | bad_tier
    tier: str
    detail: str


def validate_bundle(
    bundle: InteractionBundle, vocabularies: Mapping[Channel, Iterable[str]] | None = None
) -> list[Finding]:
    """Report missing channels, out-of-span segments and unknown labels.

    ``vocabularies`` maps a channel to its allowed labels; channels without an
    entry (robot utterances by default) are not label-checked.
    """
    if vocabularies is None:
        from .features import default_channel_vocabularies

        vocabularies = default_channel_vocabularies()
    allowed = {ch: set(labels) for ch, labels in vocabularies.items()}

    findings = []
    for key in required_tier_keys():
        if key not in bundle.tiers:
            findings.append(Finding("missing_channel", key, "required tier absent"))
    for name, tier in bundle.tiers.items():
        try:
            split_tier_name(name)
        except ValueError as exc:
            findings.append(Finding("bad_tier", name, str(exc)))
            continue
        vocab = allowed.get(tier.channel)
        for seg in tier.segments:
            if seg.start_ms < 0 or seg.end_ms > bundle.span_ms:
                findings.append(
                    Finding("out_of_span", name, f"[{seg.start_ms},{seg.end_ms}) outside [0,{bundle.span_ms}]")
                )
            if vocab is not None and seg.label not in vocab:
                findings.append(Finding("unknown_label", name, f"label {seg.label!r} at {seg.start_ms} ms"))
    return findings
