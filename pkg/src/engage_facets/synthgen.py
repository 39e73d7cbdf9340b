"""Synthetic two-participant museum-guide interactions.

Each interaction has an informative phase (the robot presents paintings) and
a quiz phase.  Engagement states are drawn per phase and every observable
channel is sampled conditionally on the current state through a cue-coupling
table.  Everything is generated on the frame clock and converted to
millisecond segments with :func:`segments_from_frames`, so discretizing the
output reproduces the ground truth exactly.

Sampling uses integer draws only (probabilities held as parts per million).
"""

from __future__ import annotations

import hashlib
import math
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

from .dataset import EngagementState, facet_of
from .features import KeywordConfig, VFOA_VOCAB
from .timeline import (
    DEFAULT_FRAME_RATE_HZ,
    InteractionBundle,
    SegmentTier,
    frame_count,
    NO_LABEL,
    segments_from_frames,
    span_for_frames,
    tier_key,
)

PPM = 1_000_000
PAINTINGS = (
    ("painting_manray", "manray"),
    ("painting_warhol", "warhol"),
    ("painting_arp", "arp"),
    ("paintings_other", "paintings"),
)
CURRENT_PAINTING = "current_painting"
PARTNER = "partner"
PARTNER_LABEL = {"p1": "PRight", "p2": "PLeft"}
SPEECH_ADDRESSEES = ("Nao", "Group", PARTNER)


@dataclass(frozen=True)
class CueRule:
    """Observable behaviour expected in one engagement state.

    ``speech`` lists addressees the participant talks to, or is ``None`` for
    a silent state.  ``vfoa`` may contain ``"current_painting"``.
    """

    vfoa: tuple[str, ...]
    speech: tuple[str, ...] | None = None
    laughter: bool = False


DEFAULT_COUPLING = {
    "EL": CueRule(("nao", CURRENT_PAINTING)),
    "EWF": CueRule(("nao",)),
    "ETh": CueRule(("unfocused", "table", "windows")),
    "EC": CueRule((CURRENT_PAINTING,)),
    "ELP2": CueRule(("other_participant",)),
    "ER": CueRule(("nao",), speech=("Nao",)),
    "EPR": CueRule(("other_participant", "nao"), laughter=True),
    "ENR": CueRule(("unfocused", "windows"), speech=(PARTNER,)),
}


@dataclass(frozen=True)
class Phase:
    kind: str  # informative | quiz
    duration_ms: int
    state_probs: Mapping[str, float]


DEFAULT_PHASES = (
    Phase(
        "informative",
        360_000,
        {"EL": 0.45, "EC": 0.20, "ELP2": 0.05, "ER": 0.10, "EPR": 0.15, "ENR": 0.05},
    ),
    Phase(
        "quiz",
        300_000,
        {"EL": 0.05, "ETh": 0.20, "EWF": 0.15, "ELP2": 0.10, "ER": 0.25, "EPR": 0.15, "ENR": 0.10},
    ),
)


@dataclass(frozen=True)
class ScenarioConfig:
    phases: tuple[Phase, ...] = DEFAULT_PHASES
    coupling: Mapping[str, CueRule] = field(default_factory=lambda: dict(DEFAULT_COUPLING))
    on_prob: float = 0.9
    off_prob: float = 0.1
    mean_segment_ms: int = 2000
    mean_cue_ms: int = 1000
    mean_utterance_ms: int = 3000
    mean_pause_ms: int = 1500
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ
    keywords: KeywordConfig = field(default_factory=KeywordConfig)
    seed: int = 0
    interaction_id: str = "interaction_01"

    def __post_init__(self):
        if not self.phases:
            raise ValueError("scenario needs at least one phase")
        for phase in self.phases:
            if phase.kind not in ("informative", "quiz"):
                raise ValueError(f"unknown phase kind {phase.kind!r}")
            if phase.duration_ms <= 0:
                raise ValueError("phase durations must be positive")
            for state, p in phase.state_probs.items():
                EngagementState(state)
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"probability of {state} must lie in [0, 1], got {p}")
            if not math.isclose(sum(phase.state_probs.values()), 1.0, abs_tol=1e-9):
                raise ValueError(f"{phase.kind} state probabilities sum to {sum(phase.state_probs.values())}, not 1")
        for name in ("on_prob", "off_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for state in EngagementState:
            if state.value not in self.coupling:
                raise ValueError(f"cue-coupling table has no rule for {state.value}")
        for name in ("mean_segment_ms", "mean_cue_ms", "mean_utterance_ms", "mean_pause_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def span_ms(self) -> int:
        return sum(p.duration_ms for p in self.phases)


@dataclass(frozen=True)
class SyntheticInteraction:
    bundle: InteractionBundle
    truth: Mapping[str, tuple[str, ...]]  # participant id -> per-frame state code
    phase_of_frame: tuple[str, ...] = field(repr=False, default=())


def _ppm(p: float) -> int:
    return round(p * PPM)


class _Sampler:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def bernoulli(self, p_ppm: int) -> bool:
        return self.rng.randrange(PPM) < p_ppm

    def geometric_frames(self, mean_frames: int) -> int:
        """Run length >= 1 with the given mean, one integer trial per frame."""
        stop = PPM // max(mean_frames, 1)
        n = 1
        while self.rng.randrange(PPM) >= stop:
            n += 1
        return n

    def choice(self, options: Sequence):
        return options[self.rng.randrange(len(options))]

    def weighted(self, weights: Sequence[tuple[str, int]]) -> str:
        total = sum(w for _, w in weights)
        r = self.rng.randrange(total)
        for label, w in weights:
            if r < w:
                return label
            r -= w
        raise AssertionError("unreachable")


def _frames(ms: int, rate: float) -> int:
    return max(1, round(ms * rate / 1000))


def _phase_bounds(config: ScenarioConfig) -> list[tuple[Phase, int, int]]:
    bounds, t = [], 0
    for phase in config.phases:
        lo = frame_count(t, config.frame_rate_hz)
        t += phase.duration_ms
        bounds.append((phase, lo, frame_count(t, config.frame_rate_hz)))
    return bounds


INFORMATIVE_LINES = (
    "look at this painting by {topic}",
    "{topic} made this piece in the twenties",
    "{name} do you like {topic}",
    "everyone notice how {topic} plays with light",
    "here {topic} tried something new",
)
QUIZ_LINES = (
    "{p1} what is the name of this artist",
    "{p2} your answer please",
    "everyone get ready for the next question",
    "question for everyone {p1} you start",
    "{p2} then everyone",
    "is it true or false",
    "well done {p1} and {p2}",
    "{p1} then both of you",
)


def _robot_stream(config: ScenarioConfig, sampler: _Sampler, bounds) -> tuple[list[str], list[int]]:
    """Per-frame utterance text and index of the painting being presented."""
    rate = config.frame_rate_hz
    kw = config.keywords
    p1 = kw.person1[0] if kw.person1 else "person"
    p2 = kw.person2[0] if kw.person2 else "person"
    text: list[str] = []
    painting: list[int] = []
    for phase, lo, hi in bounds:
        n = hi - lo
        f = 0
        speaking = True
        while f < n:
            mean = config.mean_utterance_ms if speaking else config.mean_pause_ms
            length = min(sampler.geometric_frames(_frames(mean, rate)), n - f)
            current = min(len(PAINTINGS) - 1, f * len(PAINTINGS) // n)
            if speaking:
                if phase.kind == "informative":
                    line = sampler.choice(INFORMATIVE_LINES).format(
                        topic=PAINTINGS[current][1], name=sampler.choice((p1, p2))
                    )
                else:
                    line = sampler.choice(QUIZ_LINES).format(p1=p1, p2=p2)
                # a frame-level run needs a distinct label from its neighbour
                if text and text[-1] == line:
                    line = line + " again"
            else:
                line = NO_LABEL
            text.extend([line] * length)
            painting.extend([current if phase.kind == "informative" else -1] * length)
            f += length
            speaking = not speaking
    return text, painting


def _state_runs(config: ScenarioConfig, sampler: _Sampler, bounds) -> list[str]:
    rate = config.frame_rate_hz
    states: list[str] = []
    for phase, lo, hi in bounds:
        weights = [(s, _ppm(p)) for s, p in phase.state_probs.items() if _ppm(p) > 0]
        n = hi - lo
        f = 0
        while f < n:
            length = min(sampler.geometric_frames(_frames(config.mean_segment_ms, rate)), n - f)
            states.extend([sampler.weighted(weights)] * length)
            f += length
    return states


def _resolve_vfoa(targets: Sequence[str], painting: int) -> tuple[str, ...]:
    out = []
    for t in targets:
        if t == CURRENT_PAINTING:
            out.append(PAINTINGS[painting][0] if painting >= 0 else "nao")
        else:
            out.append(t)
    return tuple(dict.fromkeys(out))


def _observables(config, sampler, pid: str, states: Sequence[str], painting: Sequence[int]):
    """Per-frame vfoa, addressee, speaking and laughter labels for one participant."""
    rate = config.frame_rate_hz
    on, off = _ppm(config.on_prob), _ppm(config.off_prob)
    partner = PARTNER_LABEL[pid]
    n = len(states)
    vfoa, addressee, speaking, laughter = [], [], [], []
    f = 0
    while f < n:
        # cue runs never cross an engagement-state change
        end = f + 1
        while end < n and states[end] == states[f]:
            end += 1
        length = min(sampler.geometric_frames(_frames(config.mean_cue_ms, rate)), end - f)
        rule = config.coupling[states[f]]

        targets = _resolve_vfoa(rule.vfoa, painting[f])
        if sampler.bernoulli(on):
            gaze = sampler.choice(targets)
        else:
            gaze = sampler.choice([v for v in VFOA_VOCAB.labels if v not in targets])

        if rule.speech is not None:
            talks = sampler.bernoulli(on)
            pool = rule.speech if talks else ()
        else:
            talks = sampler.bernoulli(off)
            pool = SPEECH_ADDRESSEES
        if talks:
            addr = sampler.choice(pool)
            addr = partner if addr == PARTNER else addr
        else:
            addr = "Silence"

        laughs = sampler.bernoulli(on if rule.laughter else off)

        vfoa.extend([gaze] * length)
        addressee.extend([addr] * length)
        speaking.extend(["Speaking" if talks else NO_LABEL] * length)
        laughter.extend(["Laughter" if laughs else NO_LABEL] * length)
        f += length
    return {"vfoa": vfoa, "addressee": addressee, "speaking": speaking, "laughter": laughter}


def generate_interaction_with_truth(config: ScenarioConfig) -> SyntheticInteraction:
    sampler = _Sampler(config.seed)
    bounds = _phase_bounds(config)
    rate = config.frame_rate_hz
    utterances, painting = _robot_stream(config, sampler, bounds)

    tiers = [SegmentTier.named(tier_key("robot", "utterance"), segments_from_frames(utterances, rate))]
    truth = {}
    for pid in ("p1", "p2"):
        states = _state_runs(config, sampler, bounds)
        truth[pid] = tuple(states)
        tiers.append(SegmentTier.named(tier_key(pid, "engagement"), segments_from_frames(states, rate)))
        for channel, column in _observables(config, sampler, pid, states, painting).items():
            tiers.append(SegmentTier.named(tier_key(pid, channel), segments_from_frames(column, rate)))

    phase_of_frame = tuple(phase.kind for phase, lo, hi in bounds for _ in range(hi - lo))
    span = span_for_frames(len(utterances), rate)
    bundle = InteractionBundle.from_tiers(config.interaction_id, tiers, span, rate)
    return SyntheticInteraction(bundle, truth, phase_of_frame)


def generate_interaction(config: ScenarioConfig) -> InteractionBundle:
    return generate_interaction_with_truth(config).bundle


def derive_seed(base_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"engage-facets:{base_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def generate_corpus_with_truth(n_interactions: int, base: ScenarioConfig, seed: int) -> list[SyntheticInteraction]:
    if n_interactions < 1:
        raise ValueError("n_interactions must be at least 1")
    return [
        generate_interaction_with_truth(
            replace(base, seed=derive_seed(seed, i), interaction_id=f"interaction_{i + 1:02d}")
        )
        for i in range(n_interactions)
    ]


def generate_corpus(n_interactions: int, base: ScenarioConfig, seed: int) -> list[InteractionBundle]:
    return [s.bundle for s in generate_corpus_with_truth(n_interactions, base, seed)]


def expected_facet_shares(config: ScenarioConfig) -> dict[str, float]:
    """Facet shares implied by the phase distributions, weighted by phase length."""
    shares = {"behavioral": 0.0, "emotional": 0.0, "mental": 0.0}
    total = config.span_ms
    for phase in config.phases:
        for state, p in phase.state_probs.items():
            shares[facet_of(state).value] += p * phase.duration_ms / total
    return shares
