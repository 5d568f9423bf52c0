"""CTC training targets: the dialect tag repeated once per estimated word."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .corpus import Utterance
from .errors import NoSpeechDetected, UnknownDialect
from .vad import EnergyVad, VadConfig

BLANK = "<blank>"
SPACE = "<space>"


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if not tokens or tokens[0] != BLANK:
            raise ValueError("tokens[0] must be the blank symbol")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be distinct")
        if SPACE in tokens[2:]:
            raise ValueError("space token, when present, must sit at index 1")
        if not self.dialects:
            raise ValueError("vocabulary needs at least one dialect")

    @classmethod
    def build(cls, dialects, with_space=False):
        dialects = list(dialects)
        if any(d in (BLANK, SPACE) or not d for d in dialects):
            raise ValueError("dialect tags may not be empty or reserved symbols")
        head = [BLANK, SPACE] if with_space else [BLANK]
        return cls(tuple(head + dialects))

    @property
    def blank_index(self) -> int:
        return 0

    @property
    def space_index(self) -> int | None:
        return 1 if len(self.tokens) > 1 and self.tokens[1] == SPACE else None

    @property
    def dialects(self) -> list:
        return [t for t in self.tokens if t not in (BLANK, SPACE)]

    @property
    def dialect_indices(self) -> dict:
        return {t: i for i, t in enumerate(self.tokens) if t not in (BLANK, SPACE)}

    def index(self, dialect) -> int:
        try:
            return self.dialect_indices[dialect]
        except KeyError:
            raise UnknownDialect(f"dialect {dialect!r} not in vocabulary") from None

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class LAH:
    """Language-agnostic heuristic: words = rate_wps * detected speech seconds."""

    rate_wps: float = 5.0


@dataclass(frozen=True)
class Exact:
    """Known word counts per utterance id (stands in for an ASR word count)."""

    counts: dict = field(default_factory=dict)

    @classmethod
    def from_utterances(cls, utts):
        return cls({u.id: u.word_count for u in utts if u.word_count is not None})


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def lah_word_count(d: float, rate_wps: float = 5.0) -> int:
    """round(rate * d), half-up, never below 1 for positive speech."""
    if d <= 0:
        raise NoSpeechDetected("no speech detected (d == 0)")
    return max(1, round_half_up(rate_wps * d))


def estimate_word_count(u: Utterance, provider=LAH(), vad_cfg: VadConfig = VadConfig(),
                        detector=None) -> int:
    if isinstance(provider, Exact):
        try:
            return int(provider.counts[u.id])
        except KeyError:
            raise KeyError(f"no exact word count for utterance {u.id!r}") from None
    detector = detector or EnergyVad(vad_cfg)
    return lah_word_count(detector(u).total_speech_s, provider.rate_wps)


def build_target(u: Utterance, w: int, vocab: Vocabulary, insert_spaces=False) -> list[int]:
    if w < 1:
        raise ValueError("word count must be >= 1")
    if u.dialect is None:
        raise UnknownDialect(f"utterance {u.id!r} has no dialect label")
    tag = vocab.index(u.dialect)
    if not insert_spaces:
        return [tag] * w
    if vocab.space_index is None:
        raise ValueError("vocabulary has no space token")
    out = []
    for i in range(w):
        if i:
            out.append(vocab.space_index)
        out.append(tag)
    return out


@dataclass
class PreparedTarget:
    id: str
    target: list
    w: int
    d: float | None


def prepare_targets(utts, vocab, provider=LAH(), vad_cfg=VadConfig(), insert_spaces=False):
    """Targets for every utterance; those with no detected speech are skipped.

    Returns ``(prepared, skipped_ids)``.
    """
    detector = EnergyVad(vad_cfg)
    out, skipped = [], []
    for u in utts:
        d = detector(u).total_speech_s
        try:
            if isinstance(provider, Exact):
                w = estimate_word_count(u, provider)
            else:
                w = lah_word_count(d, provider.rate_wps)
        except NoSpeechDetected:
            skipped.append(u.id)
            continue
        out.append(PreparedTarget(u.id, build_target(u, w, vocab, insert_spaces), w, d))
    return out, skipped


def write_targets(path, prepared):
    with open(path, "w") as fh:
        for p in prepared:
            fh.write(json.dumps({"id": p.id, "target": p.target, "w": p.w, "d": p.d}) + "\n")


def read_targets(path) -> list[PreparedTarget]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                out.append(PreparedTarget(r["id"], list(r["target"]), int(r["w"]), r.get("d")))
    return out
