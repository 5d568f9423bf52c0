"""Utterance-level prediction: greedy CTC decode, then majority vote over dialect tokens."""

from __future__ import annotations

from dataclasses import dataclass, field

from .ctc import collapse, greedy_decode
from .features import extract_features
from .labels import Vocabulary

UNKNOWN = "unknown"


@dataclass
class Prediction:
    dialect: str
    token_histogram: dict = field(default_factory=dict)
    decoded_length: int = 0


def majority_vote(decoded, vocab: Vocabulary) -> Prediction:
    """Most frequent dialect token; ties go to the one that appeared first."""
    counts = {}
    first_seen = {}
    for pos, k in enumerate(decoded):
        k = int(k)
        if k == vocab.blank_index:
            raise ValueError("decoded sequence contains blank; collapse it first")
        if k == vocab.space_index:
            continue
        tag = vocab.tokens[k]
        counts[tag] = counts.get(tag, 0) + 1
        first_seen.setdefault(tag, pos)
    if not counts:
        return Prediction(UNKNOWN, {}, len(decoded))
    best = min(counts, key=lambda t: (-counts[t], first_seen[t]))
    return Prediction(best, counts, len(decoded))


def decode_logits(logits, vocab: Vocabulary) -> Prediction:
    return majority_vote(collapse(greedy_decode(logits), vocab.blank_index), vocab)


def predict(checkpoint, u) -> Prediction:
    """Full-utterance (non-streaming) prediction."""
    feats = extract_features(u, checkpoint.feature_config)
    return decode_logits(checkpoint.encoder.forward(feats), checkpoint.vocab)
