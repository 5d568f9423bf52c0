"""Pseudo-streaming inference over chunks with a left-context window.

Audio arrives in chunks of ``c`` seconds. Each chunk is evaluated together
with up to ``l`` seconds of preceding audio, and only the frames produced
for the chunk itself are kept. The number of leading frames to drop is
worked out from the context actually available, so the first chunk (which
has none) loses nothing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import SAMPLE_RATE
from .decode import decode_logits
from .features import extract_features, n_frames

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StreamConfig:
    chunk_s: float
    context_s: float = 0.0
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.chunk_s <= 0 or self.context_s < 0:
            raise ValueError("need chunk_s > 0 and context_s >= 0")
        for name, v in (("chunk_s", self.chunk_s), ("context_s", self.context_s)):
            n = v * self.sample_rate
            if abs(n - round(n)) > 1e-6:
                raise ValueError(f"{name} * sample_rate must be a whole number of samples")

    @property
    def stride(self) -> int:
        return int(round(self.chunk_s * self.sample_rate))

    @property
    def context(self) -> int:
        return int(round(self.context_s * self.sample_rate))


class StreamState:
    """Incremental streaming session for one audio stream.

    ``feed`` accepts any amount of new audio and returns the frames emitted
    for each chunk that became complete; ``finish`` flushes the final
    partial chunk. Emitted frames are never revised.
    """

    def __init__(self, checkpoint, cfg: StreamConfig):
        self.checkpoint = checkpoint
        self.cfg = cfg
        self.fcfg = checkpoint.feature_config
        self._buf = np.zeros(0, dtype=np.int16)
        self._buf_offset = 0  # absolute sample index of _buf[0]
        self.consumed_samples = 0  # samples already covered by evaluated chunks
        self._frames = []

    @property
    def emitted_frames(self) -> np.ndarray:
        V = len(self.checkpoint.vocab)
        return np.concatenate(self._frames, axis=0) if self._frames else np.zeros((0, V))

    def _run_chunk(self, t, end):
        start = max(0, t - self.cfg.context)
        chunk = self._buf[start - self._buf_offset:end - self._buf_offset]
        if n_frames(len(chunk), self.fcfg) == 0:
            log.info("chunk [%d, %d) shorter than one analysis window; skipped", start, end)
            frames = np.zeros((0, len(self.checkpoint.vocab)))
        else:
            logits = self.checkpoint.encoder.forward(extract_features(chunk, self.fcfg))
            trim = (t - start) // self.fcfg.hop_samples
            frames = logits[trim:]
        self._frames.append(frames)
        self.consumed_samples = end
        # keep only what the next chunk's context can reach
        keep_from = max(0, end - self.cfg.context)
        drop = keep_from - self._buf_offset
        if drop > 0:
            self._buf = self._buf[drop:]
            self._buf_offset = keep_from
        return frames

    def feed(self, samples) -> list:
        self._buf = np.concatenate([self._buf, np.asarray(samples, dtype=np.int16)])
        out = []
        stride = self.cfg.stride
        while self._buf_offset + len(self._buf) - self.consumed_samples >= stride:
            t = self.consumed_samples
            out.append(self._run_chunk(t, t + stride))
        return out

    def finish(self) -> list:
        total = self._buf_offset + len(self._buf)
        if total > self.consumed_samples:
            return [self._run_chunk(self.consumed_samples, total)]
        return []


def stream_infer(u, checkpoint, cfg: StreamConfig) -> np.ndarray:
    """Frame logits for the whole utterance, assembled chunk by chunk."""
    samples = u.samples if hasattr(u, "samples") else np.asarray(u)
    if len(samples) == 0:
        raise ValueError("empty utterance")
    state = StreamState(checkpoint, cfg)
    state.feed(samples)
    state.finish()
    return state.emitted_frames


def stream_predict(u, checkpoint, cfg: StreamConfig):
    return decode_logits(stream_infer(u, checkpoint, cfg), checkpoint.vocab)


def chunk_spans(n_samples, cfg: StreamConfig):
    """(start, t, end) sample spans visited for an utterance of ``n_samples``."""
    spans = []
    for t in range(0, n_samples, cfg.stride):
        spans.append((max(0, t - cfg.context), t, min(t + cfg.stride, n_samples)))
    return spans
