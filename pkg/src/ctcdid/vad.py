"""Energy-based voice activity detection.

The detector only has to supply the total speech duration of an
utterance, so a frame-energy threshold relative to the utterance's own
noise floor is enough. Anything with a ``__call__(utt) -> SpeechSegments``
signature can replace :class:`EnergyVad` where a detector is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import SAMPLE_RATE, Utterance


@dataclass(frozen=True)
class VadConfig:
    frame_ms: float = 30.0
    hop_ms: float = 10.0
    energy_floor_percentile: float = 10.0
    threshold_db_above_floor: float = 9.0
    min_speech_ms: float = 90.0
    min_pause_ms: float = 90.0
    # Only consulted when no frame rises above the relative threshold:
    # a flat utterance is all speech if its level exceeds this, else silence.
    silence_dbfs: float = -60.0

    def __post_init__(self):
        if not self.frame_ms >= self.hop_ms > 0:
            raise ValueError("need frame_ms >= hop_ms > 0")
        if not 0 < self.energy_floor_percentile < 100:
            raise ValueError("energy_floor_percentile must lie in (0, 100)")
        if self.threshold_db_above_floor <= 0:
            raise ValueError("threshold_db_above_floor must be positive")
        if self.min_speech_ms < 0 or self.min_pause_ms < 0:
            raise ValueError("minimum durations must be non-negative")


@dataclass
class SpeechSegments:
    segments: list = field(default_factory=list)
    total_speech_s: float = 0.0


def frame_energies_db(x, frame, hop):
    """Mean-square energy per frame in dBFS; one zero-padded frame if x is short."""
    if len(x) < frame:
        x = np.pad(x, (0, frame - len(x)))
    n = (len(x) - frame) // hop + 1
    idx = np.arange(frame)[None, :] + hop * np.arange(n)[:, None]
    power = np.mean(x[idx] ** 2, axis=1)
    return 10.0 * np.log10(power + 1e-12)


def _runs(mask):
    """Inclusive (first, last) index pairs of True runs."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def detect_speech(u: Utterance, cfg: VadConfig = VadConfig()) -> SpeechSegments:
    n_samples = len(u.samples)
    if n_samples == 0:
        raise ValueError("empty utterance")
    frame = int(round(cfg.frame_ms * SAMPLE_RATE / 1000))
    hop = int(round(cfg.hop_ms * SAMPLE_RATE / 1000))
    x = u.samples.astype(np.float64) / 32768.0
    energy = frame_energies_db(x, frame, hop)
    floor = np.percentile(energy, cfg.energy_floor_percentile)
    speech = energy >= floor + cfg.threshold_db_above_floor
    if not speech.any() and floor > cfg.silence_dbfs:
        speech[:] = True
    n_frames = len(energy)

    # A frame straddling a speech edge is already loud, so runs are shrunk by
    # half a window on each side; the outermost frames extend to the file ends.
    segs = []
    for first, last in _runs(speech):
        start = 0 if first == 0 else first * hop + frame - hop
        end = n_samples if last == n_frames - 1 else last * hop + hop
        end = min(end, n_samples)
        if end > start:
            segs.append([start, end])

    min_pause = cfg.min_pause_ms * SAMPLE_RATE / 1000
    merged = []
    for seg in segs:
        if merged and seg[0] - merged[-1][1] < min_pause:
            merged[-1][1] = seg[1]
        else:
            merged.append(seg)
    min_speech = cfg.min_speech_ms * SAMPLE_RATE / 1000
    kept = [(s, e) for s, e in merged if e - s >= min_speech]

    total = sum(e - s for s, e in kept) / SAMPLE_RATE
    return SpeechSegments(
        segments=[(s / SAMPLE_RATE, e / SAMPLE_RATE) for s, e in kept],
        total_speech_s=total,
    )


class EnergyVad:
    """Callable wrapper so a configured detector can be passed around."""

    def __init__(self, cfg: VadConfig = VadConfig()):
        self.cfg = cfg

    def __call__(self, u: Utterance) -> SpeechSegments:
        return detect_speech(u, self.cfg)
