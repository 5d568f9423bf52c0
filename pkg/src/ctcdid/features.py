"""Log mel filterbank front-end at 50 frames per second (hop 320 at 16 kHz)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .corpus import SAMPLE_RATE, Utterance
from .errors import TooShort
from .ops import blockwise, rowwise_matmul


@dataclass(frozen=True)
class FeatureConfig:
    hop_samples: int = 320
    window_samples: int = 400
    n_fft: int = 512
    n_bands: int = 24
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if SAMPLE_RATE % self.hop_samples:
            raise ValueError("hop must divide the sample rate for an integer frame rate")
        if self.n_fft < self.window_samples:
            raise ValueError("n_fft must cover the window")

    @property
    def frame_rate(self) -> float:
        return SAMPLE_RATE / self.hop_samples

    def to_dict(self):
        return asdict(self)


def n_frames(n_samples: int, cfg: FeatureConfig = FeatureConfig()) -> int:
    if n_samples < cfg.window_samples:
        return 0
    return (n_samples - cfg.window_samples) // cfg.hop_samples + 1


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Triangular filters, shape (n_fft // 2 + 1, n_bands), peak weight 1."""
    edges = _mel_to_hz(np.linspace(_hz_to_mel(cfg.f_min), _hz_to_mel(cfg.f_max), cfg.n_bands + 2))
    freqs = np.arange(cfg.n_fft // 2 + 1) * SAMPLE_RATE / cfg.n_fft
    fb = np.zeros((len(freqs), cfg.n_bands))
    for b in range(cfg.n_bands):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        fb[:, b] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def extract_features(u, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """T' x n_bands log filterbank energies, T' = (N - window) // hop + 1."""
    samples = u.samples if isinstance(u, Utterance) else np.asarray(u)
    n = len(samples)
    T = n_frames(n, cfg)
    if T == 0:
        raise TooShort(f"{n} samples is shorter than one {cfg.window_samples}-sample window")
    x = samples.astype(np.float64) / 32768.0
    idx = np.arange(cfg.window_samples)[None, :] + cfg.hop_samples * np.arange(T)[:, None]
    frames = x[idx] * np.hanning(cfg.window_samples + 2)[1:-1]
    n_bins = cfg.n_fft // 2 + 1
    power = blockwise(lambda f: np.abs(np.fft.rfft(f, n=cfg.n_fft, axis=1)) ** 2, frames, n_bins)
    energy = rowwise_matmul(power, mel_filterbank(cfg))
    return np.log(np.maximum(energy, cfg.log_floor))
