"""Audio I/O, JSONL manifests and a synthetic multi-dialect corpus.

Only RIFF/WAVE PCM16 mono 16 kHz audio is accepted. The synthetic
generator gives every dialect its own set of sinusoid frequencies, so a
small frame-level model can learn to separate them, and alternates speech
bursts with near-silent pauses so that a VAD has real silence to find.
"""

from __future__ import annotations

import json
import os
import wave
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDialect, UnsupportedFormat

SAMPLE_RATE = 16000
FULL_SCALE = 32767


@dataclass
class Utterance:
    id: str
    samples: np.ndarray
    dialect: str | None = None
    sample_rate: int = SAMPLE_RATE
    # Generator ground truth; absent for audio loaded from disk.
    word_count: int | None = None
    speech_segments: list = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.int16)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if self.sample_rate != SAMPLE_RATE:
            raise UnsupportedFormat(f"sample rate {self.sample_rate} != {SAMPLE_RATE}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)


@dataclass
class ManifestEntry:
    audio_path: str
    dialect: str
    duration_s: float


def load_wav(path, utt_id=None, dialect=None) -> Utterance:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            payload = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    if channels != 1:
        raise UnsupportedFormat(f"{path}: {channels} channels, expected mono")
    if width != 2:
        raise UnsupportedFormat(f"{path}: {8 * width}-bit samples, expected 16-bit")
    if rate != SAMPLE_RATE:
        raise UnsupportedFormat(f"{path}: {rate} Hz, expected {SAMPLE_RATE} Hz")
    samples = np.frombuffer(payload, dtype="<i2").astype(np.int16)
    if utt_id is None:
        utt_id = os.path.splitext(os.path.basename(str(path)))[0]
    return Utterance(id=utt_id, samples=samples, dialect=dialect)


def write_wav(path, utt: Utterance):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(SAMPLE_RATE)
        w.writeframes(utt.samples.astype("<i2").tobytes())


def write_manifest(path, entries):
    with open(path, "w") as fh:
        for e in entries:
            rec = {"audio": e.audio_path, "dialect": e.dialect, "duration": e.duration_s}
            fh.write(json.dumps(rec) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if not rec.get("dialect"):
                raise ValueError(f"{path}:{lineno}: empty dialect")
            entries.append(ManifestEntry(rec["audio"], rec["dialect"], float(rec["duration"])))
    return entries


def load_manifest(path, word_counts=None) -> list[Utterance]:
    """Load every utterance listed in a manifest.

    Relative audio paths resolve against the manifest's directory. If
    ``word_counts`` (id -> count) is given, it fills ``Utterance.word_count``.
    """
    base = os.path.dirname(os.path.abspath(path))
    utts = []
    for e in read_manifest(path):
        audio = e.audio_path if os.path.isabs(e.audio_path) else os.path.join(base, e.audio_path)
        u = load_wav(audio, dialect=e.dialect)
        if word_counts is not None and u.id in word_counts:
            u.word_count = int(word_counts[u.id])
        utts.append(u)
    return utts


def manifest_entries(utts, wav_subdir="wav"):
    return [ManifestEntry(os.path.join(wav_subdir, f"{u.id}.wav"), u.dialect, u.duration_s) for u in utts]


def save_corpus(utts, out_dir, manifest_name="manifest.jsonl"):
    """Write WAVs, a manifest and the generator's word counts to ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    wav_dir = os.path.join(out_dir, "wav")
    os.makedirs(wav_dir, exist_ok=True)
    counts = {}
    for u in utts:
        write_wav(os.path.join(wav_dir, f"{u.id}.wav"), u)
        if u.word_count is not None:
            counts[u.id] = u.word_count
    entries = manifest_entries(utts)
    manifest = os.path.join(out_dir, manifest_name)
    write_manifest(manifest, entries)
    if counts:
        with open(os.path.join(out_dir, "word_counts.json"), "w") as fh:
            json.dump(counts, fh, indent=0, sort_keys=True)
    return manifest


@dataclass
class SynthSpec:
    dialects: list
    utterances_per_dialect: int = 10
    duration_range_s: tuple = (2.0, 8.0)
    burst_range_s: tuple = (0.4, 0.8)
    pause_range_s: tuple = (0.2, 0.4)
    noise_level: float = 0.005
    seed: int = 0
    # Difficulty: how many of the dialect's signature tones sound in each
    # burst (None = all), how many tones per burst come from a pool shared by
    # every dialect, and the level of broadband noise inside bursts.
    tones_per_burst: int | None = None
    shared_tones: int = 0
    speech_noise: float = 0.05

    def validate(self):
        lo, hi = self.duration_range_s
        if lo < 0.5 or hi < lo:
            raise ValueError(f"bad duration range {self.duration_range_s}")
        if len(set(self.dialects)) != len(self.dialects) or not self.dialects:
            raise ValueError("dialects must be non-empty and pairwise distinct")
        if not 0 <= self.noise_level < 1:
            raise ValueError("noise_level must lie in [0, 1)")
        for lo_, hi_ in (self.burst_range_s, self.pause_range_s):
            if lo_ <= 0 or hi_ < lo_:
                raise ValueError("burst/pause ranges must be positive and ordered")


def dialect_frequencies(n_dialects, per_dialect=3, f_lo=300.0, f_hi=6000.0):
    """Disjoint sinusoid frequency sets, interleaved over a log-spaced pool.

    Dialect ``i`` gets pool entries ``i, i + n, i + 2n, ...`` so each one
    covers low, mid and high bands.
    """
    pool = np.geomspace(f_lo, f_hi, n_dialects * per_dialect)
    return [pool[i::n_dialects] for i in range(n_dialects)]


def _schedule(rng, n_samples, spec):
    """Alternating pause/burst intervals as (start, end) sample pairs of speech."""
    min_burst = int(0.1 * SAMPLE_RATE)
    segs = []
    pos = int(rng.uniform(*spec.pause_range_s) * SAMPLE_RATE)
    while pos < n_samples:
        burst = int(rng.uniform(*spec.burst_range_s) * SAMPLE_RATE)
        end = min(pos + burst, n_samples)
        if end - pos < min_burst:
            break
        segs.append((pos, end))
        pos = end + int(rng.uniform(*spec.pause_range_s) * SAMPLE_RATE)
    return segs


def shared_frequencies(n=16, f_lo=250.0, f_hi=7000.0):
    """Pool of tones any dialect may use; disjoint from the signature pool."""
    return np.geomspace(f_lo, f_hi, n)


def _render_burst(rng, n, freqs, ramp, spec):
    t = np.arange(n) / SAMPLE_RATE
    x = np.zeros(n)
    k = len(freqs) if spec.tones_per_burst is None else min(spec.tones_per_burst, len(freqs))
    active = list(rng.choice(freqs, size=k, replace=False)) if k < len(freqs) else list(freqs)
    if spec.shared_tones:
        active += list(rng.choice(shared_frequencies(), size=spec.shared_tones, replace=False))
    for f in active:
        f = f * rng.uniform(0.97, 1.03)
        amp = rng.uniform(0.5, 1.0)
        x += amp * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    # shaped noise: first-difference white noise, tilted towards high bands
    noise = np.diff(rng.standard_normal(n + 1))
    x = x / len(active) + spec.speech_noise * noise
    r = min(ramp, n // 2)
    if r > 0:
        win = 0.5 - 0.5 * np.cos(np.pi * np.arange(r) / r)
        x[:r] *= win
        x[n - r:] *= win[::-1]
    return x


def synthesize_utterance(utt_id, dialect, freqs, n_samples, rng, spec) -> Utterance:
    segs = _schedule(rng, n_samples, spec)
    gain = rng.uniform(0.15, 0.3)
    x = np.zeros(n_samples)
    ramp = int(0.005 * SAMPLE_RATE)
    for s, e in segs:
        x[s:e] = gain * _render_burst(rng, e - s, freqs, ramp, spec)
    noise = rng.uniform(-spec.noise_level, spec.noise_level, n_samples)
    pcm = np.clip(np.round((x + noise) * FULL_SCALE), -FULL_SCALE, FULL_SCALE).astype(np.int16)
    segments = [(s / SAMPLE_RATE, e / SAMPLE_RATE) for s, e in segs]
    return Utterance(id=utt_id, samples=pcm, dialect=dialect,
                     word_count=len(segs), speech_segments=segments)


def synthesize_corpus(spec: SynthSpec) -> list[Utterance]:
    spec.validate()
    recipes = dialect_frequencies(len(spec.dialects))
    lo, hi = spec.duration_range_s
    utts = []
    for di, dialect in enumerate(spec.dialects):
        for k in range(spec.utterances_per_dialect):
            rng = np.random.default_rng([spec.seed, di, k])
            n = int(round(rng.uniform(lo, hi) * SAMPLE_RATE))
            utts.append(synthesize_utterance(f"{dialect}_{k:04d}", dialect, recipes[di], n, rng, spec))
    return utts


def split_corpus(utts, train_fraction, seed=0):
    """Stratified per-dialect split into (train, test), preserving input order."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    groups = defaultdict(list)
    for i, u in enumerate(utts):
        groups[u.dialect].append(i)
    rng = np.random.default_rng(seed)
    train_idx = set()
    for dialect in sorted(groups, key=str):
        idx = groups[dialect]
        if len(idx) < 2:
            raise EmptyDialect(f"dialect {dialect!r} has {len(idx)} utterance(s); need at least 2")
        n_train = min(max(int(round(train_fraction * len(idx))), 1), len(idx) - 1)
        perm = rng.permutation(len(idx))
        train_idx.update(idx[j] for j in perm[:n_train])
    train = [u for i, u in enumerate(utts) if i in train_idx]
    test = [u for i, u in enumerate(utts) if i not in train_idx]
    return train, test
