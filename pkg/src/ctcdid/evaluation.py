"""Weighted F1 scoring and the experiment runners built on it.

* :func:`duration_bin_report` scores the subsets of utterances no longer
  than each duration threshold and reports the relative F1 degradation
  ``(F1_all - F1_tau) / F1_all``.
* :func:`run_sweep` evaluates streaming inference over a chunk x context grid.
* :func:`compare_label_prep` trains two models that differ only in how
  the word counts behind their targets were obtained.

"unknown" predictions get their own confusion column and never count as a
true positive.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decode import UNKNOWN, predict
from .errors import EmptyBin, EmptyEvaluation
from .features import extract_features
from .labels import LAH, Exact, prepare_targets
from .plots import line_plot, write_svg
from .streaming import StreamConfig, stream_predict
from .train import TrainConfig, train
from .vad import VadConfig

log = logging.getLogger(__name__)

SWEEP_GRID = (0.5, 1.0, 2.0, 4.0)


@dataclass
class ConfusionMatrix:
    labels: list
    counts: np.ndarray  # rows: reference; columns: predicted labels, then "unknown"

    @classmethod
    def from_predictions(cls, references, predictions, labels):
        labels = list(labels)
        pos = {l: i for i, l in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels) + 1), dtype=np.int64)
        for ref, pred in zip(references, predictions, strict=True):
            counts[pos[ref], pos.get(pred, len(labels))] += 1
        return cls(labels, counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def weighted_f1(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise EmptyEvaluation("no scored utterances")
    D = len(cm.labels)
    score = 0.0
    for c in range(D):
        tp = cm.counts[c, c]
        support = cm.counts[c].sum()
        predicted = cm.counts[:, c].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        score += support / total * f1
    return float(score)


def score(utts, predictions, labels):
    """Weighted F1 and confusion matrix of predictions (tags or Prediction objects)."""
    tags = [getattr(p, "dialect", p) for p in predictions]
    cm = ConfusionMatrix.from_predictions([u.dialect for u in utts], tags, labels)
    return weighted_f1(cm), cm


def _map(fn, items, threads=1):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def predict_all(checkpoint, utts, threads=1):
    return _map(lambda u: predict(checkpoint, u), utts, threads)


def stream_predict_all(checkpoint, utts, cfg: StreamConfig, threads=1):
    return _map(lambda u: stream_predict(u, checkpoint, cfg), utts, threads)


def _write_csv(path, header, rows, comments=()):
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in r) + "\n")


@dataclass
class DurationBin:
    threshold_s: float
    n: int
    f1: float
    degradation: float


@dataclass
class DurationReport:
    f1_all: float
    bins: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def as_dict(self):
        return {b.threshold_s: (b.f1, b.degradation) for b in self.bins}


def duration_bin_report(utts, checkpoint, thresholds, out_dir=None, predictions=None,
                        threads=1) -> DurationReport:
    thresholds = list(thresholds)
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be ascending")
    if thresholds[-1] < max(u.duration_s for u in utts):
        raise ValueError("largest threshold must cover the longest utterance")
    if predictions is None:
        predictions = predict_all(checkpoint, utts, threads)
    labels = checkpoint.vocab.dialects
    f1_all, _ = score(utts, predictions, labels)
    report = DurationReport(f1_all)
    for tau in thresholds:
        idx = [i for i, u in enumerate(utts) if u.duration_s <= tau]
        if not idx:
            log.info("no utterance of %.2f s or less; bin skipped", tau)
            report.skipped.append(tau)
            continue
        f1, _ = score([utts[i] for i in idx], [predictions[i] for i in idx], labels)
        if f1 == f1_all:
            deg = 0.0
        else:
            deg = (f1_all - f1) / f1_all if f1_all else float("nan")
        report.bins.append(DurationBin(float(tau), len(idx), f1, deg))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "duration_bins.csv"),
                   ["threshold_s", "n", "weighted_f1", "relative_degradation"],
                   [(b.threshold_s, b.n, b.f1, b.degradation) for b in report.bins],
                   comments=["subset = utterances with duration <= threshold_s",
                             "relative_degradation = (f1_all - weighted_f1) / f1_all",
                             f"f1_all = {f1_all!r}",
                             f"skipped_empty_bins = {report.skipped}"])
        svg = line_plot({"relative degradation": [(b.threshold_s, b.degradation) for b in report.bins]},
                        title="F1 degradation on utterances <= duration",
                        xlabel="duration threshold (s)", ylabel="relative degradation")
        write_svg(os.path.join(out_dir, "duration_bins.svg"), svg)
    return report


@dataclass
class SweepResult:
    grid: dict  # (chunk_s, context_s) -> weighted F1
    batch_f1: float | None = None

    def series_by_context(self):
        out = {}
        for (c, l), f1 in sorted(self.grid.items()):
            out.setdefault(f"context {l:g}s", []).append((c, f1))
        return out

    def series_by_chunk(self):
        out = {}
        for (c, l), f1 in sorted(self.grid.items()):
            out.setdefault(f"chunk {c:g}s", []).append((l, f1))
        return out


def run_sweep(utts, checkpoint, chunks=SWEEP_GRID, contexts=SWEEP_GRID, out_dir=None,
              threads=1, batch_f1=None) -> SweepResult:
    if not chunks or not contexts:
        raise ValueError("chunk and context grids must be non-empty")
    labels = checkpoint.vocab.dialects
    cells = [(float(c), float(l)) for c in chunks for l in contexts]

    def run_cell(cell):
        preds = stream_predict_all(checkpoint, utts, StreamConfig(*cell))
        return score(utts, preds, labels)[0]

    # cells run in parallel; utterances inside a cell run in order
    f1s = _map(run_cell, cells, threads)
    result = SweepResult(dict(zip(cells, f1s)), batch_f1)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        comments = ["weighted F1 of streaming inference per (chunk, left context) cell",
                    "plots join grid points with straight lines (linear interpolation)"]
        if batch_f1 is not None:
            comments.append(f"batch_f1 = {batch_f1!r}")
        _write_csv(os.path.join(out_dir, "sweep.csv"), ["chunk_s", "context_s", "weighted_f1"],
                   [(c, l, f) for (c, l), f in sorted(result.grid.items())], comments)
        write_svg(os.path.join(out_dir, "sweep_by_chunk.svg"),
                  line_plot(result.series_by_context(), title="F1 vs chunk size",
                            xlabel="chunk (s)", ylabel="weighted F1", ylim=(0, 1)))
        write_svg(os.path.join(out_dir, "sweep_by_context.svg"),
                  line_plot(result.series_by_chunk(), title="F1 vs left context",
                            xlabel="left context (s)", ylabel="weighted F1", ylim=(0, 1)))
    return result


def fit(train_utts, vocab, provider=LAH(), train_cfg=TrainConfig(), vad_cfg=VadConfig(),
        insert_spaces=False, features=None, encoder_config=None, out_dir=None):
    """Prepare targets with ``provider`` and train on them.

    ``features`` optionally maps utterance id -> precomputed features.
    """
    prepared, skipped = prepare_targets(train_utts, vocab, provider, vad_cfg, insert_spaces)
    if skipped:
        log.warning("%d utterances had no detected speech and were left out", len(skipped))
    by_id = {u.id: u for u in train_utts}
    utts = [by_id[p.id] for p in prepared]
    feats = [features[u.id] for u in utts] if features is not None else None
    return train(utts, [p.target for p in prepared], vocab, train_cfg,
                 encoder_config=encoder_config, features=feats, out_dir=out_dir)


@dataclass
class LabelPrepReport:
    rows: list  # (name, weighted F1)
    checkpoints: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return abs(self.rows[0][1] - self.rows[1][1])


def compare_label_prep(train_utts, test_utts, vocab, train_cfg=TrainConfig(), rate_wps=5.0,
                       exact=None, out_dir=None, features=None, threads=1,
                       trained=None) -> LabelPrepReport:
    """Train with LAH word counts and with exact counts; score both on ``test_utts``.

    ``trained`` maps a row name to an already trained checkpoint, which is
    scored instead of training that row again.
    """
    trained = trained or {}
    if exact is None:
        exact = Exact.from_utterances(train_utts)
    missing = [u.id for u in train_utts if u.id not in exact.counts]
    if missing:
        raise ValueError(f"{len(missing)} training utterances lack an exact word count")
    if features is None and len(trained) < 2:
        features = {u.id: extract_features(u) for u in train_utts}
    rows, ckpts = [], {}
    for name, provider in ((f"LAH(rate={rate_wps:g})", LAH(rate_wps)), ("Exact", exact)):
        ck = trained.get(name) or fit(train_utts, vocab, provider, train_cfg, features=features).checkpoint
        f1, _ = score(test_utts, predict_all(ck, test_utts, threads), vocab.dialects)
        rows.append((name, f1))
        ckpts[name] = ck
    report = LabelPrepReport(rows, ckpts)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "label_prep.csv"), ["target_prep", "weighted_f1"], rows,
                   comments=[f"abs_gap = {report.gap!r}"])
    return report


def is_unknown(p) -> bool:
    return getattr(p, "dialect", p) == UNKNOWN
