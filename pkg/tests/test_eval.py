import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import f1_score

from ctcdid.checkpoint import Checkpoint
from ctcdid.corpus import SynthSpec, synthesize_corpus
from ctcdid.decode import UNKNOWN, Prediction
from ctcdid.encoder import Encoder, EncoderConfig
from ctcdid.errors import EmptyEvaluation
from ctcdid.evaluation import (ConfusionMatrix, compare_label_prep, duration_bin_report, fit,
                               predict_all, run_sweep, score, weighted_f1)
from ctcdid.features import FeatureConfig
from ctcdid.labels import LAH, Exact, Vocabulary, prepare_targets
from ctcdid.train import TrainConfig


def cm_of(refs, preds, labels=("a", "b")):
    return ConfusionMatrix.from_predictions(refs, preds, labels)


def test_perfect():
    assert weighted_f1(cm_of(list("aabb"), list("aabb"))) == 1.0


def test_hand_computed_two_class():
    refs = ["a"] * 10 + ["b"] * 10
    preds = ["a"] * 10 + ["b"] * 5 + ["a"] * 5
    # a: P=10/15 R=1 F1=0.8; b: P=1 R=0.5 F1=2/3
    assert weighted_f1(cm_of(refs, preds)) == pytest.approx(0.5 * 0.8 + 0.5 * 2 / 3, abs=1e-12)


def test_all_unknown():
    cm = cm_of(list("abab"), [UNKNOWN] * 4)
    assert cm.counts[:, -1].sum() == 4
    assert weighted_f1(cm) == 0.0


def test_empty():
    with pytest.raises(EmptyEvaluation):
        weighted_f1(cm_of([], []))


labels = ["a", "b", "c"]


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(labels), st.sampled_from(labels + [UNKNOWN])), min_size=1, max_size=40))
def test_matches_sklearn_and_is_order_invariant(pairs):
    refs, preds = zip(*pairs)
    cm = cm_of(refs, preds, labels)
    assert cm.total == len(pairs)
    ours = weighted_f1(cm)
    ref = f1_score(refs, preds, labels=labels, average="weighted", zero_division=0)
    assert ours == pytest.approx(ref, abs=1e-12)
    rev = cm_of(refs[::-1], preds[::-1], labels)
    assert weighted_f1(rev) == ours


@pytest.fixture(scope="module")
def small_setup():
    dialects = ["A", "B"]
    utts = synthesize_corpus(SynthSpec(dialects, 6, duration_range_s=(1.0, 3.0), seed=21))
    vocab = Vocabulary.build(dialects)
    enc = Encoder(EncoderConfig(n_in=24, n_out=len(vocab), hidden=8, n_conv=1, conv_width=3), seed=2)
    enc.set_normalization([np.zeros((1, 24)), np.ones((1, 24)) * -10])
    return utts, Checkpoint(vocab, FeatureConfig(), enc).quantized()


def test_duration_bins(small_setup, tmp_path):
    utts, ck = small_setup
    preds = [Prediction("A" if i % 3 else "B") for i in range(len(utts))]
    rep = duration_bin_report(utts, ck, [0.5, 1.5, 2.0, 3.0], out_dir=tmp_path, predictions=preds)
    assert rep.skipped == [0.5]
    assert rep.bins[-1].degradation == 0.0
    assert rep.bins[-1].n == len(utts)
    for b in rep.bins:
        sub = [i for i, u in enumerate(utts) if u.duration_s <= b.threshold_s]
        f1, _ = score([utts[i] for i in sub], [preds[i] for i in sub], ["A", "B"])
        assert b.f1 == f1
        if b.degradation:
            assert b.degradation == pytest.approx((rep.f1_all - f1) / rep.f1_all)
    rows = [r for r in csv.reader(l for l in open(tmp_path / "duration_bins.csv") if not l.startswith("#"))]
    assert rows[0] == ["threshold_s", "n", "weighted_f1", "relative_degradation"]
    assert (tmp_path / "duration_bins.svg").read_text().startswith("<svg")
    with pytest.raises(ValueError):
        duration_bin_report(utts, ck, [3.0, 1.0], predictions=preds)
    with pytest.raises(ValueError):
        duration_bin_report(utts, ck, [1.0], predictions=preds)


def test_degradation_arithmetic():
    assert (0.90 - 0.81) / 0.90 == pytest.approx(0.10)


def test_sweep_degenerate_cell_equals_batch(small_setup, tmp_path):
    utts, ck = small_setup
    batch_f1, _ = score(utts, predict_all(ck, utts), ck.vocab.dialects)
    longest = max(u.duration_s for u in utts)
    res = run_sweep(utts, ck, chunks=[float(np.ceil(longest))], contexts=[0.0], out_dir=tmp_path,
                    batch_f1=batch_f1)
    assert list(res.grid.values()) == [batch_f1]
    assert (tmp_path / "sweep.csv").exists() and (tmp_path / "sweep_by_context.svg").exists()


def test_sweep_threads_match_serial(small_setup):
    utts, ck = small_setup
    a = run_sweep(utts, ck, chunks=[0.5, 1.0], contexts=[0.0, 0.5])
    b = run_sweep(utts, ck, chunks=[0.5, 1.0], contexts=[0.0, 0.5], threads=3)
    assert a.grid == b.grid and len(a.grid) == 4


def test_compare_identical_counts_identical_f1():
    dialects = ["A", "B"]
    utts = synthesize_corpus(SynthSpec(dialects, 4, duration_range_s=(1.0, 2.0), seed=9))
    vocab = Vocabulary.build(dialects)
    prep, _ = prepare_targets(utts, vocab, LAH(5.0))
    exact = Exact({p.id: p.w for p in prep})
    cfg = TrainConfig(max_steps=3, batch_size=2)
    rep = compare_label_prep(utts, utts, vocab, cfg, exact=exact)
    (_, f_lah), (_, f_exact) = rep.rows
    assert f_lah == f_exact and rep.gap == 0.0
    a, b = rep.checkpoints.values()
    assert a.to_bytes() == b.to_bytes()


def test_fit_uses_features_cache():
    dialects = ["A", "B"]
    utts = synthesize_corpus(SynthSpec(dialects, 2, duration_range_s=(1.0, 1.5), seed=1))
    vocab = Vocabulary.build(dialects)
    from ctcdid.features import extract_features
    feats = {u.id: extract_features(u) for u in utts}
    cfg = TrainConfig(max_steps=2, batch_size=2)
    a = fit(utts, vocab, LAH(), cfg, features=feats).checkpoint
    b = fit(utts, vocab, LAH(), cfg).checkpoint
    assert a.to_bytes() == b.to_bytes()
