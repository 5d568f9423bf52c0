import numpy as np
import pytest

from ctcdid.checkpoint import Checkpoint
from ctcdid.corpus import SynthSpec, Utterance, synthesize_corpus
from ctcdid.decode import decode_logits
from ctcdid.encoder import Encoder, EncoderConfig
from ctcdid.features import FeatureConfig, extract_features, n_frames
from ctcdid.labels import Vocabulary
from ctcdid.streaming import StreamConfig, StreamState, chunk_spans, stream_infer, stream_predict

HOP = 320


@pytest.fixture(scope="module")
def ckpt():
    vocab = Vocabulary.build(["A", "B", "C"])
    enc = Encoder(EncoderConfig(n_in=24, n_out=len(vocab), hidden=32), seed=7)
    rng = np.random.default_rng(0)
    for v in enc.params.values():
        v += rng.normal(scale=0.05, size=v.shape)
    enc.set_normalization([rng.normal(-8, 3, size=(50, 24))])
    return Checkpoint(vocab, FeatureConfig(), enc).quantized()


@pytest.fixture(scope="module")
def utts():
    return synthesize_corpus(SynthSpec(["A", "B", "C"], 3, duration_range_s=(2.0, 5.0), seed=5))


def batch_logits(ck, u):
    return ck.encoder.forward(extract_features(u, ck.feature_config))


def test_config():
    cfg = StreamConfig(1.0, 0.5)
    assert cfg.stride == 16000 and cfg.context == 8000
    with pytest.raises(ValueError):
        StreamConfig(0.0)
    with pytest.raises(ValueError):
        StreamConfig(1.0, -1.0)
    with pytest.raises(ValueError):
        StreamConfig(1.0 / 3)


def test_degenerate_single_chunk_bit_exact(ckpt, utts):
    for u in utts:
        out = stream_infer(u, ckpt, StreamConfig(chunk_s=np.ceil(u.duration_s), context_s=0.0))
        assert np.array_equal(out, batch_logits(ckpt, u))
        cfg = StreamConfig(chunk_s=np.ceil(u.duration_s))
        assert stream_predict(u, ckpt, cfg) == decode_logits(batch_logits(ckpt, u), ckpt.vocab)


def test_one_second_chunks_retain_about_50(ckpt, utts):
    u = utts[0]
    state = StreamState(ckpt, StreamConfig(1.0, 0.0))
    chunks = state.feed(u.samples)
    assert len(chunks) == len(u.samples) // 16000
    for frames in chunks:
        assert len(frames) == n_frames(16000) == 49


def test_first_chunk_not_trimmed(ckpt, utts):
    u = utts[1]
    state = StreamState(ckpt, StreamConfig(1.0, 2.0))
    first = state.feed(u.samples[:16000])[0]
    assert len(first) == n_frames(16000)
    assert np.array_equal(first, ckpt.encoder.forward(extract_features(u.samples[:16000])))


def interior_pairs(u, ck, cfg):
    """(streamed frame, batch frame) index pairs whose receptive field lies inside the chunk."""
    half = ck.encoder.cfg.half_field
    spans = chunk_spans(len(u.samples), cfg)
    pos = 0
    pairs = []
    for k, (start, t, end) in enumerate(spans):
        total = n_frames(end - start)
        trim = (t - start) // HOP
        last_chunk = k == len(spans) - 1
        for local in range(trim, total):
            if last_chunk or local <= total - 1 - half:
                pairs.append((pos + local - trim, start // HOP + local))
        pos += max(total - trim, 0)
    return pairs


@pytest.mark.parametrize("chunk, context", [(0.5, 0.5), (1.0, 0.2), (1.0, 4.0), (2.0, 1.0)])
def test_context_covering_receptive_field_bit_equal(ckpt, utts, chunk, context):
    half = ckpt.encoder.cfg.half_field
    assert context * 16000 >= half * HOP
    cfg = StreamConfig(chunk, context)
    for u in utts:
        out = stream_infer(u, ckpt, cfg)
        full = batch_logits(ckpt, u)
        pairs = interior_pairs(u, ckpt, cfg)
        assert pairs
        s_idx, b_idx = map(np.array, zip(*pairs))
        assert np.array_equal(out[s_idx], full[b_idx])


def test_frame_count_conservation(ckpt, utts):
    for u in utts:
        T = n_frames(len(u.samples))
        for chunk, context in [(0.5, 0.0), (1.0, 1.0), (2.0, 4.0), (4.0, 0.5)]:
            cfg = StreamConfig(chunk, context)
            boundaries = len(chunk_spans(len(u.samples), cfg)) - 1
            got = len(stream_infer(u, ckpt, cfg))
            assert abs(got - T) <= boundaries


def test_chunk_causality(ckpt, utts):
    u = utts[2]
    cfg = StreamConfig(0.5, 1.0)
    cut = 2 * 8000 + 123
    altered = u.samples.copy()
    altered[cut:] = np.random.default_rng(1).integers(-20000, 20000, len(altered) - cut)
    a = StreamState(ckpt, cfg).feed(u.samples)
    b = StreamState(ckpt, cfg).feed(altered)
    for (start, t, end), fa, fb in zip(chunk_spans(len(u.samples), cfg), a, b):
        if end <= cut:
            assert np.array_equal(fa, fb)
    assert not np.array_equal(a[-1], b[-1])


def test_incremental_feed_matches_one_shot(ckpt, utts):
    u = utts[3]
    cfg = StreamConfig(0.5, 1.0)
    rng = np.random.default_rng(2)
    state = StreamState(ckpt, cfg)
    pos = 0
    while pos < len(u.samples):
        step = int(rng.integers(1, 9000))
        state.feed(u.samples[pos:pos + step])
        pos += step
    state.finish()
    assert np.array_equal(state.emitted_frames, stream_infer(u, ckpt, cfg))


def test_tiny_final_chunk_skipped(ckpt):
    x = np.random.default_rng(3).integers(-3000, 3000, 16000 + 100)
    out = stream_infer(Utterance("x", x), ckpt, StreamConfig(1.0, 0.0))
    assert len(out) == n_frames(16000)
