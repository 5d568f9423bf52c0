import numpy as np
import pytest

from ctcdid.checkpoint import Checkpoint, MAGIC
from ctcdid.corpus import Utterance
from ctcdid.ctc import ctc_loss, ctc_loss_grad
from ctcdid.encoder import Encoder, EncoderConfig, init_params
from ctcdid.errors import CheckpointError, TooShort
from ctcdid.features import FeatureConfig, extract_features, mel_filterbank, n_frames
from ctcdid.labels import Vocabulary
from ctcdid.ops import rowwise_matmul
from oracles import central_diff


def test_frame_count_one_second():
    assert n_frames(16000) == (16000 - 400) // 320 + 1 == 49
    rng = np.random.default_rng(0)
    feats = extract_features(Utterance("x", rng.integers(-1000, 1000, 16000)))
    assert feats.shape == (49, 24)


def test_frame_count_four_seconds_about_50c():
    assert n_frames(64000) == 199
    assert abs(n_frames(64000) - 50 * 4) <= 1


def test_silence_features_constant():
    feats = extract_features(Utterance("z", np.zeros(8000)))
    assert np.all(feats == np.log(1e-10))


def test_too_short():
    with pytest.raises(TooShort):
        extract_features(Utterance("s", np.zeros(399)))


def test_filterbank_shape():
    fb = mel_filterbank(FeatureConfig())
    assert fb.shape == (257, 24)
    assert np.all(fb >= 0) and np.all(fb.max(axis=0) > 0.5)


def test_tone_lands_in_right_band():
    x = 0.5 * 32767 * np.sin(2 * np.pi * 1000 * np.arange(16000) / 16000)
    feats = extract_features(Utterance("t", np.round(x)))
    fb = mel_filterbank()
    expected_band = np.argmax(fb[int(round(1000 * 512 / 16000))])
    assert np.all(np.argmax(feats, axis=1) == expected_band)


def test_features_of_subrange_bit_equal():
    rng = np.random.default_rng(1)
    x = rng.integers(-5000, 5000, 40000)
    full = extract_features(x)
    part = extract_features(x[3200:3200 + 9600])
    assert np.array_equal(part, full[10:10 + len(part)])


def test_rowwise_matmul_is_row_stable():
    rng = np.random.default_rng(2)
    a, w = rng.normal(size=(300, 96)), rng.normal(size=(96, 40))
    full = rowwise_matmul(a, w)
    np.testing.assert_allclose(full, a @ w, rtol=1e-12, atol=1e-12)
    for s, n in [(0, 1), (5, 17), (64, 64), (100, 199)]:
        assert np.array_equal(rowwise_matmul(a[s:s + n], w), full[s:s + n])


def small_encoder(seed=0, **kw):
    cfg = EncoderConfig(**{"n_in": 6, "n_out": 4, "hidden": 8, "conv_width": 3, "n_conv": 2, **kw})
    enc = Encoder(cfg, seed=seed)
    rng = np.random.default_rng(seed + 100)
    for v in enc.params.values():
        v += rng.normal(scale=0.1, size=v.shape)
    return enc


def test_receptive_field_formula():
    assert EncoderConfig().receptive_field == 17
    assert EncoderConfig(conv_width=5, n_conv=3).receptive_field == 13


def test_zero_params_zero_logits():
    cfg = EncoderConfig(n_in=24, n_out=5)
    enc = Encoder(cfg, params={k: np.zeros_like(v) for k, v in init_params(cfg).items()})
    out = enc.forward(np.random.default_rng(0).normal(size=(30, 24)))
    assert out.shape == (30, 5) and np.all(out == 0)


def test_constant_input_constant_interior_logits():
    enc = Encoder(EncoderConfig(n_in=24, n_out=5))
    out = enc.forward(np.ones((60, 24)) * 0.3)
    r = enc.cfg.half_field
    interior = out[r:-r]
    assert np.array_equal(interior, np.broadcast_to(interior[0], interior.shape))


@pytest.mark.parametrize("frame", [0, 7, 25, 49])
def test_impulse_receptive_field(frame):
    enc = Encoder(EncoderConfig(n_in=24, n_out=5), seed=3)
    x = np.random.default_rng(4).normal(size=(50, 24))
    base = enc.forward(x)
    x2 = x.copy()
    x2[frame] += 5.0
    changed = np.flatnonzero(np.any(enc.forward(x2) != base, axis=1))
    r = enc.cfg.half_field
    assert changed.min() >= frame - r and changed.max() <= frame + r
    # the bound is attained: the frames at the edge of the field do respond
    assert frame - r in changed or frame - r < 0
    assert frame + r in changed or frame + r > 49


def test_encoder_gradient_finite_differences():
    rng = np.random.default_rng(5)
    enc = small_encoder()
    x = rng.normal(size=(9, 6))
    target = [1, 3, 3]
    logits, cache = enc._forward(x)
    grads = enc.backward(cache, ctc_loss_grad(logits, target).grad)
    for name in enc.params:
        p = enc.params[name]

        def f(v, name=name):
            old = enc.params[name]
            enc.params[name] = v
            try:
                return ctc_loss(enc.forward(x), target)
            finally:
                enc.params[name] = old

        fd = central_diff(f, p, eps=1e-6)
        err = np.linalg.norm(grads[name] - fd) / max(np.linalg.norm(fd), 1e-12)
        assert err <= 1e-4, (name, err)


def test_checkpoint_round_trip(tmp_path):
    enc = small_encoder()
    vocab = Vocabulary.build(["A", "B", "C"])
    ck = Checkpoint(vocab, FeatureConfig(n_bands=6), enc, {"note": "x"}).quantized()
    path = tmp_path / "m.ckpt"
    ck.save(path)
    raw = open(path, "rb").read()
    assert raw.startswith(MAGIC)
    back = Checkpoint.load(path)
    assert back.vocab == vocab and back.feature_config == ck.feature_config
    assert back.encoder.cfg == enc.cfg and back.meta == {"note": "x"}
    for k in enc.params:
        assert np.array_equal(back.encoder.params[k], ck.encoder.params[k])
    assert back.to_bytes() == raw
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(b"NOTACKPT" + raw[8:])
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(raw[:-4])
