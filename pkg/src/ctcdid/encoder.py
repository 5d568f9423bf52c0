"""Frame-level encoder: pointwise input layer, temporal convolutions, linear output.

Every stage keeps the frame count. Convolutions are zero-padded
symmetrically, so output frame ``t`` sees input frames within
``(R - 1) / 2`` of ``t``, where ``R = 1 + n_conv * (conv_width - 1)``.
Backpropagation is written out by hand.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .ops import rowwise_matmul


@dataclass(frozen=True)
class EncoderConfig:
    n_in: int = 24
    n_out: int = 5
    hidden: int = 128
    conv_width: int = 9
    n_conv: int = 2

    def __post_init__(self):
        if self.conv_width < 1 or self.conv_width % 2 == 0:
            raise ValueError("conv_width must be a positive odd number")
        if min(self.n_in, self.n_out, self.hidden) < 1 or self.n_conv < 0:
            raise ValueError("layer sizes must be positive")

    @property
    def receptive_field(self) -> int:
        return 1 + self.n_conv * (self.conv_width - 1)

    @property
    def half_field(self) -> int:
        return (self.receptive_field - 1) // 2

    def to_dict(self):
        return asdict(self)


def param_shapes(cfg: EncoderConfig) -> dict:
    shapes = {"in_W": (cfg.n_in, cfg.hidden), "in_b": (cfg.hidden,)}
    for i in range(cfg.n_conv):
        shapes[f"conv{i}_W"] = (cfg.conv_width, cfg.hidden, cfg.hidden)
        shapes[f"conv{i}_b"] = (cfg.hidden,)
    shapes["out_W"] = (cfg.hidden, cfg.n_out)
    shapes["out_b"] = (cfg.n_out,)
    return shapes


def init_params(cfg: EncoderConfig, seed=0) -> dict:
    """He-normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
        elif name == "out_W":
            params[name] = rng.normal(0.0, np.sqrt(1.0 / cfg.hidden), shape)
        else:
            fan_in = int(np.prod(shape[:-1]))
            params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
    return params


def _unfold(h, width):
    """Stack the ``width`` neighbours of every frame: (T, H) -> (T, width * H)."""
    pad = (width - 1) // 2
    T = h.shape[0]
    padded = np.pad(h, ((pad, pad), (0, 0)))
    return np.concatenate([padded[j:j + T] for j in range(width)], axis=1)


def _fold(dU, width, T):
    """Adjoint of :func:`_unfold`."""
    pad = (width - 1) // 2
    H = dU.shape[1] // width
    dpadded = np.zeros((T + 2 * pad, H))
    for j in range(width):
        dpadded[j:j + T] += dU[:, j * H:(j + 1) * H]
    return dpadded[pad:pad + T]


class Encoder:
    """Parameters plus the frozen input normalization of the feature front-end."""

    def __init__(self, cfg: EncoderConfig, params=None, norm_mean=None, norm_scale=None, seed=0):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, seed)
        self.norm_mean = np.zeros(cfg.n_in) if norm_mean is None else np.asarray(norm_mean, float)
        self.norm_scale = np.ones(cfg.n_in) if norm_scale is None else np.asarray(norm_scale, float)

    @property
    def receptive_field(self) -> int:
        return self.cfg.receptive_field

    def set_normalization(self, features_list):
        stacked = np.concatenate(features_list, axis=0)
        self.norm_mean = stacked.mean(axis=0)
        self.norm_scale = np.maximum(stacked.std(axis=0), 1e-3)

    def forward(self, features) -> np.ndarray:
        return self._forward(features)[0]

    def _forward(self, features):
        p, cfg = self.params, self.cfg
        x = (np.asarray(features, dtype=np.float64) - self.norm_mean) / self.norm_scale
        cache = {"x": x}
        z = rowwise_matmul(x, p["in_W"]) + p["in_b"]
        h = np.maximum(z, 0.0)
        cache["z_in"] = z
        for i in range(cfg.n_conv):
            W = p[f"conv{i}_W"]
            U = _unfold(h, cfg.conv_width)
            z = rowwise_matmul(U, W.reshape(-1, W.shape[2])) + p[f"conv{i}_b"]
            h = np.maximum(z, 0.0)
            cache[f"U{i}"] = U
            cache[f"z{i}"] = z
        cache["h_out"] = h
        logits = rowwise_matmul(h, p["out_W"]) + p["out_b"]
        return logits, cache

    def backward(self, cache, dlogits) -> dict:
        """Parameter gradients given d loss / d logits for one utterance."""
        p, cfg = self.params, self.cfg
        T = dlogits.shape[0]
        g = {}
        h = cache["h_out"]
        g["out_W"] = h.T @ dlogits
        g["out_b"] = dlogits.sum(axis=0)
        dh = dlogits @ p["out_W"].T
        for i in reversed(range(cfg.n_conv)):
            dz = dh * (cache[f"z{i}"] > 0)
            W = p[f"conv{i}_W"]
            g[f"conv{i}_W"] = (cache[f"U{i}"].T @ dz).reshape(W.shape)
            g[f"conv{i}_b"] = dz.sum(axis=0)
            dU = dz @ W.reshape(-1, W.shape[2]).T
            dh = _fold(dU, cfg.conv_width, T)
        dz = dh * (cache["z_in"] > 0)
        g["in_W"] = cache["x"].T @ dz
        g["in_b"] = dz.sum(axis=0)
        return g

    def copy(self) -> "Encoder":
        return Encoder(self.cfg, {k: v.copy() for k, v in self.params.items()},
                       self.norm_mean.copy(), self.norm_scale.copy())

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())
