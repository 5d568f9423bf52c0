"""Binary checkpoint: magic, JSON header, then little-endian float32 blocks.

Layout::

    b"CTCDID01" | uint32 LE header length | UTF-8 JSON header | blocks

The header lists the vocabulary, feature and encoder configuration and the
name and shape of every block in storage order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .encoder import Encoder, EncoderConfig, param_shapes
from .errors import CheckpointError
from .features import FeatureConfig
from .labels import Vocabulary

MAGIC = b"CTCDID01"


def quantize(a):
    """Round to float32 precision, keep float64 storage."""
    return np.asarray(a, dtype=np.float32).astype(np.float64)


@dataclass
class Checkpoint:
    vocab: Vocabulary
    feature_config: FeatureConfig
    encoder: Encoder
    meta: dict = field(default_factory=dict)

    def quantized(self) -> "Checkpoint":
        enc = self.encoder
        q = Encoder(enc.cfg, {k: quantize(v) for k, v in enc.params.items()},
                    quantize(enc.norm_mean), quantize(enc.norm_scale))
        return Checkpoint(self.vocab, self.feature_config, q, dict(self.meta))

    def _blocks(self):
        enc = self.encoder
        blocks = [("norm_mean", enc.norm_mean), ("norm_scale", enc.norm_scale)]
        blocks += [(name, enc.params[name]) for name in param_shapes(enc.cfg)]
        return blocks

    def to_bytes(self) -> bytes:
        blocks = self._blocks()
        header = {
            "vocab": list(self.vocab.tokens),
            "feature_config": self.feature_config.to_dict(),
            "encoder_config": self.encoder.cfg.to_dict(),
            "blocks": [{"name": n, "shape": list(np.shape(a))} for n, a in blocks],
            "meta": self.meta,
        }
        hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
        parts = [MAGIC, struct.pack("<I", len(hbytes)), hbytes]
        parts += [np.asarray(a, dtype="<f4").tobytes() for _, a in blocks]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:8] != MAGIC:
            raise CheckpointError("bad magic; not a checkpoint file")
        (hlen,) = struct.unpack("<I", data[8:12])
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
        cfg = EncoderConfig(**header["encoder_config"])
        offset = 12 + hlen
        arrays = {}
        for b in header["blocks"]:
            n = int(np.prod(b["shape"])) if b["shape"] else 1
            end = offset + 4 * n
            if end > len(data):
                raise CheckpointError(f"truncated block {b['name']}")
            arrays[b["name"]] = np.frombuffer(data[offset:end], dtype="<f4").astype(np.float64).reshape(b["shape"])
            offset = end
        if offset != len(data):
            raise CheckpointError("trailing bytes after last block")
        expected = param_shapes(cfg)
        for name, shape in expected.items():
            if name not in arrays or arrays[name].shape != tuple(shape):
                raise CheckpointError(f"missing or misshapen block {name}")
        enc = Encoder(cfg, {k: arrays[k] for k in expected}, arrays["norm_mean"], arrays["norm_scale"])
        return cls(Vocabulary(tuple(header["vocab"])), FeatureConfig(**header["feature_config"]),
                   enc, header.get("meta", {}))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
