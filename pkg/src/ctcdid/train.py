"""Minibatch Adam training of the encoder on mean CTC loss."""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass

import numpy as np

from .checkpoint import Checkpoint
from .ctc import ctc_feasible, ctc_loss_grad_batch
from .encoder import Encoder, EncoderConfig
from .errors import AllTargetsInfeasible, DivergedLoss
from .features import FeatureConfig, extract_features

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    max_steps: int = 1000
    grad_clip_norm: float = 5.0
    seed: int = 0
    checkpoint_every: int = 0
    log_every: int = 10

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_by_global_norm(grads, max_norm):
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


def batch_loss_grad(encoder, feats, targets, blank=0):
    """Mean CTC loss over the batch and its parameter gradients."""
    outs = [encoder._forward(f) for f in feats]
    results = ctc_loss_grad_batch([o[0] for o in outs], targets, blank)
    B = len(feats)
    total = None
    for (_, cache), r in zip(outs, results):
        g = encoder.backward(cache, r.grad / B)
        if total is None:
            total = g
        else:
            for k in total:
                total[k] += g[k]
    return sum(r.loss for r in results) / B, total


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    losses: list
    n_dropped: int


def train(utts, targets, vocab, cfg: TrainConfig = TrainConfig(),
          feature_config: FeatureConfig = FeatureConfig(), encoder_config: EncoderConfig | None = None,
          out_dir=None, features=None) -> TrainResult:
    """Train an encoder on utterances paired with CTC targets (lists of token ids).

    ``features`` may carry precomputed front-end outputs in the same order
    as ``utts``. Infeasible (utterance, target) pairs are dropped and counted.
    """
    if encoder_config is None:
        encoder_config = EncoderConfig(n_in=feature_config.n_bands, n_out=len(vocab))
    if features is None:
        features = [extract_features(u, feature_config) for u in utts]
    keep = [i for i, (f, y) in enumerate(zip(features, targets)) if y and ctc_feasible(len(f), y)]
    n_dropped = len(utts) - len(keep)
    if n_dropped:
        log.warning("dropped %d infeasible training pairs", n_dropped)
    if not keep:
        raise AllTargetsInfeasible("no feasible (utterance, target) pairs")
    feats = [features[i] for i in keep]
    tgts = [list(targets[i]) for i in keep]

    encoder = Encoder(encoder_config, seed=cfg.seed)
    encoder.set_normalization(feats)
    opt = Adam(encoder.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    meta = {"train_config": asdict(cfg), "n_train": len(feats), "n_dropped": n_dropped}

    def snapshot(step):
        return Checkpoint(vocab, feature_config, encoder.copy(), dict(meta, step=step)).quantized()

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    losses = []
    order = np.array([], dtype=int)
    last_good = snapshot(0)
    for step in range(1, cfg.max_steps + 1):
        if len(order) < cfg.batch_size:
            order = np.concatenate([order, rng.permutation(len(feats))])
        batch, order = order[:cfg.batch_size], order[cfg.batch_size:]
        loss, grads = batch_loss_grad(encoder, [feats[i] for i in batch], [tgts[i] for i in batch])
        if not np.isfinite(loss):
            raise DivergedLoss(f"non-finite loss at step {step}", last_good)
        grads, _ = clip_by_global_norm(grads, cfg.grad_clip_norm)
        opt.step(encoder.params, grads)
        losses.append((step, loss))
        if cfg.log_every and step % cfg.log_every == 0:
            log.info("step %d loss %.4f", step, loss)
        if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            last_good = snapshot(step)
            if out_dir:
                last_good.save(os.path.join(out_dir, f"step{step:06d}.ckpt"))

    final = snapshot(cfg.max_steps)
    if out_dir:
        final.save(os.path.join(out_dir, "final.ckpt"))
        write_loss_log(os.path.join(out_dir, "loss.csv"), losses)
    return TrainResult(final, losses, n_dropped)


def write_loss_log(path, losses):
    with open(path, "w") as fh:
        fh.write("step,loss\n")
        for step, loss in losses:
            fh.write(f"{step},{loss!r}\n")
