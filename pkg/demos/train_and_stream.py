"""
Train a small dialect model, then run it in chunks
==================================================

A four-dialect synthetic corpus, a short training run, and a comparison of
full-utterance decoding with chunked streaming at a few chunk and context
sizes. Takes about a minute and a half on one core.
"""

import time

import numpy as np

from ctcdid.corpus import SynthSpec, split_corpus, synthesize_corpus
from ctcdid.decode import predict
from ctcdid.evaluation import fit, predict_all, run_sweep, score
from ctcdid.labels import LAH, Vocabulary
from ctcdid.streaming import StreamConfig, StreamState
from ctcdid.train import TrainConfig

dialects = ["A", "B", "C", "D"]
utts = synthesize_corpus(SynthSpec(dialects, 40, duration_range_s=(2.0, 6.0), seed=1))
train_utts, test_utts = split_corpus(utts, 0.75, seed=1)
vocab = Vocabulary.build(dialects)
print(len(train_utts), "training and", len(test_utts), "test utterances")

t0 = time.time()
res = fit(train_utts, vocab, LAH(5.0), TrainConfig(max_steps=800, log_every=0))
losses = np.array([l for _, l in res.losses])
print(f"trained 800 steps in {time.time() - t0:.0f} s; loss {losses[:20].mean():.1f} -> {losses[-20:].mean():.1f}")

ck = res.checkpoint
f1, cm = score(test_utts, predict_all(ck, test_utts), vocab.dialects)
print("batch weighted F1:", round(f1, 4))
print("confusion (rows = reference, last column = unknown):\n", cm.counts)

# One utterance, decoded whole and then fed one second at a time.
u = test_utts[0]
print("\n", u.id, "whole-utterance prediction:", predict(ck, u).dialect)
state = StreamState(ck, StreamConfig(chunk_s=1.0, context_s=2.0))
for k in range(0, len(u.samples), 16000):
    for frames in state.feed(u.samples[k:k + 16000]):
        print(f"  chunk ending {state.consumed_samples / 16000:.0f} s: {len(frames)} frames")
state.finish()
print("  frames streamed:", len(state.emitted_frames))

# Streaming F1 over a small chunk/context grid. Once the left context covers
# the encoder's receptive field, interior frames equal the batch ones.
sweep = run_sweep(test_utts, ck, chunks=[0.5, 1.0], contexts=[0.0, 1.0])
for (c, l), v in sorted(sweep.grid.items()):
    print(f"chunk {c:g} s, context {l:g} s: F1 {v:.4f}")
