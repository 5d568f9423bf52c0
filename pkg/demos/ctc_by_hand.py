"""
CTC loss on a problem small enough to check by hand
===================================================

A three-frame utterance, a vocabulary of blank plus two dialect tags, and
the target "tag 1 twice". We list every frame path that collapses to the
target, add up their probabilities, and compare with the forward-backward
result. Then we look at the gradient the trainer would receive.
"""

import itertools

import numpy as np

from ctcdid.ctc import collapse, ctc_loss_grad, extend_target, min_frames

np.set_printoptions(precision=4, suppress=True)

rng = np.random.default_rng(0)
logits = rng.normal(size=(3, 3))
target = [1, 1]
probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)

# A repeated tag needs a blank between the copies, so three frames is the minimum.
print("extended target:", extend_target(target), " minimum frames:", min_frames(target))

# Enumerate all 27 paths; only "1 0 1" survives the collapse.
total = 0.0
for path in itertools.product(range(3), repeat=3):
    if collapse(path) == target:
        p = np.prod(probs[np.arange(3), path])
        print("path", path, "p =", round(float(p), 6))
        total += p

res = ctc_loss_grad(logits, target)
print("brute force p:", total)
print("exp(-loss):   ", np.exp(-res.loss))

# The gradient is softmax minus the expected token occupancy. Each row sums
# to zero, and with a single valid path the occupancy is one-hot.
print("gradient:\n", res.grad)
print("row sums:", res.grad.sum(axis=1))
