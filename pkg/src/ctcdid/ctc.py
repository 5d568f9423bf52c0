"""CTC loss, its gradient with respect to the logits, and greedy decoding.

The forward (alpha) and backward (beta) recursions run in log space over
the blank-extended target ``[blank, y1, blank, y2, ..., yL, blank]``.
:func:`ctc_loss_grad_batch` pads a batch and vectorizes over it, so the
only Python loop is over time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTarget, NonFiniteInput

FRAME_RATE = 50
NEG_INF = -np.inf


@dataclass
class CtcResult:
    loss: float
    grad: np.ndarray


def extend_target(target, blank=0) -> list[int]:
    ext = [blank]
    for y in target:
        ext += [int(y), blank]
    return ext


def min_frames(target) -> int:
    """Fewest frames that can carry ``target``: one per label plus a blank per repeat."""
    target = list(target)
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def ctc_feasible(n_frames: int, target) -> bool:
    return n_frames >= min_frames(target)


def log_softmax(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    z = x - m
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def _check(logits, target, blank):
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] < 1 or logits.shape[1] < 2:
        raise ValueError(f"logits must be T x V with T >= 1, V >= 2; got {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("logits contain NaN or Inf")
    target = [int(y) for y in target]
    if not target:
        raise InfeasibleTarget("empty target")
    if blank in target:
        raise ValueError("target contains the blank index")
    if any(y < 0 or y >= logits.shape[1] for y in target):
        raise ValueError("target index outside the vocabulary")
    if not ctc_feasible(logits.shape[0], target):
        raise InfeasibleTarget(
            f"{logits.shape[0]} frames cannot carry a target needing {min_frames(target)}")
    return logits, target


def ctc_loss_grad_batch(logits_list, targets, blank=0) -> list[CtcResult]:
    """Per-utterance CTC negative log-likelihood and d loss / d logits."""
    checked = [_check(x, y, blank) for x, y in zip(logits_list, targets)]
    B = len(checked)
    if B == 0:
        return []
    V = checked[0][0].shape[1]
    T_len = np.array([x.shape[0] for x, _ in checked])
    exts = [extend_target(y, blank) for _, y in checked]
    S_len = np.array([len(e) for e in exts])
    T, S = int(T_len.max()), int(S_len.max())
    bidx = np.arange(B)

    lp = np.zeros((B, T, V))
    for b, (x, _) in enumerate(checked):
        lp[b, : T_len[b]] = log_softmax(x)
    ext = np.full((B, S), blank, dtype=np.int64)
    for b, e in enumerate(exts):
        ext[b, : len(e)] = e
    s_valid = np.arange(S)[None, :] < S_len[:, None]
    # a transition s-2 -> s skips a blank; only allowed between distinct labels
    skip = np.zeros((B, S), dtype=bool)
    skip[:, 2:] = (ext[:, 2:] != blank) & (ext[:, 2:] != ext[:, :-2])
    skip &= s_valid

    lp_ext = np.take_along_axis(lp, np.broadcast_to(ext[:, None, :], (B, T, S)), axis=2)
    lp_ext = np.where(s_valid[:, None, :], lp_ext, NEG_INF)

    alpha = np.full((B, T, S), NEG_INF)
    alpha[:, 0, 0] = lp_ext[:, 0, 0]
    alpha[:, 0, 1] = lp_ext[:, 0, 1]
    for t in range(1, T):
        prev = alpha[:, t - 1]
        a1 = np.concatenate([np.full((B, 1), NEG_INF), prev[:, :-1]], axis=1)
        a2 = np.concatenate([np.full((B, 2), NEG_INF), prev[:, :-2]], axis=1)
        a2 = np.where(skip, a2, NEG_INF)
        alpha[:, t] = np.logaddexp(np.logaddexp(prev, a1), a2) + lp_ext[:, t]

    last = T_len - 1
    log_p = np.logaddexp(alpha[bidx, last, S_len - 1], alpha[bidx, last, S_len - 2])

    # skip_from[s]: may jump s -> s+2
    skip_from = np.zeros((B, S), dtype=bool)
    skip_from[:, :-2] = skip[:, 2:]
    beta = np.full((B, T, S), NEG_INF)
    for t in range(T - 1, -1, -1):
        if t == T - 1:
            rec = np.full((B, S), NEG_INF)
        else:
            nxt = beta[:, t + 1]
            b1 = np.concatenate([nxt[:, 1:], np.full((B, 1), NEG_INF)], axis=1)
            b2 = np.concatenate([nxt[:, 2:], np.full((B, 2), NEG_INF)], axis=1)
            b2 = np.where(skip_from, b2, NEG_INF)
            rec = np.logaddexp(np.logaddexp(nxt, b1), b2) + lp_ext[:, t]
        init = np.full((B, S), NEG_INF)
        init[bidx, S_len - 1] = lp_ext[bidx, t, S_len - 1]
        init[bidx, S_len - 2] = lp_ext[bidx, t, S_len - 2]
        ends_here = (t == last)[:, None]
        before_end = (t < last)[:, None]
        beta[:, t] = np.where(ends_here, init, np.where(before_end, rec, NEG_INF))

    # State occupancy; alpha and beta both include the emission at t. Every
    # frame's occupancies sum to p(target), so normalizing per frame equals
    # dividing by p but avoids cancellation against a huge |log p|.
    with np.errstate(invalid="ignore"):
        gamma = alpha + beta - lp_ext
    gamma = np.where(np.isnan(gamma), NEG_INF, gamma)
    g_max = np.max(gamma, axis=2, keepdims=True)
    g_max = np.where(np.isfinite(g_max), g_max, 0.0)
    occ = np.exp(gamma - g_max)
    norm = occ.sum(axis=2, keepdims=True)
    occ = occ / np.where(norm > 0, norm, 1.0)
    onehot = np.zeros((B, S, V))
    onehot[bidx[:, None], np.arange(S)[None, :], ext] = s_valid
    post = np.einsum("bts,bsv->btv", occ, onehot)

    results = []
    for b in range(B):
        n = T_len[b]
        grad = np.exp(lp[b, :n]) - post[b, :n]
        results.append(CtcResult(loss=float(max(0.0, -log_p[b])), grad=grad))
    return results


def ctc_loss_grad(logits, target, blank=0) -> CtcResult:
    return ctc_loss_grad_batch([logits], [target], blank)[0]


def ctc_loss(logits, target, blank=0) -> float:
    return ctc_loss_grad(logits, target, blank).loss


def greedy_decode(logits) -> np.ndarray:
    """Frame-wise argmax; ``np.argmax`` already breaks ties toward the lowest index."""
    logits = np.asarray(logits)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("logits contain NaN or Inf")
    return np.argmax(logits, axis=-1)


def collapse(path, blank=0) -> list[int]:
    """Merge consecutive duplicates, then drop blanks."""
    out = []
    prev = None
    for k in path:
        k = int(k)
        if k != prev and k != blank:
            out.append(k)
        prev = k
    return out
