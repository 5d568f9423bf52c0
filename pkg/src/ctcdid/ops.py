"""Row-stable linear algebra.

BLAS picks different kernels for different row counts, so ``X[a:b] @ W``
is not always bit-equal to ``(X @ W)[a:b]``. Streaming inference needs a
chunk's frames to be bit-equal to the same frames of the full utterance,
so every row-wise product on the inference path goes through fixed-size
row blocks held in one buffer layout.
"""

import numpy as np

BLOCK_ROWS = 64


def blockwise(fn, a, out_cols, block=BLOCK_ROWS, dtype=np.float64):
    """Apply a row-wise ``fn`` to ``a`` in zero-padded blocks of ``block`` rows."""
    n = a.shape[0]
    out = np.empty((n, out_cols), dtype=dtype)
    buf = np.zeros((block,) + a.shape[1:], dtype=a.dtype)
    for i in range(0, n, block):
        m = min(block, n - i)
        buf[:m] = a[i:i + m]
        buf[m:] = 0
        out[i:i + m] = fn(buf)[:m]
    return out


def rowwise_matmul(a, w, block=BLOCK_ROWS):
    return blockwise(lambda x: x @ w, a, w.shape[1], block)
