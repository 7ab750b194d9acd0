"""Pure-numpy versions of the compiled kernels (same signatures, in-place outputs)."""

import numpy as np


def propagate(A, C, x, w, v, y):
    """Advance ``x`` (B x n) through K steps, writing outputs into ``y`` (B x K x p)."""
    At = np.ascontiguousarray(A.T)
    Ct = np.ascontiguousarray(C.T)
    state = x.copy()
    for k in range(w.shape[1]):
        y[:, k, :] = state @ Ct + v[:, k, :]
        state = state @ At + w[:, k, :]
    x[...] = state


def accumulate_llr(y, diff, log_det_ratio, total, path):
    """Write running LLR totals into ``path`` (B x K) and update ``total`` (B,)."""
    inc = 0.5 * (log_det_ratio + np.einsum("bki,ij,bkj->bk", y, diff, y))
    run = np.concatenate([total[:, None], inc], axis=1)
    np.cumsum(run, axis=1, out=run)
    path[...] = run[:, 1:]
    total[...] = run[:, -1]
