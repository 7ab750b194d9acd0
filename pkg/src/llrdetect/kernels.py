"""Hot-loop kernel selection.

The compiled extension is used when it imports; otherwise the numpy versions.
Set ``LLRDETECT_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("LLRDETECT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name=None):
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or current)."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def propagate(A, C, x, w, v, backend=None):
    """Run the recursion for a batch; returns outputs (B x K x p), updates ``x``."""
    impl = get_backend(backend)
    B, K = w.shape[0], w.shape[1]
    y = np.empty((B, K, C.shape[0]))
    impl.propagate(_c(A), _c(C), x, _c(w), _c(v), y)
    return y


def accumulate_llr(y, diff, log_det_ratio, total, backend=None):
    """Cumulative LLR path (B x K) continuing from ``total`` (updated in place)."""
    impl = get_backend(backend)
    path = np.empty(y.shape[:2])
    impl.accumulate_llr(_c(y), _c(diff), float(log_det_ratio), total, path)
    return path
