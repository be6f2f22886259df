"""Scatter-kernel backend selection.

Prefers the compiled Cython extension; falls back to pure numpy when the
extension is not built or when ``NOISYLINK_PURE=1`` is set (used by the
kernel benchmark to compare both backends).
"""

import os

if os.environ.get("NOISYLINK_PURE") == "1":
    from . import _scatter_py as _backend

    BACKEND = "python"
else:
    try:
        from . import _scatter_cy as _backend

        BACKEND = "cython"
    except ImportError:
        from . import _scatter_py as _backend

        BACKEND = "python"

spmm_forward = _backend.spmm_forward
spmm_backward_x = _backend.spmm_backward_x
spmm_backward_weights = _backend.spmm_backward_weights

__all__ = ["BACKEND", "spmm_forward", "spmm_backward_x", "spmm_backward_weights"]
