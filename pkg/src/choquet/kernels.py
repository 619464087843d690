"""Backend selection for the maxout-layer kernels.

The compiled extension is used when importable; set ``CHOQUET_PURE_PYTHON=1``
to force the numpy implementation.
"""
import os

from . import _kernels_py

BACKEND = "python"
maxout_forward = _kernels_py.maxout_forward
maxout_backward = _kernels_py.maxout_backward

if not os.environ.get("CHOQUET_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        maxout_forward = _compiled.maxout_forward
        maxout_backward = _compiled.maxout_backward

__all__ = ["BACKEND", "maxout_forward", "maxout_backward"]
