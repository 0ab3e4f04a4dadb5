"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting
``SHILLKIT_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

if os.environ.get("SHILLKIT_PURE_PYTHON"):
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

svd_sgd_epoch = _impl.svd_sgd_epoch
nmf_sgd_epoch = _impl.nmf_sgd_epoch
slope_one_accumulate = _impl.slope_one_accumulate

__all__ = ["BACKEND", "svd_sgd_epoch", "nmf_sgd_epoch", "slope_one_accumulate"]
