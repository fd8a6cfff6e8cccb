"""Kernel backend selection.

The compiled Cython core is preferred; the numpy fallback is used when the
extension is missing or when VOXATLAS_PUREPY=1 is set (handy for the
backend-comparison benchmark and for debugging).
"""

import os

from . import purepy

if os.environ.get("VOXATLAS_PUREPY", "") == "1":
    _impl = purepy
    BACKEND = "purepy"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = purepy
        BACKEND = "purepy"

edt_sq = _impl.edt_sq
closest_points = _impl.closest_points
rasterize_mask = _impl.rasterize_mask

__all__ = ["BACKEND", "edt_sq", "closest_points", "rasterize_mask", "purepy"]
