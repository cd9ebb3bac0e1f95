"""Hot numeric kernels with a compiled core and a pure fallback.

The compiled Cython extension is used when importable; set WHINIT_PURE=1
to force the NumPy/SciPy reference implementations (used for benchmarking
and as a safety net on platforms without a compiler).
"""

import os

from . import _ref

if os.environ.get("WHINIT_PURE"):
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

iir_filter = _impl.iir_filter
spectral_selfconv = _impl.spectral_selfconv

__all__ = ["iir_filter", "spectral_selfconv", "BACKEND"]
