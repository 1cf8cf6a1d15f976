"""Hot-loop kernels with a compiled (Cython) core and a numpy fallback.

The compiled module is optional; selection happens once at import time.
Set ``BESOVFLOW_NO_SPEEDUPS=1`` to force the fallback (used by the
benchmark and by tests that compare the two implementations).
"""
import os

from . import _fallback

if os.environ.get("BESOVFLOW_NO_SPEEDUPS"):
    _impl = _fallback
    HAVE_SPEEDUPS = False
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        HAVE_SPEEDUPS = True
    except ImportError:
        _impl = _fallback
        HAVE_SPEEDUPS = False

magnitude_threshold_split = _impl.magnitude_threshold_split
lp_norm_pow = _impl.lp_norm_pow

__all__ = ["HAVE_SPEEDUPS", "magnitude_threshold_split", "lp_norm_pow", "_fallback"]
