"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise the
NumPy/pure-Python fallback takes over.  Set ``LATSTRUCT_PURE=1`` to force
the fallback (used by the benchmark and the backend-parity tests).
"""

import os

from . import _pure

if os.environ.get("LATSTRUCT_PURE", "") not in ("", "0"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

g2_statistic = _impl.g2_statistic
reachable_mask = _impl.reachable_mask


def backend_name() -> str:
    return BACKEND
