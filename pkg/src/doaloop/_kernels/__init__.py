"""Kernel backend selection: compiled extension if present, numpy otherwise.

Set ``DOALOOP_KERNEL=python`` to force the pure-numpy fallback (used by the
benchmark and the backend-parity tests).
"""

import os

from . import _pykernels

if os.environ.get("DOALOOP_KERNEL", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

phase_mask_gains = _impl.phase_mask_gains

__all__ = ["BACKEND", "phase_mask_gains"]
