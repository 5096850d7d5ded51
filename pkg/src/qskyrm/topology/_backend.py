"""Kernel backend selection: compiled extension when available, numpy
fallback otherwise.  Set QSKYRM_PURE_PYTHON=1 to force the fallback."""
from __future__ import annotations

import os

if os.environ.get("QSKYRM_PURE_PYTHON"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

BACKEND: str = kernels.BACKEND
