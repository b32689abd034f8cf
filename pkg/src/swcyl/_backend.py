"""Kernel backend selection: compiled _core if available, numpy _ref otherwise.

Set SWCYL_FORCE_REF=1 to force the reference backend (used by the benchmark
and by backend-equivalence tests).
"""

import os

from . import _ref

if os.environ.get("SWCYL_FORCE_REF", "") not in ("", "0"):
    kernels = _ref
    BACKEND = "ref"
else:
    try:
        from . import _core as kernels  # type: ignore[attr-defined]

        BACKEND = "core"
    except ImportError:
        kernels = _ref
        BACKEND = "ref"
