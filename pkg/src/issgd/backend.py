"""Kernel lane selection.

The compiled Cython kernels are used when the extension built; otherwise
the pure-Python fallback takes over.  ``ISSGD_BACKEND=pure`` forces the
fallback (used by the backend benchmark and the equivalence tests).
"""

import os

from . import _kernel_py

_forced = os.environ.get("ISSGD_BACKEND", "auto").strip().lower()

if _forced not in ("auto", "pure", "compiled"):
    raise RuntimeError(f"ISSGD_BACKEND must be auto|pure|compiled, got {_forced!r}")

kernel = _kernel_py
BACKEND = "pure"

if _forced != "pure":
    try:
        from . import _kernel_cy

        kernel = _kernel_cy
        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise RuntimeError(
                "ISSGD_BACKEND=compiled but the issgd._kernel_cy extension "
                "is not built; run pip install -e . with Cython available"
            ) from None


def is_compiled():
    return BACKEND == "compiled"
