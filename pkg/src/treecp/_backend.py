"""Pick the kernel implementation once, at import time.

The compiled extension is preferred. Setting ``TREECP_BACKEND=python``
forces the pure-Python kernel (handy for debugging and for the
equivalence tests).
"""
import os

_want = os.environ.get("TREECP_BACKEND", "").strip().lower()

if _want == "python":
    from . import _pykernel as kernel
else:
    try:
        from . import _ckernel as kernel
    except ImportError:
        if _want in ("c", "cython", "compiled"):
            raise
        from . import _pykernel as kernel

Arena = kernel.Arena
Ladder = kernel.Ladder
BACKEND = kernel.BACKEND
