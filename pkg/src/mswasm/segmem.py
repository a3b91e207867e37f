"""Selects the segment memory kernel at import time.

The compiled extension is preferred when present; MSWASM_PURE_PYTHON=1
forces the pure-Python kernel.  Both expose the same surface and are
differentially tested against each other.
"""

import os

if os.environ.get("MSWASM_PURE_PYTHON"):
    from .segmem_py import SegmentKernel

    KERNEL_BACKEND = "python"
else:
    try:
        from ._segcore import SegmentKernel

        KERNEL_BACKEND = "compiled"
    except ImportError:
        from .segmem_py import SegmentKernel

        KERNEL_BACKEND = "python"

__all__ = ["SegmentKernel", "KERNEL_BACKEND"]
