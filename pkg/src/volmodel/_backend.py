"""Kernel backend selection.

The compiled extension is preferred; ``VOLMODEL_PURE=1`` forces the
pure-Python kernels (used by the parity tests and the benchmark).
"""
import os

if os.environ.get("VOLMODEL_PURE", "") not in ("", "0"):
    from . import _pykernels as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _pykernels as kernels

BACKEND = "compiled" if kernels.__name__.endswith("._kernels") else "python"

__all__ = ["kernels", "BACKEND"]
