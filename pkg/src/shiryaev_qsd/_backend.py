"""Pick the compiled kernels when available, else the NumPy twins.

Set ``SHIRYAEV_QSD_PURE=1`` to force the pure-Python path.
"""
import os

from . import _pykernels

python_kernels = _pykernels

if os.environ.get("SHIRYAEV_QSD_PURE", "") not in ("", "0"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _pykernels
        BACKEND = "python"

compiled_kernels = kernels if BACKEND == "cython" else None
