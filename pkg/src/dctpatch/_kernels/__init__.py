"""Hot-loop kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly, unless the environment
variable ``DCTPATCH_DISABLE_NUMBA`` is set to a truthy value.  Both modules
stay importable so tests and benchmarks can compare them directly.
"""
import os

from . import _numpy

_disabled = os.environ.get("DCTPATCH_DISABLE_NUMBA", "").lower() not in ("", "0", "false", "no")

numba_kernels = None
if not _disabled:
    try:
        from . import _numba as numba_kernels
    except ImportError:  # pragma: no cover - numba missing
        numba_kernels = None

numpy_kernels = _numpy
active = numba_kernels if numba_kernels is not None else numpy_kernels
BACKEND = "numba" if active is numba_kernels else "numpy"

matmul = active.matmul
matvec = active.matvec
dct_direct = active.dct_direct
separable_batch = active.separable_batch
conv2d_forward = active.conv2d_forward
conv2d_backward = active.conv2d_backward
maxpool2x2_forward = active.maxpool2x2_forward
maxpool2x2_backward = active.maxpool2x2_backward

__all__ = [
    "BACKEND",
    "matmul",
    "matvec",
    "dct_direct",
    "separable_batch",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool2x2_forward",
    "maxpool2x2_backward",
]
