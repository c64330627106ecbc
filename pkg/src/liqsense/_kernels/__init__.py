"""Hot-loop kernels with backend selection at import time.

Two complete implementations exist: compiled Cython loops and pure
numpy.  The default picks the faster one per kernel (measured in
benchmarks/bench_kernels.py): batched convolution and pooling go
through numpy's im2col + BLAS matmul, which beats straight C loops at
these sizes, while connected-component labelling uses the compiled
flood fill, where interpreter overhead dominates the numpy fallback.

Set ``LIQSENSE_KERNELS=c`` or ``=py`` to force one implementation
everywhere; forcing ``c`` raises if the extension is not built.
"""

import os

from . import pykernels as _py

try:
    from . import _ckernels as _c
except ImportError:
    _c = None

_choice = os.environ.get("LIQSENSE_KERNELS", "").strip().lower()
if _choice in ("py", "python"):
    _conv, _label = _py, _py
    BACKEND = "python"
elif _choice in ("c", "cython"):
    if _c is None:
        raise ImportError("LIQSENSE_KERNELS=c but the compiled extension is not built")
    _conv, _label = _c, _c
    BACKEND = "cython"
elif _choice == "":
    _conv = _py
    _label = _c if _c is not None else _py
    BACKEND = "mixed" if _c is not None else "python"
else:
    raise ImportError(f"LIQSENSE_KERNELS must be 'c' or 'py', got {_choice!r}")

conv2d_forward = _conv.conv2d_forward
conv2d_backward = _conv.conv2d_backward
maxpool2_forward = _conv.maxpool2_forward
maxpool2_backward = _conv.maxpool2_backward
label_components = _label.label_components

__all__ = [
    "BACKEND",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool2_forward",
    "maxpool2_backward",
    "label_components",
]
