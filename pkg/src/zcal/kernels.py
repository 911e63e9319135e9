"""Select the numeric kernel backend at import time.

The compiled Cython extension is preferred. Setting the environment variable
``ZCAL_PURE_PYTHON=1`` forces the numpy fallback, which is also used whenever
the extension was not built.
"""

import os

if os.environ.get("ZCAL_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = "cython" if _impl.__name__.endswith("_ckernels") else "python"

MARGIN = _impl.MARGIN
VARIANCE = _impl.VARIANCE
ENTROPY = _impl.ENTROPY

box_scores = _impl.box_scores
iou_matrix = _impl.iou_matrix
greedy_match = _impl.greedy_match
average_precision = _impl.average_precision

__all__ = [
    "BACKEND",
    "MARGIN",
    "VARIANCE",
    "ENTROPY",
    "box_scores",
    "iou_matrix",
    "greedy_match",
    "average_precision",
]
