"""Select the enumeration kernel at import time.

Set ``PERTCS_PURE_PYTHON=1`` to force the numpy fallback even when the
compiled extension is importable.
"""

import os

from . import _enum_py

if os.environ.get("PERTCS_PURE_PYTHON"):
    gram_extremes = _enum_py.gram_extremes
    BACKEND = "python"
else:
    try:
        from ._kernels import gram_extremes
        BACKEND = "cython"
    except ImportError:
        gram_extremes = _enum_py.gram_extremes
        BACKEND = "python"

__all__ = ["gram_extremes", "BACKEND"]
