"""Hot loops, compiled when possible.

The Cython extension is used when it was built; otherwise, or when
``QKD4_PURE_PYTHON=1`` is set, the pure Python reference is used.
"""

import os

from . import _pykernels

BACKEND = "python"
sample_rounds = _pykernels.sample_rounds

if os.environ.get("QKD4_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        sample_rounds = _ckernels.sample_rounds

__all__ = ["BACKEND", "sample_rounds"]
