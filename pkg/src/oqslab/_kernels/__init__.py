"""Hot numerical kernels.

The compiled ``_core`` extension is used when it was built; otherwise the
numpy/pure-Python ``_fallback`` module is used. Setting
``OQSLAB_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _fallback as fallback

compiled = None
if os.environ.get("OQSLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "python"

supermatrix = _impl.supermatrix
sample_chain = _impl.sample_chain
count_transitions = _impl.count_transitions

__all__ = ["BACKEND", "compiled", "fallback", "supermatrix", "sample_chain", "count_transitions"]
