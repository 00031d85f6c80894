"""Kernel selection.

The compiled extension is used when it imported cleanly; set
``RECAUDIT_PURE_PYTHON=1`` to force the pure-Python versions.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("RECAUDIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

levenshtein = _impl.levenshtein
normalized_distance = _impl.normalized_distance
nearest = _impl.nearest
pl_draw = _impl.pl_draw
prag_count = _impl.prag_count

__all__ = [
    "BACKEND",
    "levenshtein",
    "normalized_distance",
    "nearest",
    "pl_draw",
    "prag_count",
]
