"""Kernel backend selection.

Imports the compiled extension when available, otherwise the numpy fallback.
SADA_PURE_PYTHON=1 forces the fallback. Both backends are bit-identical; the
compiled one only buys speed.
"""

from __future__ import annotations

import os

from . import _numpy_impl

if os.environ.get("SADA_PURE_PYTHON") == "1":
    _impl = _numpy_impl
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _numpy_impl

BACKEND: str = _impl.BACKEND
uniform_block = _impl.uniform_block
rademacher_block = _impl.rademacher_block
apply_shift = _impl.apply_shift
