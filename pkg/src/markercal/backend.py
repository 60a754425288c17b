"""Selects the chain-evaluation kernel at import time.

The compiled Cython extension is preferred; the NumPy implementation is a
drop-in fallback.  Set MARKERCAL_PURE_PYTHON=1 to force the fallback (used
by the benchmark and the backend-parity tests).
"""

from __future__ import annotations

import os

from . import _core_py

if os.environ.get("MARKERCAL_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _core_py
    COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        _impl = _core_py
        COMPILED = False

chain_points = _impl.chain_points
chain_jacobian = _impl.chain_jacobian


def backend_name() -> str:
    return "compiled" if COMPILED else "pure-python"
