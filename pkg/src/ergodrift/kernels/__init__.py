"""Kernel backend selection.

The compiled extension is preferred when importable; set
ERGODRIFT_PURE_PYTHON=1 to force the pure-Python mirrors.  The active
backend is exposed as BACKEND and recorded in CLI reports.  Both
backends perform identical IEEE operations for chain_logscale,
backward_increments and torus_walk_positions; the pure-Python Fourier
accumulator sums in chunks, so its coefficient sums may differ from the
compiled ones at the rounding level.
"""

from __future__ import annotations

import os

from . import _purepy

if os.environ.get("ERGODRIFT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _purepy
else:
    try:
        from . import _ext as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _purepy

BACKEND: str = _impl.BACKEND_NAME

chain_logscale = _impl.chain_logscale
backward_increments = _impl.backward_increments
torus_walk_positions = _impl.torus_walk_positions
torus_walk_fourier = _impl.torus_walk_fourier

__all__ = [
    "BACKEND",
    "chain_logscale",
    "backward_increments",
    "torus_walk_positions",
    "torus_walk_fourier",
]
