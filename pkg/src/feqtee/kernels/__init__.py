"""Kernel dispatch: compiled Cython speedups when available, numpy fallback
otherwise. FEQTEE_PURE=1 forces the fallback."""

import os

from . import pure

if os.environ.get("FEQTEE_PURE"):
    _impl = pure
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
dtw_cyclic = _impl.dtw_cyclic
dtw_table = _impl.dtw_table
edge_weights = _impl.edge_weights

# winding numbers are cheap; only the pure version exists
winding_numbers = pure.winding_numbers
