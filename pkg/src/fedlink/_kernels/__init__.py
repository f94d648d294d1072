"""Kernel backend selection.

Imports the compiled extension when it is available and falls back to the
pure-numpy reference otherwise.  ``FEDLINK_PURE_PY=1`` in the environment
forces the fallback (used by the benchmark and the parity tests).
"""

import os

from . import _pyref

if os.environ.get("FEDLINK_PURE_PY", "") == "1":
    _impl = _pyref
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pyref

BACKEND = _impl.BACKEND
stochastic_levels = _impl.stochastic_levels
reconstruct = _impl.reconstruct
add_scaled = _impl.add_scaled
quant_contrib = _impl.quant_contrib
