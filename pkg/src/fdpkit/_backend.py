"""Select the compiled kernels when importable, else the pure-Python twins.

Set ``FDPKIT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pycore

if os.environ.get("FDPKIT_PURE_PYTHON", "") not in ("", "0"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:
        _core = None

if _core is not None:
    BACKEND = "cython"
    fdp_f64 = _core.fdp_f64
    fma_chain_f64 = _core.fma_chain_f64
else:
    BACKEND = "python"
    fdp_f64 = _pycore.fdp_f64
    fma_chain_f64 = _pycore.fma_chain_f64
