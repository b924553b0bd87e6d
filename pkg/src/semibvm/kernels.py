"""Backend selection for the sampler's inner loop.

The compiled extension ``semibvm._ess`` is used when it was built; set
``SEMIBVM_PURE_PYTHON=1`` to force the pure-Python kernel.
"""
import os

from . import _ess_py

BINOMIAL = _ess_py.BINOMIAL
DENSITY = _ess_py.DENSITY

try:
    if os.environ.get("SEMIBVM_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernel requested")
    from . import _ess as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _ess_py
    BACKEND = "python"

ess_block = _impl.ess_block
loglik = _impl.loglik


def get_backend(name: str):
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _ess_py
    from . import _ess

    return _ess
