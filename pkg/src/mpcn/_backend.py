"""Select the compiled core when available, else the pure-Python kernels."""
import os

from . import _pycore

_forced = os.environ.get("MPCN_BACKEND", "").lower()

try:
    if _forced == "python":
        raise ImportError("python backend forced")
    from . import _core as compiled
except ImportError:
    compiled = None

default = compiled if compiled is not None else _pycore
NAME = "cython" if compiled is not None else "python"


def get(name=None):
    """Return the kernel module for ``name`` in {None, 'cython', 'python'}."""
    if name is None:
        return default
    if name == "python":
        return _pycore
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled core not built; run `pip install -e .`")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
