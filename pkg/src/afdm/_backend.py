"""Select the compiled kernels when available, the pure-Python ones otherwise.

Set ``AFDM_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("AFDM_PURE_PYTHON"):
    kernels = _compiled
else:
    kernels = _kernels_py

BACKEND = kernels.BACKEND


def get_kernels(name: str | None = None):
    """Return a kernel module by backend name (``"cython"`` or ``"python"``)."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available; build the extension")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])
