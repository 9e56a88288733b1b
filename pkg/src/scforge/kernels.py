"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``SCFORGE_PURE_PYTHON=1`` to force the numpy implementations.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SCFORGE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"


def goursat_march(M, a, b, hu, hv):
    return _impl.goursat_march(M, a, b, hu, hv)


def cumquad4(f, h):
    return _impl.cumquad4(f, h)
