"""Kernel backend selection.

The compiled extension is used when it imports; set ``TVSELECT_PURE_PYTHON=1``
to force the NumPy kernels.
"""

import os

from . import _pykernels

kernels = _pykernels
name = "python"

if os.environ.get("TVSELECT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _ckernels
        name = "cython"


def use(backend):
    """Switch the active backend (``"cython"`` or ``"python"``) at runtime."""
    global kernels, name
    if backend == "python":
        kernels, name = _pykernels, "python"
    elif backend == "cython":
        from . import _ckernels

        kernels, name = _ckernels, "cython"
    else:
        raise ValueError(f"unknown backend {backend!r}")
