"""Backend selection for the hot loops.

The compiled extension is preferred; set ``MEMSTAB_BACKEND=python`` to force
the numpy fallback.
"""

import os

from memstab import _pykernels

try:
    from memstab import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def _select():
    wanted = os.environ.get("MEMSTAB_BACKEND", "").strip().lower()
    if wanted:
        if wanted not in BACKENDS:
            raise ImportError(f"MEMSTAB_BACKEND={wanted!r} is not available; have {sorted(BACKENDS)}")
        return wanted
    return "cython" if "cython" in BACKENDS else "python"


BACKEND = _select()
_impl = BACKENDS[BACKEND]

aberth_polish = _impl.aberth_polish
modal_rk4 = _impl.modal_rk4
memory_rk4 = _impl.memory_rk4


def get_backend(name):
    """Return the kernel module registered under ``name``."""
    return BACKENDS[name]
