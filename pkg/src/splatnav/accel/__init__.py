"""Backend dispatch for the hot kernels.

The jitted backend is used when numba imports cleanly; set SPLATNAV_NUMBA=0
to force the pure-numpy fallback. Selection happens once at import time.
"""

import os

from . import numpy_impl

try:
    from . import numba_impl
except ImportError:  # pragma: no cover - exercised only without numba
    numba_impl = None


def _select():
    flag = os.environ.get("SPLATNAV_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "off", "no") or numba_impl is None:
        return numpy_impl, "numpy"
    return numba_impl, "numba"


active, BACKEND = _select()


def get_backend(name):
    """Fetch a backend module by name ("numba" may be None if unavailable)."""
    if name == "numpy":
        return numpy_impl
    if name == "numba":
        return numba_impl
    raise ValueError(f"unknown kernel backend {name!r}")
