"""Switch between numba-compiled kernels and their pure-numpy twins.

Set ``SSRKIT_DISABLE_NUMBA=1`` to force the numpy path (useful for debugging
and for machines without numba).  ``SSRKIT_WORKERS`` caps the numba thread
pool.
"""
from __future__ import annotations

import os
import warnings

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

HAVE_NUMBA = numba is not None


def numba_enabled() -> bool:
    """True when compiled kernels should be used (read at call time)."""
    flag = os.environ.get("SSRKIT_DISABLE_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def configure_workers() -> int:
    """Apply ``SSRKIT_WORKERS`` to numba's thread pool; returns the count used."""
    raw = os.environ.get("SSRKIT_WORKERS", "").strip()
    if not raw:
        return numba.config.NUMBA_NUM_THREADS if HAVE_NUMBA else 1
    n = max(1, int(raw))
    if HAVE_NUMBA:
        n = min(n, numba.config.NUMBA_NUM_THREADS)
        with warnings.catch_warnings():
            # starting the pool probes optional threading layers
            warnings.simplefilter("ignore")
            numba.set_num_threads(n)
    return n
