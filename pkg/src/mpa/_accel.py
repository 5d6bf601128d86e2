"""Numba switch.

Hot kernels are written once in a numba-compatible subset of Python and
compiled with ``njit`` when numba is importable and ``MPA_DISABLE_NUMBA`` is
unset (or ``0``).  Otherwise every public array routine dispatches to the
vectorised pure-numpy implementation living next to the kernel.
"""

import os

_flag = os.environ.get("MPA_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised via env flag in CI
    _njit = None
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def max_workers() -> int:
    """Worker cap from ``MPA_THREADS`` (default 1)."""
    try:
        n = int(os.environ.get("MPA_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)
