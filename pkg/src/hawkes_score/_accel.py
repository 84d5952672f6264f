"""Optional numba acceleration.

Hot loops are written once as plain numpy/Python functions and compiled with
``numba.njit`` when available. Set ``HAWKES_SCORE_DISABLE_NUMBA=1`` to run the
uncompiled code (useful for debugging and for the equivalence benchmark).
"""

import os

DISABLE_ENV = "HAWKES_SCORE_DISABLE_NUMBA"

_disabled = os.environ.get(DISABLE_ENV, "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError("numba disabled by " + DISABLE_ENV)
    import numba as _nb

    HAS_NUMBA = True
except ImportError:
    _nb = None
    HAS_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise an identity decorator.

    The compiled dispatcher keeps the original function on ``.py_func``; the
    fallback sets the same attribute so callers can always reach the Python
    version.
    """
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        return njit()(args[0])

    def wrap(func):
        if HAS_NUMBA:
            kwargs.setdefault("cache", True)
            kwargs.setdefault("nogil", True)
            return _nb.njit(*args, **kwargs)(func)
        func.py_func = func
        return func

    return wrap
