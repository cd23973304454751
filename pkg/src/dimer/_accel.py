"""Numba switch.

Set ``DIMER_DISABLE_NUMBA=1`` to run the pure-numpy kernels. If numba cannot be
imported the numpy path is used regardless.
"""

import os

_flag = os.environ.get("DIMER_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = _flag not in ("1", "true", "yes", "on")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if USE_NUMBA:
    njit = numba.njit
else:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

BACKEND = "numba" if USE_NUMBA else "numpy"
