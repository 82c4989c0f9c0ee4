"""Numba switch.

Set ``RISK_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy path.
If numba is missing the numpy path is used automatically.
"""
import os

_flag = os.environ.get("RISK_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV
