"""Backend switch for the compiled kernels.

Set ``GRIDSHED_DISABLE_NUMBA=1`` before importing :mod:`gridshed` to force the
pure-numpy code paths. When numba is not importable the numpy paths are used
regardless of the flag.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("GRIDSHED_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)
