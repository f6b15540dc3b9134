"""Optional numba acceleration.

Set ``LORSIM_DISABLE_NUMBA=1`` to force the pure-numpy code paths. When numba
is not importable the numpy paths are used automatically.
"""

import logging
import os

logger = logging.getLogger(__name__)

_DISABLED = os.environ.get("LORSIM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False
    logger.warning("numba not importable; falling back to numpy kernels")

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator.

    The compiled function is produced even when numba is disabled by the env
    flag only if numba is installed, so benchmarks can still compare both paths.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def wrap(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
