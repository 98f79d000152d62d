"""Switch between numba-compiled kernels and the pure-numpy fallback.

Set ``TWISTDN_DISABLE_JIT=1`` before import to force the numpy path. The
fallback is also used when numba cannot be imported.
"""

import os
import warnings

_FALSY = {"", "0", "false", "no", "off"}


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_JIT = HAVE_NUMBA and not _env_flag("TWISTDN_DISABLE_JIT")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        from numba import njit as _njit

        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def set_num_threads(n):
    """Best-effort thread count for numba's parallel backend."""
    if HAVE_NUMBA and n:
        import numba as nb

        with warnings.catch_warnings():
            # an outdated TBB only disables that threading layer
            warnings.simplefilter("ignore", nb.NumbaWarning)
            nb.set_num_threads(max(1, min(int(n), nb.config.NUMBA_NUM_THREADS)))
