"""Backend selection for the hot kernels.

Numba is used when it imports cleanly and ``ULTRASPEC_DISABLE_NUMBA`` is not
set to a truthy value.  Every numba kernel has a pure-numpy twin that performs
the same floating point operations in the same order, so switching backends
does not change results.
"""

import os

_FLAG = os.environ.get("ULTRASPEC_DISABLE_NUMBA", "").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with numba (cached) when available, else return it unchanged."""
    if not HAVE_NUMBA:
        return fn
    import numba

    return numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
