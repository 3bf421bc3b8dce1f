"""Numba acceleration switch.

Hot kernels are plain loop-over-numpy-array functions decorated with ``jit``
from this module.  By default they are compiled with ``numba.njit(cache=True)``.
Setting the environment variable ``NUCLAB_DISABLE_NUMBA=1`` (or numba's own
``NUMBA_DISABLE_JIT=1``) selects the pure numpy/Python fallback: the same
functions, uncompiled.  Kernels draw no random numbers themselves -- callers
pass pre-generated arrays -- so both paths see identical inputs.

``py_func(kernel)`` returns the uncompiled function either way; the benchmark
script uses it to time both paths side by side.
"""

import os


def _env_disabled() -> bool:
    for var in ("NUCLAB_DISABLE_NUMBA", "NUMBA_DISABLE_JIT"):
        if os.environ.get(var, "").strip().lower() not in ("", "0", "false"):
            return True
    return False


NUMBA_ENABLED = not _env_disabled()

if NUMBA_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def jit(func):
        return numba.njit(cache=True)(func)
else:
    def jit(func):
        return func


def py_func(func):
    """The uncompiled version of a ``jit``-ed kernel (the fallback path)."""
    return getattr(func, "py_func", func)
