"""JIT shim: numba njit by default, plain Python when MANIFOLDMC_NO_JIT is set.

Every hot kernel in this package is decorated with @njit imported from here.
Setting the environment variable MANIFOLDMC_NO_JIT to anything other than
"" or "0" before import replaces the decorator with a no-op, so the same
source runs as ordinary numpy code (useful for debugging and as a fallback
on platforms without a working numba).
"""

import os

JIT_DISABLED = os.environ.get("MANIFOLDMC_NO_JIT", "0") not in ("", "0")

if JIT_DISABLED:

    def njit(func=None, **kwargs):
        if func is None:
            return lambda f: f
        return func

else:
    from numba import njit as _numba_njit

    def njit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        if func is None:
            return lambda f: _numba_njit(**kwargs)(f)
        return _numba_njit(**kwargs)(func)
