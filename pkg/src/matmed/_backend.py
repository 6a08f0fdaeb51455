"""Kernel backend selection.

The hot numeric kernels in :mod:`matmed.kernels` exist in two variants: a
numba ``@njit`` version and a pure-numpy version.  The active variant is
chosen once at import time from the ``MATMED_BACKEND`` environment variable
(``"numba"`` or ``"numpy"``).  Unset, numba is used when importable.

The resolved backend is recorded in every run manifest; replays are
bit-identical only under the same backend.
"""

import os

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    HAVE_NUMBA = False

_ENV_VAR = "MATMED_BACKEND"


def resolve_backend(value: str | None = None) -> str:
    """Return "numba" or "numpy" from an explicit value or the environment."""
    if value is None:
        value = os.environ.get(_ENV_VAR, "")
    value = value.strip().lower()
    if value == "":
        return "numba" if HAVE_NUMBA else "numpy"
    if value not in ("numba", "numpy"):
        raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {value!r}")
    if value == "numba" and not HAVE_NUMBA:
        raise RuntimeError("MATMED_BACKEND=numba but numba is not importable")
    return value


BACKEND = resolve_backend()


def jit_compile(func):
    """Apply ``@njit(cache=True)``; requires numba."""
    return njit(cache=True)(func)
