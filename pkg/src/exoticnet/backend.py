"""Kernel backend selection: numba-jitted loops or pure numpy.

The hot numeric kernels in :mod:`exoticnet.kernels` exist in two
implementations that follow the same arithmetic, element for element:

* ``"numba"`` -- ``@njit`` scalar loops, compiled on first use (cached).
* ``"numpy"`` -- vectorized numpy with the identical operation order.

The default is numba when importable, numpy otherwise.  Override with the
environment variable ``EXOTICNET_BACKEND=numpy|numba`` (read at import) or
at runtime with :func:`set_backend`.  ``python -m exoticnet.bench`` times
one against the other.
"""

from __future__ import annotations

import os

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

_BACKENDS = ("numba", "numpy")


def _initial_backend() -> str:
    env = os.environ.get("EXOTICNET_BACKEND", "").strip().lower()
    if env:
        if env not in _BACKENDS:
            raise ValueError(
                f"EXOTICNET_BACKEND={env!r} is not one of {_BACKENDS}"
            )
        if env == "numba" and not HAS_NUMBA:
            raise ImportError(
                "EXOTICNET_BACKEND=numba requested but numba is not installed"
            )
        return env
    return "numba" if HAS_NUMBA else "numpy"


_active = _initial_backend()


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    """Select the kernel implementation for subsequent calls."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {_BACKENDS}")
    if name == "numba" and not HAS_NUMBA:
        raise ImportError("numba backend requested but numba is not installed")
    _active = name
