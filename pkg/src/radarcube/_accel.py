"""Kernel backend selection.

Hot loops (beat synthesis, CFAR sliding windows, clutter-edge search, peak
grouping, steering correlation) exist twice: as ``@njit`` loop kernels and
as vectorised numpy functions.  The backend is chosen at import time from
the ``RADARCUBE_BACKEND`` environment variable (``numba`` or ``numpy``;
default ``numba`` when numba imports) and may be switched at runtime with
:func:`set_backend`, which is what the tests and the benchmark do.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

try:  # pragma: no cover - exercised implicitly
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_VALID = ("numba", "numpy")


def _initial_backend() -> str:
    requested = os.environ.get("RADARCUBE_BACKEND", "numba").strip().lower()
    if requested not in _VALID:
        requested = "numba"
    if requested == "numba" and not HAVE_NUMBA:
        return "numpy"
    return requested


_backend = _initial_backend()


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or a no-op decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` kernels for subsequent calls."""
    global _backend
    name = name.lower()
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}; expected one of {_VALID}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


def use_numba() -> bool:
    return _backend == "numba"


@contextmanager
def backend(name: str):
    """Temporarily switch backend inside a ``with`` block."""
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def resolve_threads(threads: int | None = None) -> int:
    """Thread count from the argument, else ``RADARCUBE_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("RADARCUBE_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def configure_threads(threads: int | None = None) -> int:
    """Resolve the thread count used for FFT workers.

    The numba kernels are serial (``nogil``) loops, so numba's own thread
    pool is left untouched; parallelism comes from the FFT stage.
    """
    return resolve_threads(threads)
