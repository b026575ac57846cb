"""Kernel backend selection.

Hot per-pixel loops (distribution-volume construction, modal estimators,
per-pixel cross-entropy, window clustering) exist twice: numba @njit
kernels and pure-numpy fallbacks.  The active backend is chosen at import
time from the DISPMODAL_BACKEND environment variable ("numba" or "numpy",
default numba when importable) and can be switched at runtime with
set_backend(), which the tests and the backend benchmark rely on.
"""

import os

_ENV_VAR = "DISPMODAL_BACKEND"

try:
    import numba as _numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - environment without numba
    _numba = None
    HAS_NUMBA = False

_requested = os.environ.get(_ENV_VAR, "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {_requested!r}")
if _requested == "numba" and not HAS_NUMBA:
    raise ImportError(f"{_ENV_VAR}=numba but numba is not importable")

_active = "numpy" if _requested == "numpy" or not HAS_NUMBA else "numba"


def get_backend() -> str:
    """Name of the active kernel backend, "numba" or "numpy"."""
    return _active


def set_backend(name: str) -> str:
    """Switch the kernel backend at runtime; returns the previous name."""
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    previous = _active
    _active = name
    return previous


def using_numba() -> bool:
    return _active == "numba"


def set_threads(n: int) -> int:
    """Configure the worker-thread count for parallel kernels.

    Requests beyond the hardware pool are clamped (oversubscribing a small
    machine is strictly slower).  Returns the effective thread count.
    The numpy backend is single-threaded apart from BLAS internals; the
    setting is remembered only for reporting.
    """
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if not HAS_NUMBA:
        return 1
    effective = min(n, _numba.config.NUMBA_NUM_THREADS)
    _numba.set_num_threads(effective)
    return effective


def get_threads() -> int:
    if not HAS_NUMBA:
        return 1
    return _numba.get_num_threads()
