"""Numba/numpy backend switch.

Hot kernels exist in two forms: a scalar-loop version compiled with numba and
a vectorized (or plain-python) fallback. The default backend is numba when the
import succeeds; set the environment variable ``BOLTZNC_NUMBA=0`` before
importing the package to force the fallback everywhere. Individual entry
points also accept ``backend="numba"|"numpy"`` to override per call, which is
what the benchmark uses to time both paths in one process.
"""

import os


def _env_wants_numba() -> bool:
    return os.environ.get("BOLTZNC_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


NUMBA_AVAILABLE = False
if _env_wants_numba():
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:
        NUMBA_AVAILABLE = False

if NUMBA_AVAILABLE:
    from numba import njit
else:
    def njit(*args, **kwargs):
        # signature-compatible no-op decorator
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


def default_backend() -> str:
    return "numba" if NUMBA_AVAILABLE else "numpy"


def resolve_backend(backend: str | None) -> str:
    """Map an optional override to a concrete backend name."""
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}, expected 'numba' or 'numpy'")
    if backend == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    return backend
