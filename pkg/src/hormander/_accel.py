"""Backend selection for the hot kernels.

``HORMANDER_BACKEND=numpy`` forces the pure-numpy implementations;
``numba`` (the default when numba imports) uses the jitted loops.  The flag is
read at call time, so tests can flip it with ``monkeypatch.setenv``.
"""

from __future__ import annotations

import os

ENV_VAR = "HORMANDER_BACKEND"
BACKENDS = ("numba", "numpy")

# the bundled TBB is too old for numba; skip probing it
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def backend(override: str | None = None) -> str:
    name = (override or os.environ.get(ENV_VAR) or ("numba" if HAVE_NUMBA else "numpy")).lower()
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return name


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f


def set_threads(k: int | None) -> None:
    if HAVE_NUMBA and k:
        numba.set_num_threads(min(int(k), numba.config.NUMBA_NUM_THREADS))
