"""Kernel dispatch.  ``get(fs)`` returns the ``path`` / ``ensemble`` / ``ibp``
entry points for the active backend, built once per field set."""

from __future__ import annotations

from .._accel import backend
from ..compile import FieldSet

HEUN, ITO_EULER = 0, 1

_built: dict[tuple[int, str], dict] = {}


def get(fs: FieldSet, which: str | None = None) -> dict:
    name = backend(which)
    key = (id(fs), name)
    k = _built.get(key)
    if k is None:
        if name == "numba":
            from . import _numba as impl
        else:
            from . import _numpy as impl
        k = impl.build(fs)
        _built[key] = k
    return k
