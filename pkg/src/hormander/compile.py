"""Turn symbolic vector fields into straight-line evaluation functions.

Each generated function has the signature ``f(x, out)`` and writes into a
preallocated buffer.  The body only indexes the leading axes, so the same code
evaluates one point (``x.shape == (n,)``, inside numba) or a batch of paths
(``x.shape == (n, P)``, under numpy, trailing path axis everywhere).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as E
from ._accel import njit
from .vfield import VectorField


def _function_source(name: str, targets: list[tuple[str, E.Expr]]) -> str:
    lines = [f"def {name}(x, out):"]
    lines += E.emit_assignments(targets, var_expr=lambda i: f"x[{i}]")
    lines.append("    return")
    return "\n".join(lines)


def _vector_targets(f: VectorField, prefix: str = "") -> list[tuple[str, E.Expr]]:
    return [(f"out[{prefix}{i}]", c) for i, c in enumerate(f.components)]


def _jacobian_targets(f: VectorField, prefix: str = "") -> list[tuple[str, E.Expr]]:
    return [(f"out[{prefix}{i}, {j}]", d) for i, row in enumerate(f.jacobian) for j, d in enumerate(row)]


@dataclass(eq=False)
class FieldSet:
    """Evaluation functions for one SDE plus optional extra fields.

    ``f0/df0`` drift and its Jacobian, ``f0i/df0i`` the Ito-corrected drift,
    ``g`` the n x m diffusion matrix, ``dg`` the m stacked Jacobians of the
    diffusion columns and ``ex`` the q x n matrix of extra fields.
    """

    n: int
    m: int
    q: int
    source: str
    py: dict[str, Callable] = field(repr=False)
    # affine drift and constant diffusions: the step maps are affine in the
    # increments with state-independent derivatives
    affine: bool = False
    _jit: dict[str, Callable] | None = field(default=None, repr=False)

    NAMES = ("f0", "df0", "f0i", "df0i", "g", "dg", "ex")

    @property
    def jit(self) -> dict[str, Callable]:
        if self._jit is None:
            self._jit = {k: njit(self.py[k]) for k in self.NAMES}
        return self._jit


_cache: dict[tuple, FieldSet] = {}


def field_set(drift: VectorField, ito_drift: VectorField, diffusions: Sequence[VectorField],
              extra: Sequence[VectorField] = ()) -> FieldSet:
    key = (drift.components, ito_drift.components, tuple(v.components for v in diffusions),
           tuple(v.components for v in extra))
    fs = _cache.get(key)
    if fs is not None:
        return fs
    n, m, q = drift.n, len(diffusions), len(extra)
    g_targets = [(f"out[{i}, {c}]", v.components[i]) for c, v in enumerate(diffusions) for i in range(n)]
    dg_targets = [t for c, v in enumerate(diffusions) for t in _jacobian_targets(v, f"{c}, ")]
    ex_targets = [t for r, v in enumerate(extra) for t in _vector_targets(v, f"{r}, ")]
    parts = [
        _function_source("f0", _vector_targets(drift)),
        _function_source("df0", _jacobian_targets(drift)),
        _function_source("f0i", _vector_targets(ito_drift)),
        _function_source("df0i", _jacobian_targets(ito_drift)),
        _function_source("g", g_targets),
        _function_source("dg", dg_targets),
        _function_source("ex", ex_targets),
    ]
    source = "\n\n".join(parts) + "\n"
    ns: dict = {"np": np}
    exec(compile(source, f"<fieldset n={n} m={m} q={q}>", "exec"), ns)
    affine = all(d.is_const for row in drift.jacobian for d in row) and all(
        c.is_const for v in diffusions for c in v.components)
    fs = FieldSet(n, m, q, source, {k: ns[k] for k in FieldSet.NAMES}, affine=affine)
    _cache[key] = fs
    return fs


def scalar_function(g: E.Expr, n: int) -> Callable:
    """Vectorized evaluator for a scalar expression over x with shape (n, ...)."""
    src = _function_source("h", [("out[0]", g)])
    ns: dict = {"np": np}
    exec(src, ns)
    h = ns["h"]

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        out = np.empty((1,) + x.shape[1:])
        h(x, out)
        return out[0]

    return evaluate
