"""Deterministic fast-oscillation controls and their Lie-bracket limits.

With u_n = cos(n^2 t)/n and v_n = sin(n^2 t)/n,

    x' = U(x) u_n' + V(x) v_n'     tends to   x' = [U, V](x) / 2
    x' = U(x) + V(x) v_n'          follows    x' = U(x) + [U, V](x) / (2n)  to lowest order.

Everything is integrated with classical RK4 on a uniform grid that resolves
the fast scale with at least ``RESOLUTION * n^2`` steps per unit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import backend, njit
from .compile import field_set
from .vfield import DimensionError, VectorField, lie_bracket

RESOLUTION = 50

AREA, DRIFT, AUTONOMOUS = 0, 1, 2


class ResolutionError(ValueError):
    pass


def _make(fU, fV, jit):
    """RK4 driver for x' = su(t) U + sv(t) V + cw W, where fV fills [V, W]."""
    wrap = njit if jit else (lambda f: f)

    @wrap
    def rhs(mode, n2, nf, cu, cv, cw, t, x, a, G, out):
        if mode == AREA:
            su, sv = -nf * math.sin(n2 * t), nf * math.cos(n2 * t)
        elif mode == DRIFT:
            su, sv = 1.0, nf * math.cos(n2 * t)
        else:
            su, sv = cu, cv
        fU(x, a)
        fV(x, G)
        for i in range(x.shape[0]):
            out[i] = su * a[i] + sv * G[i, 0] + cw * G[i, 1]

    @wrap
    def run(mode, n2, nf, cu, cv, cw, x0, h, steps, traj):
        n = x0.shape[0]
        x = x0.copy()
        a = np.empty(n)
        G = np.empty((n, 2))
        k1, k2, k3, k4, y = np.empty(n), np.empty(n), np.empty(n), np.empty(n), np.empty(n)
        traj[0] = x
        for s in range(steps):
            t = s * h
            rhs(mode, n2, nf, cu, cv, cw, t, x, a, G, k1)
            for i in range(n):
                y[i] = x[i] + 0.5 * h * k1[i]
            rhs(mode, n2, nf, cu, cv, cw, t + 0.5 * h, y, a, G, k2)
            for i in range(n):
                y[i] = x[i] + 0.5 * h * k2[i]
            rhs(mode, n2, nf, cu, cv, cw, t + 0.5 * h, y, a, G, k3)
            for i in range(n):
                y[i] = x[i] + h * k3[i]
            rhs(mode, n2, nf, cu, cv, cw, t + h, y, a, G, k4)
            for i in range(n):
                x[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
            traj[s + 1] = x
        return x

    return run


_loops: dict = {}


def _driver(U: VectorField, V: VectorField):
    W = lie_bracket(U, V)
    fs = field_set(U, U, (V, W))
    name = backend()
    key = (id(fs), name)
    if key not in _loops:
        if name == "numba":
            _loops[key] = _make(fs.jit["f0"], fs.jit["g"], True)
        else:
            _loops[key] = _make(fs.py["f0"], fs.py["g"], False)
    return _loops[key]


def required_substeps(n_freq: int) -> int:
    return RESOLUTION * int(n_freq) ** 2


def _steps(T: float, n_freq: int, substeps: int | None) -> int:
    need = required_substeps(n_freq)
    if substeps is None:
        substeps = need
    if substeps < need:
        raise ResolutionError(f"{substeps} steps per unit time do not resolve n={n_freq}; need >= {need}")
    return max(1, math.ceil(substeps * T))


def _solve(U, V, mode, n_freq, T, x0, substeps, cu=0.0, cv=0.0, cw=0.0) -> np.ndarray:
    if U.n != V.n:
        raise DimensionError("U and V must share a dimension")
    if not T > 0:
        raise ValueError("T must be positive")
    x0 = np.zeros(U.n) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (U.n,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({U.n},)")
    steps = _steps(T, n_freq, substeps)
    traj = np.empty((steps + 1, U.n))
    nf = float(n_freq)
    _driver(U, V)(mode, nf * nf, nf, float(cu), float(cv), float(cw), x0, T / steps, steps, traj)
    return traj


def oscillatory_control(U: VectorField, V: VectorField, n_freq: int, T: float, substeps: int | None = None,
                        x0=None, trajectory: bool = False) -> np.ndarray:
    """Endpoint of x' = U u_n' + V v_n' (or the whole RK4 trajectory)."""
    traj = _solve(U, V, AREA, n_freq, T, x0, substeps)
    return traj if trajectory else traj[-1]


def drift_perturbation_control(U: VectorField, V: VectorField, n_freq: int, T: float,
                               substeps: int | None = None, x0=None, trajectory: bool = False) -> np.ndarray:
    """Endpoint of x' = U + V v_n'."""
    traj = _solve(U, V, DRIFT, n_freq, T, x0, substeps)
    return traj if trajectory else traj[-1]


def bracket_flow(U: VectorField, V: VectorField, T: float, x0=None, scale: float = 0.5, with_u: float = 0.0,
                 substeps: int | None = None, n_freq: int = 1, trajectory: bool = False) -> np.ndarray:
    """x' = with_u U + scale [U, V] on the same RK4 grid rule."""
    traj = _solve(U, V, AUTONOMOUS, n_freq, T, x0, substeps, cu=with_u, cw=scale)
    return traj if trajectory else traj[-1]


def effective_drift_flow(U: VectorField, V: VectorField, n_freq: int, T: float, x0=None,
                         substeps: int | None = None, trajectory: bool = False) -> np.ndarray:
    """The claimed lowest-order dynamics x' = U + [U, V]/(2n)."""
    return bracket_flow(U, V, T, x0, scale=0.5 / n_freq, with_u=1.0, substeps=substeps, n_freq=n_freq,
                        trajectory=trajectory)


@dataclass(frozen=True)
class ControlRow:
    n: int
    endpoint: tuple[float, ...]
    reference: tuple[float, ...]
    error: float  # endpoint distance to the reference
    sup_deviation: float  # sup over the grid of |x(t) - reference(t)|
    rms_deviation: float  # root mean square over [0, T] of the same distance


def _row(n, x, ref) -> ControlRow:
    dev = np.sqrt(((x - ref) ** 2).sum(axis=1))
    # trapezoidal mean of dev^2 on the uniform grid
    ms = (np.sum(dev[1:-1] ** 2) + 0.5 * (dev[0] ** 2 + dev[-1] ** 2)) / (dev.size - 1)
    return ControlRow(int(n), tuple(map(float, x[-1])), tuple(map(float, ref[-1])), float(dev[-1]),
                      float(dev.max()), float(math.sqrt(ms)))


def constant_fields_endpoint(U: VectorField, V: VectorField, n_freq: int, T: float, x0=None) -> np.ndarray:
    """Closed form of the oscillatory control when U and V are constant."""
    if not all(c.is_const for c in U.components + V.components):
        raise ValueError("closed form needs constant fields")
    x0 = np.zeros(U.n) if x0 is None else np.asarray(x0, dtype=float)
    u = np.array([c.value for c in U.components])
    v = np.array([c.value for c in V.components])
    n2 = n_freq * n_freq
    return x0 + u * (math.cos(n2 * T) - 1.0) / n_freq + v * math.sin(n2 * T) / n_freq


def area_sweep(U: VectorField, V: VectorField, ns, T: float = 1.0, x0=None) -> list[ControlRow]:
    """Endpoint error of the oscillatory control against the flow of [U,V]/2."""
    rows = []
    for n in ns:
        x = oscillatory_control(U, V, n, T, x0=x0, trajectory=True)
        ref = bracket_flow(U, V, T, x0, n_freq=n, trajectory=True)
        rows.append(_row(n, x, ref))
    return rows


def drift_sweep(U: VectorField, V: VectorField, ns, T: float = 1.0, x0=None) -> list[ControlRow]:
    """Deviation of the drift-perturbed system from the unperturbed flow of U."""
    rows = []
    for n in ns:
        x = drift_perturbation_control(U, V, n, T, x0=x0, trajectory=True)
        ref = bracket_flow(U, V, T, x0, scale=0.0, with_u=1.0, n_freq=n, trajectory=True)
        rows.append(_row(n, x, ref))
    return rows
