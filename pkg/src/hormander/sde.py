"""Stratonovich SDEs with co-evolved Jacobian and inverse-Jacobian flows.

    dX = V_0(X) dt + sum_i V_i(X) o dW_i

The state, J_{0,t} and J_{0,t}^{-1} are stepped jointly.  Heun applied to the
variational system coincides with the exact derivative of the Heun map, so the
stored Jacobians are the true derivatives of the discrete solution map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import expr as E
from . import kernels
from .compile import FieldSet, field_set
from .rng import normals
from .vfield import DimensionError, VectorField, eval_field

SCHEMES = {"stratonovich-heun": kernels.HEUN, "ito-euler-on-corrected-drift": kernels.ITO_EULER}


class SimulationError(ArithmeticError):
    """A path produced a nonfinite state; ``step`` is the offending step index."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"nonfinite state at step {step}")


def _scheme_code(scheme: str) -> int:
    try:
        return SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}") from None


@dataclass(frozen=True, eq=False)
class SdeSystem:
    drift: VectorField
    diffusions: tuple[VectorField, ...]
    name: str = ""

    def __post_init__(self):
        diff = tuple(self.diffusions)
        if not diff:
            raise ValueError("need at least one diffusion field")
        for v in diff:
            if v.n != self.drift.n:
                raise DimensionError(f"diffusion field has dimension {v.n}, drift has {self.drift.n}")
        object.__setattr__(self, "diffusions", diff)

    @classmethod
    def parse(cls, drift: str, diffusions: Sequence[str], names: Sequence[str] | None = None, name: str = ""):
        return cls(VectorField.parse(drift, names, "V0"),
                   tuple(VectorField.parse(d, names, f"V{i + 1}") for i, d in enumerate(diffusions)), name)

    @property
    def n(self) -> int:
        return self.drift.n

    @property
    def m(self) -> int:
        return len(self.diffusions)

    @property
    def fields(self) -> tuple[VectorField, ...]:
        return (self.drift,) + self.diffusions

    @cached_property
    def ito_drift(self) -> VectorField:
        """V_0 + 1/2 sum_i DV_i V_i, kept symbolic."""
        comps = []
        for i in range(self.n):
            terms = [self.drift.components[i]]
            for v in self.diffusions:
                for j in range(self.n):
                    terms.append(E.mul(E.const(0.5), v.jacobian[i][j], v.components[j]))
            comps.append(E.add(*terms))
        return VectorField(tuple(comps), "V0~")

    def field_set(self, extra: Sequence[VectorField] = ()) -> FieldSet:
        return field_set(self.drift, self.ito_drift, self.diffusions, tuple(extra))

    def diffusion_matrix(self, x) -> np.ndarray:
        return np.column_stack([eval_field(v, x) for v in self.diffusions])


@dataclass(frozen=True)
class GridSpec:
    T: float
    N: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError("T must be positive and finite")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")

    @cached_property
    def dt(self) -> np.ndarray:
        return uniform_steps(self.T, self.N)


def uniform_steps(T: float, N: int) -> np.ndarray:
    dt = np.full(N, T / N)
    if N > 1:
        dt[-1] = T - math.fsum(dt[:-1])  # last step absorbs rounding
    else:
        dt[0] = T
    return dt


@dataclass(frozen=True, eq=False)
class IncrementGrid:
    """Steps ``dt`` (N,) and increments ``dw`` (N, m)."""

    dt: np.ndarray
    dw: np.ndarray

    def __post_init__(self):
        dt = np.asarray(self.dt, dtype=float)
        dw = np.asarray(self.dw, dtype=float)
        if dw.ndim == 1:
            dw = dw[:, None]
        if dt.ndim != 1 or dt.size == 0 or np.any(dt <= 0):
            raise ValueError("steps must be a non-empty vector of positive numbers")
        if dw.shape[0] != dt.size:
            raise ValueError(f"{dw.shape[0]} increments for {dt.size} steps")
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "dw", dw)

    @property
    def N(self) -> int:
        return self.dt.size

    @property
    def m(self) -> int:
        return self.dw.shape[1]

    @property
    def T(self) -> float:
        return math.fsum(self.dt)

    @property
    def times(self) -> np.ndarray:
        t = np.concatenate([[0.0], np.cumsum(self.dt)])
        t[-1] = self.T
        return t

    def bumped(self, k: int, c: int, h: float) -> "IncrementGrid":
        dw = self.dw.copy()
        dw[k, c] += h
        return IncrementGrid(self.dt, dw)

    @classmethod
    def zeros(cls, spec: GridSpec, m: int) -> "IncrementGrid":
        return cls(spec.dt, np.zeros((spec.N, m)))


def sample_increments(spec: GridSpec, seed: int, path_index: int, m: int = 1) -> IncrementGrid:
    """Increments for one path; a pure function of (seed, path, step, component)."""
    z = normals(seed, [path_index], spec.N, m)[0]
    return IncrementGrid(spec.dt, z * np.sqrt(spec.dt)[:, None])


@dataclass(frozen=True, eq=False)
class FlowPath:
    xs: np.ndarray  # (N+1, n)
    Js: np.ndarray  # (N+1, n, n)
    Ys: np.ndarray  # (N+1, n, n) inverse flow
    grid: IncrementGrid
    system: SdeSystem
    scheme: str = "stratonovich-heun"

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def x_final(self) -> np.ndarray:
        return self.xs[-1]

    @cached_property
    def inverse_drift(self) -> np.ndarray:
        """||J J^-1 - I||_F at every grid point."""
        R = self.Js @ self.Ys - np.eye(self.system.n)
        return np.sqrt((R**2).sum(axis=(1, 2)))

    @property
    def max_inverse_drift(self) -> float:
        return float(self.inverse_drift.max())


def integrate(system: SdeSystem, x0, grid: IncrementGrid, scheme: str = "stratonovich-heun",
              backend: str | None = None) -> FlowPath:
    code = _scheme_code(scheme)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.n,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({system.n},)")
    if grid.m != system.m:
        raise DimensionError(f"grid carries {grid.m} noises, system has {system.m}")
    N, n = grid.N, system.n
    xs, Js, Ys = np.empty((N + 1, n)), np.empty((N + 1, n, n)), np.empty((N + 1, n, n))
    k = kernels.get(system.field_set(), backend)
    st = k["path"](x0, grid.dt, np.ascontiguousarray(grid.dw), code, xs, Js, Ys)
    if st:
        raise SimulationError(st - 1)
    return FlowPath(xs, Js, Ys, grid, system, scheme)


def malliavin_derivative_path(flow: FlowPath, s_index: int, j: int) -> np.ndarray:
    """D_s^j X_T = J_{0,T} J_{0,s}^{-1} V_j(X_s); zero for s = N.  ``j`` is 1-based."""
    N = flow.N
    if not 0 <= s_index <= N:
        raise IndexError(f"s_index {s_index} outside 0..{N}")
    if not 1 <= j <= flow.system.m:
        raise IndexError(f"noise index {j} outside 1..{flow.system.m}")
    if s_index == N:
        return np.zeros(flow.system.n)
    v = eval_field(flow.system.diffusions[j - 1], flow.xs[s_index])
    return flow.Js[N] @ (flow.Ys[s_index] @ v)


def bump_derivative(system: SdeSystem, x0, grid: IncrementGrid, s_index: int, j: int, bump: float,
                    scheme: str = "stratonovich-heun") -> np.ndarray:
    """Central difference of X_T in the increment (s_index, j).  The partial
    in an increment is the discrete Malliavin derivative on that step."""
    if bump <= 0:
        raise ValueError("bump must be positive")
    if not 0 <= s_index < grid.N:
        raise IndexError(f"s_index {s_index} outside 0..{grid.N - 1}")
    plus = integrate(system, x0, grid.bumped(s_index, j - 1, bump), scheme).x_final
    minus = integrate(system, x0, grid.bumped(s_index, j - 1, -bump), scheme).x_final
    return (plus - minus) / (2.0 * bump)


# ------------------------------------------------------------------ ensembles


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Per-path reductions from one parallel run; failed paths carry NaN."""

    system: SdeSystem
    x0: np.ndarray
    spec: GridSpec
    seed: int
    paths: np.ndarray
    scheme: str
    xT: np.ndarray  # (P, n)
    JT: np.ndarray  # (P, n, n)
    C: np.ndarray  # (P, n, n) reduced Malliavin matrix
    zsq: np.ndarray  # (P, E) sum_k int Z_{V_k}^2 for each eta
    zsup: np.ndarray  # (P, q) sup_t |<zeta, J^-1 F(x_t)>| for the extra fields
    xsup: np.ndarray  # (P,)
    drift: np.ndarray  # (P,) max_k ||J J^-1 - I||_F
    status: np.ndarray  # (P,) 0 ok, else failing step + 1
    etas: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == 0

    @property
    def exploded(self) -> int:
        return int(np.count_nonzero(~self.ok))

    @property
    def M(self) -> np.ndarray:
        return self.JT @ self.C @ np.swapaxes(self.JT, 1, 2)


def simulate_ensemble(system: SdeSystem, x0, spec: GridSpec, paths: int | Sequence[int], seed: int,
                      scheme: str = "stratonovich-heun", etas=None, extra: Sequence[VectorField] = (),
                      zeta=None, backend: str | None = None) -> Ensemble:
    code = _scheme_code(scheme)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.n,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({system.n},)")
    idx = np.arange(paths, dtype=np.int64) if np.isscalar(paths) else np.asarray(paths, dtype=np.int64)
    P, n = idx.size, system.n
    etas = np.zeros((0, n)) if etas is None else np.atleast_2d(np.asarray(etas, dtype=float))
    zeta = np.zeros(n) if zeta is None else np.asarray(zeta, dtype=float)
    extra = tuple(extra)
    q = len(extra)
    xT, JT = np.full((P, n), np.nan), np.full((P, n, n), np.nan)
    C = np.zeros((P, n, n))
    zsq = np.zeros((P, etas.shape[0]))
    zsup = np.zeros((P, q))
    xsup = np.zeros(P)
    drift = np.zeros(P)
    status = np.zeros(P, dtype=np.int64)
    k = kernels.get(system.field_set(extra), backend)
    k["ensemble"](x0, spec.dt, np.uint64(seed), idx, code, np.ascontiguousarray(etas), zeta, xT, JT, C, zsq,
                  zsup, xsup, drift, status)
    bad = status != 0
    for a in (C, zsq, zsup, xsup, drift):
        a[bad] = np.nan
    C = 0.5 * (C + np.swapaxes(C, 1, 2))
    return Ensemble(system, x0, spec, int(seed), idx, scheme, xT, JT, C, zsq, zsup, xsup, drift, status, etas)


def counterexample_containment(paths: int, spec: GridSpec, seed: int) -> float:
    """sup over paths and grid times of |x_t| for dx = -sin x dt + cos x o dW, x0 = 0."""
    from .scenarios import counterexample

    sc = counterexample()
    ens = simulate_ensemble(sc.system, sc.x0, spec, paths, seed)
    if ens.exploded:
        raise SimulationError(-1, f"{ens.exploded} paths exploded")
    return float(np.max(ens.xsup))


def jacobian_reintegrated(flow: FlowPath, k: int) -> np.ndarray:
    """J_{t_k, T} by re-running the stored increments from x_{t_k} with J = I."""
    sub = IncrementGrid(flow.grid.dt[k:], flow.grid.dw[k:])
    return integrate(flow.system, flow.xs[k], sub, flow.scheme).Js[-1]


def iter_flows(system: SdeSystem, x0, spec: GridSpec, paths: int | Sequence[int], seed: int,
               scheme: str = "stratonovich-heun", backend: str | None = None, batch: int = 4096):
    """Full flows for many paths; increments are drawn a batch at a time and
    match ``sample_increments`` path by path."""
    idx = np.arange(paths, dtype=np.int64) if np.isscalar(paths) else np.asarray(paths, dtype=np.int64)
    sq = np.sqrt(spec.dt)[None, :, None]
    for s in range(0, idx.size, batch):
        dws = normals(seed, idx[s:s + batch], spec.N, system.m) * sq
        for dw in dws:
            yield integrate(system, x0, IncrementGrid(spec.dt, dw), scheme, backend)
