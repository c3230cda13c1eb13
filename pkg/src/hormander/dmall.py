"""Malliavin calculus on a finite grid of Gaussian increments.

A functional is an expression over the increment symbols dw_{k,c}
(step k = 1..N, noise c = 1..m) with dw_{k,c} ~ N(0, dt_k) independent.
The derivative is the partial in one increment, the Skorokhod integral is

    delta(F) = sum_{k,c} F_{k,c} dw_{k,c} - sum_{k,c} d_{k,c} F_{k,c} dt_k,

and polynomial functionals get exact expectations from Gaussian moments.
Variable index of dw_{k,c} is (k-1) m + (c-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from . import expr as E
from .compile import scalar_function
from .grammar import parse_expression
from .rng import normals

WICK_DEGREE_BUDGET = 12
NONFINITE_ABORT = 1e-3
EXACT_TOL = 1e-12


class GridMismatchError(ValueError):
    pass


class NonPolynomialError(ValueError):
    pass


class DegreeBudgetError(ValueError):
    pass


class NonfiniteSamplesError(ArithmeticError):
    pass


# ------------------------------------------------------------------ grid


@dataclass(frozen=True)
class Grid:
    dt: tuple[float, ...]
    m: int = 1

    def __post_init__(self):
        dt = tuple(float(t) for t in self.dt)
        if not dt or any(not (t > 0 and math.isfinite(t)) for t in dt):
            raise ValueError("steps must be positive and finite")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        object.__setattr__(self, "dt", dt)

    @property
    def N(self) -> int:
        return len(self.dt)

    @property
    def size(self) -> int:
        return self.N * self.m

    @property
    def T(self) -> float:
        return math.fsum(self.dt)

    def index(self, k: int, c: int = 1) -> int:
        if not (1 <= k <= self.N and 1 <= c <= self.m):
            raise IndexError(f"increment ({k}, {c}) outside the {self.N} x {self.m} grid")
        return (k - 1) * self.m + (c - 1)

    def step_of(self, v: int) -> int:
        """0-based step of variable index v."""
        return v // self.m

    def var_dt(self, v: int) -> float:
        return self.dt[v // self.m]

    def names(self) -> list[str]:
        if self.m == 1:
            return [f"w{k}" for k in range(1, self.N + 1)]
        return [f"w{k}_{c}" for k in range(1, self.N + 1) for c in range(1, self.m + 1)]

    def symbol(self, k: int, c: int = 1) -> "WienerFunctional":
        return WienerFunctional(E.var(self.index(k, c)), self)

    def symbols(self) -> list["WienerFunctional"]:
        return [WienerFunctional(E.var(v), self) for v in range(self.size)]

    def constant(self, value: float) -> "WienerFunctional":
        return WienerFunctional(E.const(value), self)

    def parse(self, text: str) -> "WienerFunctional":
        return WienerFunctional(parse_expression(text, self.names()), self)

    def sample(self, samples: int, seed: int, start: int = 0) -> np.ndarray:
        """Increments of shape (size, samples); sample s is path index start + s."""
        z = normals(seed, np.arange(start, start + samples), self.N, self.m)  # (S, N, m)
        w = z * np.sqrt(np.asarray(self.dt))[None, :, None]
        return w.reshape(samples, self.size).T.copy()


# ------------------------------------------------------------ functionals


@dataclass(frozen=True, eq=False)
class WienerFunctional:
    expr: E.Expr
    grid: Grid

    def __post_init__(self):
        bad = [v for v in E.variables(self.expr) if v >= self.grid.size]
        if bad:
            raise GridMismatchError(f"variable {bad[0]} does not exist on a grid of size {self.grid.size}")

    def _lift(self, other) -> E.Expr:
        if isinstance(other, WienerFunctional):
            _same_grid(self, other)
            return other.expr
        return E.as_expr(other)

    def __add__(self, o):
        return WienerFunctional(E.add(self.expr, self._lift(o)), self.grid)

    __radd__ = __add__

    def __sub__(self, o):
        return WienerFunctional(E.sub(self.expr, self._lift(o)), self.grid)

    def __rsub__(self, o):
        return WienerFunctional(E.sub(self._lift(o), self.expr), self.grid)

    def __mul__(self, o):
        return WienerFunctional(E.mul(self.expr, self._lift(o)), self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return WienerFunctional(E.neg(self.expr), self.grid)

    def __pow__(self, k: int):
        return WienerFunctional(E.power(self.expr, k), self.grid)

    def __str__(self) -> str:
        return E.to_string(self.expr, self.grid.names())

    def __repr__(self) -> str:
        return f"WienerFunctional({self})"

    @property
    def degree(self) -> int | None:
        """Total polynomial degree, or None for transcendental functionals."""
        return polynomial_degree(self.expr)

    @property
    def is_polynomial(self) -> bool:
        return self.degree is not None

    def __call__(self, w) -> np.ndarray:
        return evaluate(self, w)


def _same_grid(*fs: WienerFunctional) -> Grid:
    g = fs[0].grid
    for f in fs[1:]:
        if f.grid != g:
            raise GridMismatchError("functionals live on different grids")
    return g


def evaluate(F: WienerFunctional, w) -> np.ndarray:
    """Evaluate at increments ``w`` of shape (size,) or (size, samples)."""
    w = np.asarray(w, dtype=float)
    if w.shape[0] != F.grid.size:
        raise GridMismatchError(f"expected {F.grid.size} increments, got {w.shape[0]}")
    r = E.evaluate(F.expr, w)
    return np.broadcast_to(np.asarray(r, dtype=float), w.shape[1:]).copy() if w.ndim > 1 else float(r)


def malliavin_partial(F: WienerFunctional, k: int, c: int = 1) -> WienerFunctional:
    """Partial derivative in the increment dw_{k,c}."""
    return WienerFunctional(E.diff(F.expr, F.grid.index(k, c)), F.grid)


def _flat(Fs, grid: Grid | None = None) -> list[WienerFunctional]:
    Fs = list(Fs)
    if Fs and isinstance(Fs[0], (list, tuple)):
        Fs = [f for row in Fs for f in row]
    if not Fs:
        raise ValueError("empty integrand")
    g = grid or _same_grid(*[f for f in Fs if isinstance(f, WienerFunctional)])
    out = [f if isinstance(f, WienerFunctional) else g.constant(f) for f in Fs]
    _same_grid(*out)
    if len(out) != g.size:
        raise GridMismatchError(f"integrand has {len(out)} entries, grid has {g.size} increments")
    return out


def skorokhod(Fs: Sequence[WienerFunctional], grid: Grid | None = None) -> WienerFunctional:
    """sum F_v dw_v - sum d_v F_v dt_v over all increments v.

    ``Fs`` is a flat list in variable order, or N rows of m entries."""
    Fs = _flat(Fs, grid)
    g = Fs[0].grid
    terms = []
    for v, f in enumerate(Fs):
        if f.expr.is_zero:
            continue
        terms.append(E.mul(f.expr, E.var(v)))
        terms.append(E.mul(E.const(-g.var_dt(v)), E.diff(f.expr, v)))
    return WienerFunctional(E.add(*terms) if terms else E.ZERO, g)


def derivative_pairing(G: WienerFunctional, Fs) -> WienerFunctional:
    """sum_v d_v G F_v dt_v, the discrete form of int D_t G F_t dt."""
    Fs = _flat(Fs, G.grid)
    g = G.grid
    return WienerFunctional(E.add(*(E.mul(E.const(g.var_dt(v)), E.diff(G.expr, v), f.expr)
                                    for v, f in enumerate(Fs))), g)


# ------------------------------------------------------------ polynomials

# monomial: tuple of (variable, exponent) sorted by variable
_poly_memo: dict = {}


def _pmul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            d = dict(ma)
            for v, p in mb:
                d[v] = d.get(v, 0) + p
            key = tuple(sorted(d.items()))
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def polynomial(e: E.Expr) -> dict:
    """Expand into {monomial: coefficient}; raises NonPolynomialError."""
    hit = _poly_memo.get(e)
    if hit is not None:
        return hit
    for node in E.topological([e]):
        if node in _poly_memo:
            continue
        k = node.kind
        if k == E.CONST:
            p = {(): node.value} if node.value != 0.0 else {}
        elif k == E.VAR:
            p = {((node.value, 1),): 1.0}
        elif k == E.ADD:
            p = {}
            for a in node.args:
                for mono, c in _poly_memo[a].items():
                    p[mono] = p.get(mono, 0.0) + c
        elif k == E.MUL:
            p = {(): 1.0}
            for a in node.args:
                p = _pmul(p, _poly_memo[a])
        elif k == E.POW:
            base = _poly_memo[node.args[0]]
            if node.value * max((_mono_degree(mm) for mm in base), default=0) > 4 * WICK_DEGREE_BUDGET:
                raise DegreeBudgetError("power expansion far beyond the degree budget")
            p = {(): 1.0}
            for _ in range(node.value):
                p = _pmul(p, base)
        else:
            raise NonPolynomialError(f"{E._KIND_NAMES[k]} node in a functional routed to the exact oracle")
        _poly_memo[node] = {mm: c for mm, c in p.items() if c != 0.0}
    return _poly_memo[e]


def _mono_degree(mono) -> int:
    return sum(p for _, p in mono)


_degree_memo: dict = {}


def polynomial_degree(e: E.Expr) -> int | None:
    """Degree from the tree, without expanding; None if transcendental."""
    if e in _degree_memo:
        return _degree_memo[e]
    memo = _degree_memo
    for node in E.topological([e]):
        if node in memo:
            continue
        k = node.kind
        if k == E.CONST:
            d = 0
        elif k == E.VAR:
            d = 1
        elif k in (E.SIN, E.COS, E.EXP):
            d = 0 if memo[node.args[0]] == 0 else None
        else:
            ds = [memo[a] for a in node.args]
            if any(x is None for x in ds):
                d = None
            elif k == E.ADD:
                d = max(ds)
            elif k == E.MUL:
                d = sum(ds)
            else:
                d = ds[0] * node.value
        memo[node] = d
    return memo[e]


def double_factorial(n: int) -> int:
    r = 1
    while n > 1:
        r *= n
        n -= 2
    return r


def gaussian_moment(p: int, var: float) -> float:
    """E[X^p] for X ~ N(0, var)."""
    if p % 2:
        return 0.0
    return double_factorial(p - 1) * var ** (p // 2)


def wick_expectation(F: WienerFunctional) -> float:
    """Exact expectation of a polynomial functional via Gaussian moments."""
    deg = F.degree
    if deg is None:
        raise NonPolynomialError("functional is not polynomial in the increments")
    if deg > WICK_DEGREE_BUDGET:
        raise DegreeBudgetError(f"degree {deg} exceeds the budget {WICK_DEGREE_BUDGET}")
    g = F.grid
    terms = []
    for mono, c in polynomial(F.expr).items():
        val = c
        for v, p in mono:
            val *= gaussian_moment(p, g.var_dt(v))
            if val == 0.0:
                break
        if val != 0.0:
            terms.append(val)
    return math.fsum(terms)


# ------------------------------------------------------------ Monte Carlo


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    route: str  # "exact" or "mc"
    samples: int = 0
    nonfinite: int = 0


def mc_expectation(F: WienerFunctional, samples: int, seed: int, chunk: int = 1 << 16) -> Estimate:
    if samples < 2:
        raise ValueError("need at least two samples")
    f = scalar_function(F.expr, F.grid.size)
    total, total2, count, bad = 0.0, 0.0, 0, 0
    # a shifted mean keeps the variance sum well conditioned
    shift = None
    for s in range(0, samples, chunk):
        S = min(chunk, samples - s)
        vals = np.broadcast_to(f(F.grid.sample(S, seed, s)), (S,))
        ok = np.isfinite(vals)
        bad += int(S - ok.sum())
        v = vals[ok]
        if shift is None and v.size:
            shift = float(v[0])
        v = v - (shift or 0.0)
        total += math.fsum(v)
        total2 += math.fsum(v * v)
        count += v.size
    if bad > NONFINITE_ABORT * samples:
        raise NonfiniteSamplesError(f"{bad} of {samples} evaluations were not finite")
    mean = total / count
    var = max(total2 / count - mean * mean, 0.0) * count / max(count - 1, 1)
    return Estimate(mean + (shift or 0.0), math.sqrt(var / count), "mc", count, bad)


def expectation(F: WienerFunctional, samples: int = 10**6, seed: int = 0) -> Estimate:
    """Exact when polynomial within the degree budget, Monte Carlo otherwise."""
    d = F.degree
    if d is not None and d <= WICK_DEGREE_BUDGET:
        return Estimate(wick_expectation(F), 0.0, "exact")
    return mc_expectation(F, samples, seed)


def _paired_mc(A: WienerFunctional, B: WienerFunctional, samples: int, seed: int) -> tuple[float, float, float]:
    """Means of A and B on common samples and the stderr of their difference."""
    D = mc_expectation(A - B, samples, seed)
    a = mc_expectation(A, samples, seed)
    return a.value, a.value - D.value, D.stderr


# ------------------------------------------------------------ identities


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    residual: float
    stderr: float
    route: str

    @property
    def z(self) -> float:
        return self.residual / self.stderr if self.stderr > 0 else (0.0 if self.residual == 0 else math.inf)


def _route(*fs: WienerFunctional) -> str:
    return "exact" if all(f.degree is not None and f.degree <= WICK_DEGREE_BUDGET for f in fs) else "mc"


def check_ibp(G: WienerFunctional, Fs, samples: int = 10**6, seed: int = 0) -> IdentityCheck:
    """E[sum d_v G F_v dt_v] against E[G delta(F)]."""
    Fs = _flat(Fs, G.grid)
    lhs_f = derivative_pairing(G, Fs)
    rhs_f = G * skorokhod(Fs)
    if _route(lhs_f, rhs_f) == "exact":
        lhs, rhs = wick_expectation(lhs_f), wick_expectation(rhs_f)
        return IdentityCheck(lhs, rhs, lhs - rhs, 0.0, "exact")
    lhs, rhs, se = _paired_mc(lhs_f, rhs_f, samples, seed)
    return IdentityCheck(lhs, rhs, lhs - rhs, se, "mc")


def isometry_cross_term(Fs) -> WienerFunctional:
    """sum_{a,b} d_a F_b d_b F_a dt_a dt_b (indices as in the proof)."""
    Fs = _flat(Fs)
    g = Fs[0].grid
    terms = []
    for a in range(g.size):
        for b in range(g.size):
            dab = E.diff(Fs[b].expr, a)
            if dab.is_zero:
                continue
            dba = E.diff(Fs[a].expr, b)
            if dba.is_zero:
                continue
            terms.append(E.mul(E.const(g.var_dt(a) * g.var_dt(b)), dab, dba))
    return WienerFunctional(E.add(*terms) if terms else E.ZERO, g)


def isometry_square_term(Fs) -> WienerFunctional:
    """sum_{a,b} (d_a F_b)^2 dt_a dt_b, the bound in the inequality form."""
    Fs = _flat(Fs)
    g = Fs[0].grid
    terms = []
    for a in range(g.size):
        for b in range(g.size):
            d = E.diff(Fs[b].expr, a)
            if not d.is_zero:
                terms.append(E.mul(E.const(g.var_dt(a) * g.var_dt(b)), E.power(d, 2)))
    return WienerFunctional(E.add(*terms) if terms else E.ZERO, g)


@dataclass(frozen=True)
class IsometryCheck:
    lhs: float
    rhs: float
    residual: float
    bound: float  # right side of the inequality form
    slack: float  # bound - lhs
    stderr: float
    route: str


def check_isometry(Fs, samples: int = 10**6, seed: int = 0) -> IsometryCheck:
    Fs = _flat(Fs)
    g = Fs[0].grid
    S = skorokhod(Fs)
    lhs_f = S * S
    base = WienerFunctional(E.add(*(E.mul(E.const(g.var_dt(v)), E.power(f.expr, 2)) for v, f in enumerate(Fs))), g)
    rhs_f = base + isometry_cross_term(Fs)
    bound_f = base + isometry_square_term(Fs)
    if _route(lhs_f, rhs_f, bound_f) == "exact":
        lhs, rhs, bnd = (wick_expectation(f) for f in (lhs_f, rhs_f, bound_f))
        return IsometryCheck(lhs, rhs, lhs - rhs, bnd, bnd - lhs, 0.0, "exact")
    lhs, rhs, se = _paired_mc(lhs_f, rhs_f, samples, seed)
    bnd = mc_expectation(bound_f, samples, seed).value
    return IsometryCheck(lhs, rhs, lhs - rhs, bnd, bnd - lhs, se, "mc")


_points_cache: dict = {}


def random_points(grid: Grid, count: int, seed: int) -> np.ndarray:
    """Evaluation points (size, count) drawn from the grid's own law."""
    key = (grid, count, seed)
    if key not in _points_cache:
        pts = grid.sample(count, seed)
        pts.setflags(write=False)
        _points_cache[key] = pts
    return _points_cache[key]


def max_abs_difference(A: WienerFunctional, B: WienerFunctional, points: np.ndarray) -> float:
    """Evaluate the residual graph A - B; canonical forms make equal graphs
    cancel to the constant zero."""
    _same_grid(A, B)
    d = evaluate(A - B, points)
    return float(np.max(np.abs(d)))


def dint_identity_check(Fs, k: int, c: int = 1, points: int = 100, seed: int = 0) -> float:
    """max |d_{k,c} delta(F) - (F_{k,c} + delta(d_{k,c} F))| over random points."""
    Fs = _flat(Fs)
    g = Fs[0].grid
    v = g.index(k, c)
    lhs = malliavin_partial(skorokhod(Fs), k, c)
    rhs = Fs[v] + skorokhod([malliavin_partial(f, k, c) for f in Fs])
    return max_abs_difference(lhs, rhs, random_points(g, points, seed))


# ------------------------------------------------------------ refinement


_lift_cache: dict = {}


@dataclass(frozen=True)
class Refinement:
    """Step ``split`` (1-based) of ``coarse`` cut into two pieces."""

    coarse: Grid
    fine: Grid
    split: int

    def fine_vars(self, v: int) -> tuple[int, ...]:
        """Fine variable indices summing to coarse variable v."""
        m = self.coarse.m
        k, c = divmod(v, m)
        s = self.split - 1
        if k < s:
            return (v,)
        if k == s:
            return (k * m + c, (k + 1) * m + c)
        return ((k + 1) * m + c,)

    @cached_property
    def mapping(self) -> dict[int, E.Expr]:
        return {v: E.add(*(E.var(u) for u in self.fine_vars(v))) for v in range(self.coarse.size)}

    def lift(self, F: WienerFunctional) -> WienerFunctional:
        if F.grid != self.coarse:
            raise GridMismatchError("functional is not on the coarse grid")
        key = (self, F.expr)
        e = _lift_cache.get(key)
        if e is None:
            e = _lift_cache[key] = E.substitute(F.expr, self.mapping)
        return WienerFunctional(e, self.fine)

    @cached_property
    def _coarse_index(self) -> tuple[int, ...]:
        out = [0] * self.fine.size
        for v in range(self.coarse.size):
            for u in self.fine_vars(v):
                out[u] = v
        return tuple(out)

    def coarse_of(self, u: int) -> int:
        return self._coarse_index[u]

    def lift_integrand(self, Fs) -> list[WienerFunctional]:
        """Integrand on the fine grid: each fine slot copies its coarse slot."""
        Fs = _flat(Fs, self.coarse)
        return [self.lift(Fs[self.coarse_of(u)]) for u in range(self.fine.size)]

    def coarsen_points(self, w: np.ndarray) -> np.ndarray:
        out = np.empty((self.coarse.size,) + w.shape[1:])
        for v in range(self.coarse.size):
            out[v] = sum(w[u] for u in self.fine_vars(v))
        return out


def refine_grid(grid: Grid, split_index: int, fraction: float = 0.5) -> Refinement:
    if not 1 <= split_index <= grid.N:
        raise ValueError(f"split index {split_index} outside 1..{grid.N}")
    if not 0.0 < fraction < 1.0:
        raise ValueError("split fraction must lie strictly between 0 and 1")
    dt = list(grid.dt)
    s = split_index - 1
    lo = dt[s] * fraction
    hi = dt[s] - lo
    if not (lo > 0 and hi > 0):
        raise ValueError("split produces an empty step")
    fine = Grid(tuple(dt[:s] + [lo, hi] + dt[s + 1:]), grid.m)
    return Refinement(grid, fine, split_index)


def refine(F: WienerFunctional, split_index: int, fraction: float = 0.5) -> WienerFunctional:
    """Substitute dw_k -> dw_k^- + dw_k^+ for the split step."""
    return refine_grid(F.grid, split_index, fraction).lift(F)


@dataclass(frozen=True)
class RefinementCheck:
    derivative: float  # max over fine symbols and points of |d_u lift(F) - lift(d_v F)|
    skorokhod: float  # max |lift(delta F) - delta(lift F)|
    expectation: float  # |E F - E lift(F)| when polynomial, else nan


def refinement_check(Fs, split_index: int, points: int = 100, seed: int = 0, fraction: float = 0.5
                     ) -> RefinementCheck:
    Fs = _flat(Fs)
    R = refine_grid(Fs[0].grid, split_index, fraction)
    pts = random_points(R.fine, points, seed)
    memo: dict = {}

    def worst(residuals) -> float:
        live = [r for r in residuals if not r.is_zero]
        return max((float(np.max(np.abs(E.evaluate(r, pts, memo)))) for r in live), default=0.0)

    res = []
    for f in Fs:
        if f.expr.is_zero:
            continue  # both sides are the zero graph
        lf = R.lift(f).expr
        for u in range(R.fine.size):
            a = E.diff(lf, u)
            b = R.lift(WienerFunctional(E.diff(f.expr, R.coarse_of(u)), R.coarse)).expr
            res.append(E.sub(a, b))
    dmax = worst(res)
    # the fine integrand is the coarse one copied to both halves of the split step
    S = skorokhod(Fs)
    smax = worst([E.sub(R.lift(S).expr, skorokhod(R.lift_integrand(Fs)).expr)])
    emax = abs(wick_expectation(S) - wick_expectation(R.lift(S))) if _route(S) == "exact" else math.nan
    return RefinementCheck(dmax, smax, emax)


# ------------------------------------------------------------ Malliavin matrix


def discrete_malliavin_matrix(Xs: Sequence[WienerFunctional]):
    """Sampler w -> M(w) with M_ij = sum_v d_v X_i d_v X_j dt_v, shape (n, n, ...)."""
    g = _same_grid(*Xs)
    n = len(Xs)
    D = [[E.diff(x.expr, v) for v in range(g.size)] for x in Xs]
    dts = np.array([g.var_dt(v) for v in range(g.size)])

    def sample(w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        memo: dict = {}
        vals = np.array([[np.broadcast_to(E.evaluate(d, w, memo), w.shape[1:]) for d in row] for row in D])
        return np.einsum("iv...,jv...,v->ij...", vals, vals, dts).reshape((n, n) + w.shape[1:])

    return sample


# ------------------------------------------------------------ corpus


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    G: WienerFunctional
    F: tuple[WienerFunctional, ...]


def _monomials(nvars: int, max_degree: int) -> list[tuple[int, ...]]:
    """Exponent vectors with total degree <= max_degree, in a fixed order."""
    out = []
    for d in range(max_degree + 1):
        for e in product(range(d + 1), repeat=nvars):
            if sum(e) == d:
                out.append(e)
    return out


def _monomial_expr(expo: tuple[int, ...]) -> E.Expr:
    return E.mul(*(E.power(E.var(v), p) for v, p in enumerate(expo) if p))


DEFAULT_GRIDS = (
    Grid((0.7,), 1),
    Grid((0.3, 0.5), 1),
    Grid((0.25, 0.5, 0.125), 1),
    Grid((0.6,), 2),
    Grid((0.5, 0.25), 2),
    Grid((0.25, 0.5, 0.125), 2),
)


def polynomial_corpus(grids: Iterable[Grid] = DEFAULT_GRIDS, max_degree: int = 4) -> list[CorpusEntry]:
    """Monomial G paired with single-slot monomial integrands F.

    Every identity here is bilinear in (G, F), so the monomial basis with
    deg G + deg F <= max_degree covers all polynomial pairs of that total
    degree.  Entries with G = 1 double as isometry and commutation cases.
    """
    out = []
    for gi, g in enumerate(grids):
        monos = _monomials(g.size, max_degree)
        for a in range(g.size):
            for fe in monos:
                df = sum(fe)
                for ge in monos:
                    if sum(ge) + df > max_degree:
                        continue
                    F = [g.constant(0.0)] * g.size
                    F[a] = WienerFunctional(_monomial_expr(fe), g)
                    G = WienerFunctional(_monomial_expr(ge), g)
                    out.append(CorpusEntry(f"g{gi}:s{a}:F{''.join(map(str, fe))}:G{''.join(map(str, ge))}", G,
                                           tuple(F)))
    return out


def isometry_corpus(grids: Iterable[Grid] = DEFAULT_GRIDS, max_degree: int = 2, max_size: int = 4
                    ) -> list[tuple[str, tuple]]:
    """Integrands e_a x^alpha + e_b x^beta over unordered pairs of basis
    elements, same slot included.  The isometry is quadratic in F, so by
    polarization these together with the single-slot entries of
    ``polynomial_corpus`` cover every integrand with entries of degree
    <= max_degree.  Grids with more than ``max_size`` increments are skipped
    to keep the pair count bounded."""
    out = []
    for gi, g in enumerate(grids):
        if g.size > max_size:
            continue
        basis = [(a, fe) for a in range(g.size) for fe in _monomials(g.size, max_degree)]
        for i, (a, fa) in enumerate(basis):
            for b, fb in basis[i + 1:]:
                F = [E.ZERO] * g.size
                F[a] = E.add(F[a], _monomial_expr(fa))
                F[b] = E.add(F[b], _monomial_expr(fb))
                tag = f"g{gi}:s{a}{b}:{''.join(map(str, fa))}:{''.join(map(str, fb))}"
                out.append((tag, tuple(WienerFunctional(f, g) for f in F)))
    return out


def parse_corpus(text: str) -> list[CorpusEntry]:
    """Corpus file: ``@grid dt1,dt2,... [m=2]`` sets the grid, then one entry
    per line ``G | F_1 ; F_2 ; ...`` in the expression grammar over w1..wN
    (or wk_c when m > 1).  A line without ``|`` is G with F = 1.  ``#``
    starts a comment."""
    grid: Grid | None = None
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@grid"):
            parts = line[5:].split()
            if not parts:
                raise ValueError(f"line {lineno}: @grid needs step sizes")
            m = 1
            for p in parts[1:]:
                if not p.startswith("m="):
                    raise ValueError(f"line {lineno}: unknown @grid option {p!r}")
                m = int(p[2:])
            grid = Grid(tuple(float(x) for x in parts[0].split(",")), m)
            continue
        if grid is None:
            raise ValueError(f"line {lineno}: entry before any @grid directive")
        g_txt, _, f_txt = line.partition("|")
        G = _parse_at(grid, g_txt, lineno)
        if f_txt.strip():
            comps = [c for c in f_txt.split(";")]
            if len(comps) != grid.size:
                raise ValueError(f"line {lineno}: {len(comps)} integrand entries for {grid.size} increments")
            F = tuple(_parse_at(grid, c, lineno) for c in comps)
        else:
            F = tuple(grid.constant(1.0) for _ in range(grid.size))
        out.append(CorpusEntry(f"line{lineno}", G, F))
    return out


def _parse_at(grid: Grid, text: str, lineno: int) -> WienerFunctional:
    from .grammar import ParseError

    try:
        return grid.parse(text)
    except ParseError as e:
        raise ParseError(e.message, lineno, e.column) from None
