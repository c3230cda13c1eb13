"""The interpolation inequality between a function, its derivative and the
Hoelder constant of the derivative, empirical Norris-lemma statistics and
the bracket cascade on the processes Z_F(t) = <eta, J_t^-1 F(x_t)>.

Bracket convention: ``lie_bracket(U, V) = DV U - DU V``.  In that convention

    dZ_F = Z_{[V_0, F]} dt + sum_k Z_{[V_k, F]} o dW_k,

so the Ito drift is A = Z_{[V_0,F]} + 1/2 sum_k Z_{[V_k,[V_k,F]]} and the
diffusion coefficients are B_k = Z_{[V_k, F]}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_smoothing_spline

from ._accel import backend as _backend
from ._accel import njit
from .mmatrix import clopper_pearson, fit_loglog, SlopeFit, MIN_HITS
from .sde import FlowPath, GridSpec, SdeSystem, simulate_ensemble
from .vfield import VectorField, build_bracket_family, lie_bracket

ALPHA = 1.0 / 3.0
EXACT_PAIRS = 4096
R_GRID = (1 / 80, 1 / 20, 1 / 8, 1 / 5)


class InconsistentInputError(ValueError):
    pass


# ------------------------------------------------------------------ Hoelder constants


@njit(cache=True)
def _holder_jit(f, h, alpha):
    n = f.shape[0]
    best = 0.0
    for d in range(1, n):
        w = (d * h) ** alpha
        for i in range(n - d):
            r = abs(f[i + d] - f[i]) / w
            if r > best:
                best = r
    return best


def _holder_numpy(f, h, alpha):
    best = 0.0
    for d in range(1, f.size):
        r = np.abs(f[d:] - f[:-d]).max() / (d * h) ** alpha
        best = max(best, float(r))
    return best


def holder_constant(values, alpha: float = ALPHA, span: float = 1.0, backend: str | None = None) -> float:
    f = np.ascontiguousarray(values, dtype=float)
    if f.size < 2:
        return 0.0
    h = span / (f.size - 1)
    if _backend(backend) == "numba":
        return float(_holder_jit(f, h, float(alpha)))
    return _holder_numpy(f, h, float(alpha))


@dataclass(frozen=True)
class HoelderProfile:
    values: np.ndarray  # samples on a uniform grid of [0, 1]
    alpha: float
    sup: float
    holder: float
    stride: int  # 1 when every pair was examined

    @classmethod
    def of(cls, values, alpha: float = ALPHA, max_points: int = EXACT_PAIRS, backend: str | None = None):
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        v = np.asarray(values, dtype=float)
        stride = max(1, math.ceil((v.size - 1) / max_points))
        sub = v[::stride]
        span = (sub.size - 1) * stride / (v.size - 1) if v.size > 1 else 1.0
        return cls(v, float(alpha), float(np.abs(v).max()) if v.size else 0.0,
                   holder_constant(sub, alpha, span, backend), stride)


@dataclass(frozen=True)
class DtfResult:
    lhs: float
    rhs: float
    sup: float
    holder: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def dtf_rhs(sup: float, holder: float, alpha: float) -> float:
    if sup == 0.0:
        return 0.0
    return 4.0 * sup * max(1.0, sup ** (-1.0 / (1.0 + alpha)) * holder ** (1.0 / (1.0 + alpha)))


def check_dtf(values, derivative, alpha: float = ALPHA, backend: str | None = None) -> DtfResult:
    """lhs = sup |f'|, rhs = 4 |f| max(1, |f|^(-1/(1+a)) |f'|_a^(1/(1+a)))."""
    f = np.asarray(values, float)
    d = np.asarray(derivative, float)
    if f.shape != d.shape:
        raise ValueError("value and derivative series must have the same length")
    sup = float(np.abs(f).max())
    lhs = float(np.abs(d).max())
    if sup == 0.0 and lhs > 0.0:
        raise InconsistentInputError("f vanishes identically but its derivative does not")
    hold = HoelderProfile.of(d, alpha, backend=backend).holder
    return DtfResult(lhs, dtf_rhs(sup, hold, alpha), sup, hold)


def dtf_corpus(N: int = 2048, seed: int = 0) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """200 (name, f, f') triples on a uniform grid of [0, 1]."""
    t = np.linspace(0.0, 1.0, N + 1)
    out = []
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x647466]))
    for deg in range(1, 9):  # monomials and shifted monomials: 40
        for c in (0.0, 0.25, 0.5, 0.75, 1.0):
            out.append((f"(t-{c})^{deg}", (t - c) ** deg, deg * (t - c) ** (deg - 1)))
    for _ in range(40):  # random polynomials
        p = np.polynomial.Polynomial(rng.standard_normal(rng.integers(2, 8)))
        out.append((f"poly{len(out)}", p(t), p.deriv()(t)))
    for w in np.geomspace(0.5, 200.0, 30):  # sin(wt)/w and cos sweeps: 60
        out.append((f"sin({w:.3g}t)/{w:.3g}", np.sin(w * t) / w, np.cos(w * t)))
        out.append((f"cos({w:.3g}t)+2", np.cos(w * t) + 2.0, -w * np.sin(w * t)))
    for i in range(60):  # smoothed Brownian paths
        W = np.concatenate([[0.0], np.cumsum(rng.standard_normal(N) * math.sqrt(1.0 / N))])
        lam = 10.0 ** rng.uniform(-7, -3)
        s = make_smoothing_spline(t, W, lam=lam)
        out.append((f"smoothed-bm{i}", s(t), s.derivative()(t)))
    return out


# ------------------------------------------------------------------ Z processes


def z_fields(system: SdeSystem, F: VectorField) -> tuple[VectorField, tuple[VectorField, ...]]:
    """(drift field G, diffusion fields B_k) such that dZ_F = Z_G dt + sum Z_{B_k} dW_k (Ito)."""
    V0, Vs = system.drift, system.diffusions
    G = lie_bracket(V0, F)
    Bs = tuple(lie_bracket(V, F) for V in Vs)
    for V, B in zip(Vs, Bs):
        G = G + lie_bracket(V, B).scaled(0.5)
    return G, Bs


def z_series(flow: FlowPath, eta, fields) -> np.ndarray:
    """Z_V(t_k) for each field, shape (len(fields), N+1)."""
    from .mmatrix import z_processes

    return z_processes(flow, eta, fields)


def stratonovich_reconstruction(flow: FlowPath, eta, F: VectorField) -> tuple[np.ndarray, np.ndarray]:
    """(direct Z_F, Z_F rebuilt by one-step Heun sums of its Stratonovich equation)."""
    fields = (F, lie_bracket(flow.system.drift, F)) + tuple(lie_bracket(V, F) for V in flow.system.diffusions)
    Z = z_series(flow, eta, fields)
    dt, dw = flow.grid.dt, flow.grid.dw
    inc = 0.5 * (Z[1, :-1] + Z[1, 1:]) * dt
    for c in range(flow.system.m):
        inc += 0.5 * (Z[2 + c, :-1] + Z[2 + c, 1:]) * dw[:, c]
    rebuilt = Z[0, 0] + np.concatenate([[0.0], np.cumsum(inc)])
    return Z[0], rebuilt


def drift_regression(flows, eta, F: VectorField) -> float:
    """Slope of (dZ_F - sum B_k dW_k) on A dt pooled over paths and steps."""
    G, Bs = z_fields(flows[0].system, F)
    num = den = 0.0
    for fl in flows:
        Z = z_series(fl, eta, (F, G) + Bs)
        y = np.diff(Z[0]) - (Z[2:, :-1].T * fl.grid.dw).sum(axis=1)
        a = Z[1, :-1] * fl.grid.dt
        num += float(a @ y)
        den += float(a @ a)
    return num / den if den > 0 else math.nan


# ------------------------------------------------------------------ almost implication


@dataclass(frozen=True)
class AlmostImplicationStats:
    r: float
    eps: np.ndarray
    paths: int
    count_a: np.ndarray  # {|Z| < eps}
    count_b: np.ndarray  # {|A| < eps^r and |B| < eps^r}
    count_violation: np.ndarray  # A and not B
    fit: SlopeFit

    HEADER = ("r", "epsilon", "paths", "count_a", "count_b", "count_violation", "p_violation", "p_lo", "p_hi",
              "resolvable")

    @property
    def resolvable(self) -> np.ndarray:
        return self.count_a >= MIN_HITS

    @property
    def p_violation(self) -> np.ndarray:
        return self.count_violation / self.paths

    def rows(self) -> list[tuple]:
        lo, hi = clopper_pearson(self.count_violation, self.paths)
        return [(self.r, float(e), self.paths, int(a), int(b), int(v), float(v / self.paths), float(l), float(h),
                 bool(ok))
                for e, a, b, v, l, h, ok in zip(self.eps, self.count_a, self.count_b, self.count_violation, lo, hi,
                                                self.resolvable)]

    def envelope(self, p: float) -> float:
        """C such that C eps^p passes through the largest resolvable bin."""
        res = np.flatnonzero(self.resolvable)
        if res.size == 0:
            return 0.0
        top = res[np.argmax(self.eps[res])]
        return float(self.p_violation[top] / self.eps[top] ** p)

    def meets(self, p: float) -> bool:
        """Violations decay at least like eps^p below the largest resolvable eps.

        The constant is pinned at the top resolvable bin; every smaller eps
        must have its lower confidence bound under C eps^p.  Without any
        resolvable bin the check holds vacuously (see ``vacuous``).
        """
        res = np.flatnonzero(self.resolvable)
        if res.size == 0:
            return True
        top = self.eps[res].max()
        C = self.envelope(p)
        lo, _ = clopper_pearson(self.count_violation, self.paths)
        below = self.eps < top
        return bool(np.all(lo[below] <= C * self.eps[below] ** p * (1 + 1e-12)))

    @property
    def vacuous(self) -> bool:
        return not np.any(self.resolvable)


def implication_table(eps, r: float, z_sup, a_sup, b_sup) -> AlmostImplicationStats:
    """Count events from per-path sup norms.  ``b_sup`` may be (P, m)."""
    eps = np.asarray(eps, float)
    z, a = np.asarray(z_sup, float), np.asarray(a_sup, float)
    b = np.asarray(b_sup, float).reshape(z.size, -1)
    bmax = b.max(axis=1) if b.shape[1] else np.zeros(z.size)
    ev_a = z[None, :] < eps[:, None]
    ev_b = (a[None, :] < eps[:, None] ** r) & (bmax[None, :] < eps[:, None] ** r)
    ca, cb = ev_a.sum(axis=1), ev_b.sum(axis=1)
    cv = (ev_a & ~ev_b).sum(axis=1)
    res = ca >= MIN_HITS
    if np.any(res):
        fit = fit_loglog(eps[res], cv[res], z.size, min_hits=MIN_HITS)
    else:
        fit = SlopeFit(math.nan, math.nan, None, None, 0, True, "no resolvable bins")
    return AlmostImplicationStats(float(r), eps, int(z.size), ca, cb, cv, fit)


def deterministic_fixture(eps0: float, eps, r_grid=R_GRID, N: int = 1000) -> list[AlmostImplicationStats]:
    """Z_t = eps0 t, A = eps0, B = 0, injected directly for one path."""
    t = np.linspace(0.0, 1.0, N + 1)
    z = np.abs(eps0 * t).max()
    return [implication_table(eps, r, [z], [abs(eps0)], [[0.0]]) for r in r_grid]


def fixture_expected(eps0: float, eps, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form event indicators for the deterministic fixture."""
    eps = np.asarray(eps, float)
    a = eps0 < eps
    b = abs(eps0) < eps**r
    return a.astype(int), b.astype(int), (a & ~b).astype(int)


def norris_eps(lo_exp: int = 14) -> np.ndarray:
    return 2.0 ** -np.arange(0, lo_exp + 1, dtype=float)


def norris_scaling(system: SdeSystem, x0, F: VectorField, eta, eps=None, paths: int = 100_000, seed: int = 0,
                   r_grid=R_GRID, N: int = 256, backend: str | None = None) -> list[AlmostImplicationStats]:
    eta = np.asarray(eta, float)
    eps = norris_eps() if eps is None else np.asarray(eps, float)
    G, Bs = z_fields(system, F)
    ens = simulate_ensemble(system, x0, GridSpec(1.0, N), paths, seed, extra=(F, G) + Bs, zeta=eta,
                            backend=backend)
    s = ens.zsup[ens.ok]
    return [implication_table(eps, r, s[:, 0], s[:, 1], s[:, 2:]) for r in r_grid]


# ------------------------------------------------------------------ cascade


@dataclass(frozen=True)
class CascadeRow:
    level: int
    label: str
    conditioned: int
    paths: int
    z0: float  # Z_V(0) = <eta, V(x0)>
    q10: float
    q50: float
    q90: float
    identically_zero: bool

    HEADER = ("level", "field", "conditioned", "paths", "z0", "q10", "q50", "q90", "identically_zero")

    def row(self) -> tuple:
        return (self.level, self.label, self.conditioned, self.paths, self.z0, self.q10, self.q50, self.q90,
                self.identically_zero)


def hormander_cascade(system: SdeSystem, x0, eta, K: int, eps: float, paths: int, seed: int = 0, N: int = 256,
                      backend: str | None = None) -> list[CascadeRow]:
    """Quantiles of sup_t |Z_V| for every bracket V up to level K, conditioned on <eta, C eta> < eps.
    An empty conditioning event leaves the quantiles NaN (censored)."""
    eta = np.asarray(eta, float)
    fam = build_bracket_family(system.fields, K)
    fields, levels = [], []
    for k in range(K + 1):
        for V in fam.new_at(k):
            fields.append(V)
            levels.append(k)
    ens = simulate_ensemble(system, x0, GridSpec(1.0, N), paths, seed, etas=eta[None, :], extra=tuple(fields),
                            zeta=eta, backend=backend)
    ok = ens.ok
    cond = ok & (ens.zsq[:, 0] < eps)
    sel = ens.zsup[cond]
    rows = []
    x0 = np.asarray(x0, float)
    for i, (V, k) in enumerate(zip(fields, levels)):
        if sel.shape[0]:
            q10, q50, q90 = (float(v) for v in np.quantile(sel[:, i], [0.1, 0.5, 0.9]))
        else:
            q10 = q50 = q90 = math.nan
        rows.append(CascadeRow(k, V.label, int(cond.sum()), int(ok.sum()), float(eta @ V(x0)), q10, q50, q90,
                               V.is_zero))
    return rows


def weakest_direction(system: SdeSystem, x0, N: int = 256, paths: int = 256, seed: int = 0) -> np.ndarray:
    """Eigenvector of the smallest eigenvalue of the pilot mean of C."""
    ens = simulate_ensemble(system, x0, GridSpec(1.0, N), paths, seed)
    C = np.nanmean(ens.C[ens.ok], axis=0)
    v = np.linalg.eigh(C)[1][:, 0]
    return v * np.sign(v[np.argmax(np.abs(v))])


def calibration() -> dict:
    import json
    from importlib import resources

    return json.loads(resources.files("hormander").joinpath("data/calibration.json").read_text())
