"""Malliavin and reduced Malliavin matrices, tail scaling of the smallest
quadratic form, inverse moments, a first-order integration-by-parts probe
and a Gaussian KDE for terminal states.

The reduced matrix is

    C = sum_k J_k^-1 V(x_k) V(x_k)^T J_k^-T dt_k        (left endpoint)

and the full one M = J_T C J_T^T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import ndtr

from . import expr as E
from . import kernels
from ._accel import backend as _backend
from ._accel import njit
from .compile import scalar_function
from .sde import Ensemble, FlowPath, GridSpec, SdeSystem, _scheme_code, simulate_ensemble
from .vfield import DimensionError, VectorField

ASYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
EIGEN_FLOOR = 1e-14
COND_MAX = 1e10
EXCLUSION_ABORT = 0.01
MIN_HITS = 10


class HorizonError(ValueError):
    pass


class ExclusionError(ArithmeticError):
    """Too many paths excluded for ill-conditioning."""


@dataclass(frozen=True)
class CovarianceSample:
    C: np.ndarray
    M: np.ndarray
    lambda_C: float
    lambda_M: float
    seed: int | None = None
    path_index: int | None = None

    @classmethod
    def build(cls, C, J, seed=None, path_index=None) -> "CovarianceSample":
        C = np.asarray(C, dtype=float)
        asym = float(np.max(np.abs(C - C.T))) if C.size else 0.0
        if asym > ASYMMETRY_TOL * max(1.0, float(np.max(np.abs(C)))):
            raise ValueError(f"quadrature produced an asymmetric matrix ({asym:.3g})")
        C = 0.5 * (C + C.T)
        M = J @ C @ J.T
        M = 0.5 * (M + M.T)
        lc, lm = float(np.linalg.eigvalsh(C)[0]), float(np.linalg.eigvalsh(M)[0])
        scale = max(1.0, float(np.max(np.abs(C))))
        if lc < -PSD_TOL * scale:
            raise ValueError(f"reduced matrix not PSD: smallest eigenvalue {lc:.3g}")
        return cls(C, M, lc, lm, seed, path_index)


def reduced_matrix(flow: FlowPath, allow_horizon: bool = False, seed=None, path_index=None) -> CovarianceSample:
    if not allow_horizon and abs(flow.grid.T - 1.0) > 1e-12:
        raise HorizonError(f"horizon is {flow.grid.T}, the reduced matrix is defined at T = 1")
    V = field_values(flow, flow.system.diffusions)[:, :-1]  # (m, N, n)
    Q = np.einsum("kij,ckj->kic", flow.Ys[:-1], V)  # columns J_k^-1 V_c(x_k)
    C = np.einsum("kic,kjc,k->ij", Q, Q, flow.grid.dt)
    return CovarianceSample.build(C, flow.Js[-1], seed, path_index)


def field_values(flow: FlowPath, fields) -> np.ndarray:
    """Fields evaluated along the path, shape (len(fields), N+1, n)."""
    fields = tuple(fields)
    for F in fields:
        if F.n != flow.system.n:
            raise DimensionError("fields must live in the state dimension")
    fs = flow.system.field_set(fields)
    out = np.empty((len(fields), flow.system.n, flow.xs.shape[0]))
    fs.py["ex"](np.ascontiguousarray(flow.xs.T), out)
    return np.swapaxes(out, 1, 2)


def z_processes(flow: FlowPath, eta, fields) -> np.ndarray:
    """Z_V(t_k) = <eta, J_k^-1 V(x_k)> for each field, shape (len(fields), N+1)."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (flow.system.n,):
        raise DimensionError("eta must live in the state dimension")
    return np.einsum("i,kij,fkj->fk", eta, flow.Ys, field_values(flow, fields))


def z_process(flow: FlowPath, eta, F: VectorField) -> np.ndarray:
    return z_processes(flow, eta, (F,))[0]


def quadratic_form_decomposition(flow: FlowPath, eta) -> tuple[float, float]:
    """(<eta, C eta>, sum_k int Z_{V_k}^2) by two independent routes."""
    eta = np.asarray(eta, dtype=float)
    if abs(np.linalg.norm(eta) - 1.0) > 1e-12:
        raise ValueError("eta must be a unit vector")
    C = reduced_matrix(flow, allow_horizon=True).C
    dt = flow.grid.dt
    zs = 0.0
    for Z in z_processes(flow, eta, flow.system.diffusions):
        zs += math.fsum(Z[:-1] * Z[:-1] * dt)
    return float(eta @ C @ eta), float(zs)


def covariance_samples(ens: Ensemble) -> list[CovarianceSample]:
    out = []
    for i in np.flatnonzero(ens.ok):
        out.append(CovarianceSample.build(ens.C[i], ens.JT[i], ens.seed, int(ens.paths[i])))
    return out


# ------------------------------------------------------------------ tails


def clopper_pearson(k, n, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    k, n = np.asarray(k), np.asarray(n)
    a = 1.0 - level
    lo = np.where(k > 0, stats.beta.ppf(a / 2, np.maximum(k, 1), n - k + 1), 0.0)
    hi = np.where(k < n, stats.beta.ppf(1 - a / 2, k + 1, np.maximum(n - k, 1)), 1.0)
    return lo, hi


def geometric_eps(hi_exp: int = 4, lo_exp: int = 14) -> np.ndarray:
    """2^-hi_exp, ..., 2^-lo_exp."""
    return 2.0 ** -np.arange(hi_exp, lo_exp + 1, dtype=float)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    lo: float | None  # fitted eps range
    hi: float | None
    bins: int
    censored: bool
    reason: str


def fit_loglog(eps, hits, paths, lo=None, hi=None, min_hits: int = MIN_HITS) -> SlopeFit:
    """Least-squares slope of log p against log eps over bins with enough hits.

    With no hits in the range the probability is below resolution at every
    eps: the slope is reported as +inf and the fit marked censored.
    """
    eps, hits = np.asarray(eps, float), np.asarray(hits)
    sel = np.ones(eps.size, bool)
    if lo is not None:
        sel &= eps >= lo * (1 - 1e-12)
    if hi is not None:
        sel &= eps <= hi * (1 + 1e-12)
    if not np.any(hits[sel] > 0):
        return SlopeFit(math.inf, 0.0, lo, hi, 0, True, "no hits")
    use = sel & (hits >= min_hits)
    if use.sum() < 2:
        return SlopeFit(math.nan, math.nan, lo, hi, int(use.sum()), True,
                        f"fewer than two bins with >= {min_hits} hits")
    x, y = np.log(eps[use]), np.log(hits[use] / paths)
    res = stats.linregress(x, y)
    return SlopeFit(float(res.slope), float(res.stderr), float(eps[use].min()), float(eps[use].max()),
                    int(use.sum()), bool(use.sum() < sel.sum()), "" if use.sum() == sel.sum() else "partial")


@dataclass(frozen=True)
class ScalingReport:
    eps: np.ndarray
    hits: np.ndarray
    paths: int
    fit: SlopeFit
    policy: str
    seed: int
    min_form: float  # smallest quadratic form over all paths and directions
    extra: dict = field(default_factory=dict)
    lambda_min: np.ndarray = field(default=None, repr=False)  # per path, smallest eigenvalue of C

    @property
    def p_hat(self) -> np.ndarray:
        return self.hits / self.paths

    @property
    def interval(self) -> tuple[np.ndarray, np.ndarray]:
        return clopper_pearson(self.hits, self.paths)

    @property
    def slope(self) -> float:
        return self.fit.slope

    @property
    def censored(self) -> bool:
        return self.fit.censored

    def floor(self, level: float = 0.05) -> bool:
        """Non-decaying: even the smallest eps keeps probability above ``level``."""
        return bool(self.p_hat[np.argmin(self.eps)] >= level)

    def decays(self, p_min: float) -> bool:
        return bool(self.fit.slope > p_min)

    def rows(self) -> list[tuple]:
        lo, hi = self.interval
        return [(float(e), int(h), int(self.paths), float(a), float(p), float(b))
                for e, h, a, p, b in zip(self.eps, self.hits, lo, self.p_hat, hi)]

    HEADER = ("epsilon", "hits", "paths", "p_hat_lo", "p_hat", "p_hat_hi")

    def summary(self) -> dict:
        f = self.fit
        return {"slope": f.slope, "slope_stderr": f.stderr, "range": [f.lo, f.hi], "bins": f.bins,
                "censored": f.censored, "reason": f.reason, "policy": self.policy, "seed": self.seed,
                "paths": self.paths, "min_form": self.min_form, **self.extra}


def eta_directions(n: int, fixed=(), K: int = 16, seed: int = 0) -> np.ndarray:
    """Fixed unit directions, the coordinate basis, then K uniform random ones."""
    dirs = [np.asarray(v, float) / np.linalg.norm(v) for v in fixed]
    dirs += list(np.eye(n))
    if K:
        g = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6E7461])).standard_normal((K, n))
        dirs += list(g / np.linalg.norm(g, axis=1, keepdims=True))
    return np.array(dirs)


def tail_scaling(system: SdeSystem, x0, eps=None, paths: int = 100_000, seed: int = 0, N: int = 256,
                 fixed=(), K: int = 16, fit_range=(2.0**-14, 2.0**-6), scheme: str = "stratonovich-heun",
                 backend: str | None = None, min_paths: int = 1000) -> ScalingReport:
    """Fraction of paths with <eta, C eta> < eps, maximised over the eta set."""
    if paths < min_paths:
        raise ValueError(f"tail scaling needs at least {min_paths} paths")
    eps = geometric_eps() if eps is None else np.sort(np.asarray(eps, float))[::-1]
    etas = eta_directions(system.n, fixed, K, seed)
    ens = simulate_ensemble(system, x0, GridSpec(1.0, N), paths, seed, scheme, etas=etas, backend=backend)
    ok = ens.ok
    forms = np.einsum("ei,pij,ej->pe", etas, ens.C[ok], etas)
    counts = (forms[None, :, :] < eps[:, None, None]).sum(axis=1)  # (eps, eta)
    hits = counts.max(axis=1)
    fit = fit_loglog(eps, hits, int(ok.sum()), *fit_range)
    policy = f"max over {len(fixed)} fixed + {system.n} basis + {K} random directions"
    return ScalingReport(eps, hits, int(ok.sum()), fit, policy, int(seed),
                         float(forms.min()) if forms.size else math.nan,
                         {"excluded": ens.exploded, "N": N}, np.linalg.eigvalsh(ens.C[ok])[:, 0])


# ------------------------------------------------------------------ inverse moments


@dataclass(frozen=True)
class InverseMoment:
    estimate: float
    stderr: float
    used: int
    excluded: int
    decades: dict  # floor(log10 lambda_min) -> (count, share of the estimate)


def inverse_moment_estimate(samples, p: float) -> InverseMoment:
    """MC mean of lambda_min(C)^-p.  Finite mean requires the tail slope of
    P(lambda_min < eps) to exceed p, which the decade split makes visible."""
    lam = np.array([s.lambda_C if isinstance(s, CovarianceSample) else s for s in samples], float)
    good = lam > EIGEN_FLOOR
    v = lam[good] ** (-float(p))
    if v.size == 0:
        return InverseMoment(math.nan, math.nan, 0, int((~good).sum()), {})
    total = float(v.sum())
    dec: dict = {}
    for d in np.unique(np.floor(np.log10(lam[good]))):
        sel = np.floor(np.log10(lam[good])) == d
        dec[int(d)] = (int(sel.sum()), float(v[sel].sum() / total))
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return InverseMoment(float(v.mean()), se, int(v.size), int((~good).sum()), dec)


# ------------------------------------------------------------------ IBP probe


@dataclass(frozen=True)
class ProbeResult:
    lhs: float
    rhs: float
    z: float
    stderr: float
    paths: int
    excluded: int
    bumped: bool


def ibp_density_probe(system: SdeSystem, x0, G, j: int, spec: GridSpec, paths: int, seed: int,
                      bump: float = 1e-4, scheme: str = "stratonovich-heun", cond_max: float = COND_MAX,
                      backend: str | None = None, chunk: int = 20_000) -> ProbeResult:
    """E d_j G(X_T) against E G(X_T) delta(D X M^-1 e_j).  ``j`` is 1-based.

    The Skorokhod correction needs derivatives of D X M^-1 in every increment;
    they are taken by central bumps unless the system is affine with constant
    diffusions, where D X and M do not depend on the noise and the correction
    vanishes identically.
    """
    n = system.n
    if not 1 <= j <= n:
        raise IndexError(f"direction {j} outside 1..{n}")
    if isinstance(G, str):
        from .grammar import default_names, parse_expression

        G = parse_expression(G, default_names(n))
    G = E.as_expr(G)
    g, dg = scalar_function(G, n), scalar_function(E.diff(G, j - 1), n)
    fs = system.field_set()
    run = kernels.get(fs, backend)["ibp"]
    code = _scheme_code(scheme)
    x0 = np.asarray(x0, float)
    d_all, l_all, r_all = [], [], []
    excluded = exploded = 0
    for s in range(0, paths, chunk):
        idx = np.arange(s, min(paths, s + chunk), dtype=np.int64)
        P = idx.size
        xT, ito, corr, cond = np.empty((P, n)), np.empty(P), np.empty(P), np.empty(P)
        status = np.zeros(P, dtype=np.int64)
        run(x0, spec.dt, np.uint64(seed), idx, code, j - 1, float(bump), float(cond_max), not fs.affine, xT, ito,
            corr, cond, status)
        good = status == 0
        excluded += int(np.count_nonzero(status < 0))
        exploded += int(np.count_nonzero(status > 0))
        lhs = dg(xT[good].T)
        rhs = g(xT[good].T) * (ito[good] - corr[good])
        l_all.append(lhs)
        r_all.append(rhs)
        d_all.append(lhs - rhs)
    if (excluded + exploded) > EXCLUSION_ABORT * paths:
        raise ExclusionError(f"{excluded} ill-conditioned and {exploded} exploded paths out of {paths}")
    lhs, rhs, d = (np.concatenate(a) for a in (l_all, r_all, d_all))
    se = float(d.std(ddof=1) / math.sqrt(d.size))
    diff = float(d.mean())
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
    return ProbeResult(float(lhs.mean()), float(rhs.mean()), z, se, int(d.size), excluded + exploded,
                       not fs.affine)


# ------------------------------------------------------------------ KDE

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _kde_sorted(xs, h, grid, out):
    P = xs.shape[0]
    lo = 0
    for i in range(grid.shape[0]):
        g = grid[i]
        while lo < P and xs[lo] < g - 9.0 * h:
            lo += 1
        s = 0.0
        k = lo
        while k < P and xs[k] <= g + 9.0 * h:
            u = (g - xs[k]) / h
            s += math.exp(-0.5 * u * u)
            k += 1
        out[i] = s / (P * h * _SQRT_2PI)


def _kde_numpy(xs, h, grid, out, budget=2_000_000):
    P = xs.shape[0]
    a = np.searchsorted(xs, grid - 9.0 * h)
    b = np.searchsorted(xs, grid + 9.0 * h, side="right")
    i = 0
    while i < grid.size:
        # grow the block of grid points while the kernel matrix stays small
        j = i + 1
        while j < grid.size and (j + 1 - i) * (b[j] - a[i]) <= budget:
            j += 1
        u = (grid[i:j, None] - xs[None, a[i]:b[j - 1]]) / h
        k = np.where(np.abs(u) <= 9.0, np.exp(-0.5 * u * u), 0.0)
        out[i:j] = k.sum(axis=1) / (P * h * _SQRT_2PI)
        i = j


def kde_density(samples, bandwidth: float, grid, backend: str | None = None) -> np.ndarray:
    """Gaussian KDE on ``grid``; kernels truncated at 9 bandwidths."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    xs = np.sort(np.asarray(samples, float).ravel())
    grid = np.asarray(grid, float).ravel()
    order = np.argsort(grid, kind="stable")
    out = np.empty(grid.size)
    if _backend(backend) == "numba":
        _kde_sorted(xs, float(bandwidth), grid[order], out)
    else:
        _kde_numpy(xs, float(bandwidth), grid[order], out)
    res = np.empty_like(out)
    res[order] = out
    return res


def kde_mass_outside(samples, bandwidth: float, a: float, b: float) -> float:
    """Mass the KDE puts outside [a, b], integrated in closed form."""
    xs = np.asarray(samples, float).ravel()
    return float(np.mean(ndtr((a - xs) / bandwidth) + ndtr((xs - b) / bandwidth)))
