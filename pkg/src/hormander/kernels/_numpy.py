"""Pure-numpy kernels: the same entry points as the jitted ones, vectorized
over paths.  Internally every array carries the path axis last."""

from __future__ import annotations

import numpy as np

from ..compile import FieldSet
from ..rng import normals_from, path_keys, step_keys

HEUN, ITO_EULER = 0, 1
CHUNK = 4096


def build(fs: FieldSet) -> dict:
    n, m, q = fs.n, fs.m, fs.q
    f0, df0, f0i, df0i, g, dg, ex = (fs.py[k] for k in fs.NAMES)
    eye = np.eye(n)

    def fields(scheme, x):
        P = x.shape[-1]
        a, D0 = np.empty((n, P)), np.empty((n, n, P))
        G, DG = np.empty((n, m, P)), np.empty((m, n, n, P))
        (f0 if scheme == HEUN else f0i)(x, a)
        (df0 if scheme == HEUN else df0i)(x, D0)
        g(x, G)
        dg(x, DG)
        return a, D0, G, DG

    def stage(scheme, x, dt, dw):
        a, D0, G, DG = fields(scheme, x)
        inc = a * dt + np.einsum("icp,cp->ip", G, dw)
        L = D0 * dt + np.einsum("cijp,cp->ijp", DG, dw)
        return inc, L, G, DG

    def mm(A, B):
        return np.einsum("ikp,kjp->ijp", A, B)

    def step(scheme, x, J, Y, dt, dw, derivs=False):
        """One step for all paths; returns new (x, J, Y) and optionally A, B."""
        inc1, L1, G1, DG = stage(scheme, x, dt, dw)
        if scheme == ITO_EULER:
            T1 = -L1 + np.einsum("cikp,ckjp->ijp", DG, DG) * dt
            out = (x + inc1, J + mm(L1, J), Y + mm(Y, T1))
            if derivs:
                return out + (L1 + eye[:, :, None], G1)
            return out
        T1, T2 = mm(L1, J), mm(Y, L1)
        xt, Jt, Yt = x + inc1, J + T1, Y - T2
        inc2, L2, G2, _ = stage(scheme, xt, dt, dw)
        out = (x + 0.5 * (inc1 + inc2), J + 0.5 * (T1 + mm(L2, Jt)), Y - 0.5 * (T2 + mm(Yt, L2)))
        if derivs:
            A = eye[:, :, None] + 0.5 * (L1 + L2 + mm(L2, L1))
            B = 0.5 * (G1 + G2 + mm(L2, G1))
            return out + (A, B)
        return out

    def init(x0, P):
        x = np.repeat(np.asarray(x0, float)[:, None], P, axis=1)
        J = np.repeat(eye[:, :, None], P, axis=2)
        return x, J, J.copy()

    def path(x0, dt, dw, scheme, xs, Js, Ys):
        x, J, Y = init(x0, 1)
        xs[0], Js[0], Ys[0] = x[:, 0], J[..., 0], Y[..., 0]
        for k in range(dt.shape[0]):
            x, J, Y = step(scheme, x, J, Y, dt[k], dw[k][:, None])
            if not np.all(np.isfinite(x)):
                return k + 1
            xs[k + 1], Js[k + 1], Ys[k + 1] = x[:, 0], J[..., 0], Y[..., 0]
        return 0

    def draws(pk, k, sq):
        sk = step_keys(pk, k)
        return np.stack([sq * normals_from(sk, c) for c in range(m)])

    def ensemble_chunk(x0, dt, seed, paths, scheme, etas, zeta, xT, JT, C, zsq, zsup, xsup, drift, status):
        N, P = dt.shape[0], paths.shape[0]
        sq = np.sqrt(dt)
        pk = path_keys(seed, paths)
        x, J, Y = init(x0, P)
        alive = np.ones(P, dtype=bool)
        status[:] = 0

        def observe(x, J, Y, dtk, accumulate):
            live = alive[:]
            xsup[live] = np.maximum(xsup[live], np.abs(x[:, live]).max(axis=0))
            R = mm(J, Y) - eye[:, :, None]
            drift[live] = np.maximum(drift[live], np.sqrt((R[..., live] ** 2).sum(axis=(0, 1))))
            if q > 0:
                F = np.empty((q, n, P))
                ex(x, F)
                z = np.abs(np.einsum("i,ijp,rjp->rp", zeta, Y, F))
                zsup[live] = np.maximum(zsup[live], z[:, live].T)
            if accumulate:
                G = np.empty((n, m, P))
                g(x, G)
                Q = np.einsum("ijp,jcp->icp", Y, G)  # columns J^-1 V_c
                C[live] += (np.einsum("icp,jcp->pij", Q, Q) * dtk)[live]
                Z = np.einsum("ei,icp->pec", etas, Q)
                zsq[live] += ((Z**2).sum(axis=2) * dtk)[live]

        with np.errstate(all="ignore"):
            for k in range(N):
                observe(x, J, Y, dt[k], True)
                dw = draws(pk, k, sq[k])
                x, J, Y = step(scheme, x, J, Y, dt[k], dw)
                bad = alive & ~np.all(np.isfinite(x), axis=0)
                status[bad] = k + 1
                alive &= ~bad
                # keep dead paths finite so they cannot poison later arithmetic
                x[:, ~alive], J[..., ~alive], Y[..., ~alive] = 0.0, eye[:, :, None], eye[:, :, None]
            observe(x, J, Y, 0.0, False)
        xT[alive] = x[:, alive].T
        JT[alive] = np.moveaxis(J, 2, 0)[alive]

    def ensemble(x0, dt, seed, paths, scheme, etas, zeta, xT, JT, C, zsq, zsup, xsup, drift, status):
        for s in range(0, paths.shape[0], CHUNK):
            sl = slice(s, s + CHUNK)
            ensemble_chunk(x0, dt, seed, paths[sl], scheme, etas, zeta, xT[sl], JT[sl], C[sl], zsq[sl],
                           zsup[sl], xsup[sl], drift[sl], status[sl])

    def forward(x0, dt, dw, scheme, k0, xk):
        """Steps k0.. from states xk (n, P); returns xN, As, Bs, finite mask."""
        N, P = dt.shape[0], xk.shape[1]
        x = xk.copy()
        J = np.repeat(eye[:, :, None], P, axis=2)
        As = np.empty((N, n, n, P))
        Bs = np.empty((N, n, m, P))
        xs = np.empty((N + 1, n, P))
        xs[k0] = x
        for k in range(k0, N):
            x, J, _, As[k], Bs[k] = step(scheme, x, J, J, dt[k], dw[k], derivs=True)
            xs[k + 1] = x
        return xs, As, Bs, np.all(np.isfinite(xs[k0:]), axis=(0, 1))

    def partials(dt, As, Bs):
        N, P = dt.shape[0], As.shape[-1]
        Pm = np.repeat(eye[:, :, None], P, axis=2)
        DX = np.empty((N, n, m, As.shape[-1]))
        for k in range(N - 1, -1, -1):
            DX[k] = mm(Pm, Bs[k])
            Pm = mm(Pm, As[k])
        M = np.einsum("kicp,kjcp,k->ijp", DX, DX, dt)
        return DX, M

    def ibp_chunk(x0, dt, seed, paths, scheme, jdir, bump, cond_max, bumps, xT, ito, corr, cond, status):
        N, P = dt.shape[0], paths.shape[0]
        sq = np.sqrt(dt)
        pk = path_keys(seed, paths)
        dw = np.stack([draws(pk, k, sq[k]) for k in range(N)])  # (N, m, P)
        x, _, _ = init(x0, P)
        with np.errstate(all="ignore"):
            xs, As, Bs, ok = forward(x0, dt, dw, scheme, 0, x)
        status[:] = np.where(ok, 0, 1)
        DX, M = partials(dt, np.where(ok, As, 0.0), np.where(ok, Bs, 0.0))
        Mt = np.moveaxis(M, 2, 0)
        Mt[~ok] = np.eye(n)
        cnd = np.linalg.cond(Mt)
        cond[:] = cnd
        good = ok & (cnd < cond_max)
        status[ok & ~good] = -1
        Mt[~good] = np.eye(n)
        Minv = np.moveaxis(np.linalg.inv(Mt), 0, 2)  # (n, n, P)
        u = np.einsum("kicp,ip->kcp", DX, Minv[:, jdir])
        s_ito = np.einsum("kcp,kcp->p", u, dw)
        s_corr = np.zeros(P)
        with np.errstate(all="ignore"):
            for k in range(N if bumps else 0):
                for c in range(m):
                    res = []
                    for h in (bump, -bump):
                        dw[k, c] += h
                        xs2, As2, Bs2, ok2 = forward(x0, dt, dw, scheme, k, xs[k])
                        dw[k, c] -= h
                        status[good & ~ok2] = -2
                        As2[:k], Bs2[:k] = As[:k], Bs[:k]
                        res.append(partials(dt, As2, Bs2))
                    (DXp, Mp), (DXm, Mm) = res
                    dcol = (DXp[k, :, c] - DXm[k, :, c]) / (2.0 * bump)
                    dM = (Mp - Mm) / (2.0 * bump)
                    left = np.einsum("rp,rip->ip", DX[k, :, c], Minv)
                    du = np.einsum("ip,ip->p", dcol, Minv[:, jdir]) - np.einsum(
                        "ip,iap,ap->p", left, dM, Minv[:, jdir]
                    )
                    s_corr += du * dt[k]
        ito[:] = s_ito
        corr[:] = s_corr
        xT[:] = xs[N].T

    def ibp(x0, dt, seed, paths, scheme, jdir, bump, cond_max, bumps, xT, ito, corr, cond, status):
        step_ = max(1, CHUNK // max(1, dt.shape[0]))
        for s in range(0, paths.shape[0], step_):
            sl = slice(s, s + step_)
            ibp_chunk(x0, dt, seed, paths[sl], scheme, jdir, bump, cond_max, bumps, xT[sl], ito[sl], corr[sl],
                      cond[sl], status[sl])

    return {"path": path, "ensemble": ensemble, "ibp": ibp}
