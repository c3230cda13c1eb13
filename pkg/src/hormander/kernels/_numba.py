"""Jitted per-path loops.  One set of kernels is compiled per FieldSet."""

from __future__ import annotations

import numpy as np

from .._accel import numba, njit
from ..compile import FieldSet
from ..rng import normal_from, path_key, step_key

HEUN, ITO_EULER = 0, 1


def build(fs: FieldSet) -> dict:
    n, m, q = fs.n, fs.m, fs.q
    jf = fs.jit
    f0, df0, f0i, df0i, g, dg, ex = (jf[k] for k in fs.NAMES)

    @njit
    def stage(scheme, x, dt, dw, a, G, D0, DG, inc, L):
        """Field values at x and the step maps inc = f dt + G dw, L = Df."""
        if scheme == HEUN:
            f0(x, a)
            df0(x, D0)
        else:
            f0i(x, a)
            df0i(x, D0)
        g(x, G)
        dg(x, DG)
        for i in range(n):
            s = a[i] * dt
            for c in range(m):
                s += G[i, c] * dw[c]
            inc[i] = s
            for j in range(n):
                s = D0[i, j] * dt
                for c in range(m):
                    s += DG[c, i, j] * dw[c]
                L[i, j] = s

    @njit
    def matmul(A, B, out):
        for i in range(A.shape[0]):
            for j in range(B.shape[1]):
                s = 0.0
                for k in range(A.shape[1]):
                    s += A[i, k] * B[k, j]
                out[i, j] = s

    @njit
    def step(scheme, x, J, Y, dt, dw, w, A, B):
        """Advance (x, J, J^-1) over one increment; A, B get the exact
        derivatives of the step map with respect to x and dw."""
        a, G1, D0, DG, inc1, L1, G2, inc2, L2, xt, Jt, Yt, T1, T2, T3, T4 = w
        stage(scheme, x, dt, dw, a, G1, D0, DG, inc1, L1)
        if scheme == ITO_EULER:
            # Ito form of the inverse flow: dY = Y(-L + sum DG_c DG_c dt)
            for i in range(n):
                for j in range(n):
                    s = -L1[i, j]
                    for c in range(m):
                        for k in range(n):
                            s += DG[c, i, k] * DG[c, k, j] * dt
                    T1[i, j] = s
            matmul(L1, J, T2)
            matmul(Y, T1, T3)
            for i in range(n):
                x[i] += inc1[i]
                for j in range(n):
                    J[i, j] += T2[i, j]
                    Y[i, j] += T3[i, j]
                    A[i, j] = L1[i, j] + (1.0 if i == j else 0.0)
                for c in range(m):
                    B[i, c] = G1[i, c]
            return
        matmul(L1, J, T1)  # L1 J
        matmul(Y, L1, T2)  # Y L1
        for i in range(n):
            xt[i] = x[i] + inc1[i]
            for j in range(n):
                Jt[i, j] = J[i, j] + T1[i, j]
                Yt[i, j] = Y[i, j] - T2[i, j]
        stage(scheme, xt, dt, dw, a, G2, D0, DG, inc2, L2)
        matmul(L2, Jt, T3)
        matmul(Yt, L2, T4)
        for i in range(n):
            x[i] += 0.5 * (inc1[i] + inc2[i])
            for j in range(n):
                J[i, j] += 0.5 * (T1[i, j] + T3[i, j])
                Y[i, j] -= 0.5 * (T2[i, j] + T4[i, j])
        # A = I + (L1 + L2 (I + L1)) / 2 ;  B_c = (G1_c + G2_c + L2 G1_c) / 2
        matmul(L2, L1, T3)
        for i in range(n):
            for j in range(n):
                A[i, j] = 0.5 * (L1[i, j] + L2[i, j] + T3[i, j]) + (1.0 if i == j else 0.0)
            for c in range(m):
                s = G1[i, c] + G2[i, c]
                for k in range(n):
                    s += L2[i, k] * G1[k, c]
                B[i, c] = 0.5 * s

    @njit
    def workspace():
        return (
            np.empty(n), np.empty((n, m)), np.empty((n, n)), np.empty((m, n, n)),
            np.empty(n), np.empty((n, n)), np.empty((n, m)), np.empty(n), np.empty((n, n)),
            np.empty(n), np.empty((n, n)), np.empty((n, n)),
            np.empty((n, n)), np.empty((n, n)), np.empty((n, n)), np.empty((n, n)),
        )

    @njit
    def all_finite(x):
        for i in range(x.shape[0]):
            if not np.isfinite(x[i]):
                return False
        return True

    @njit
    def path(x0, dt, dw, scheme, xs, Js, Ys):
        """Store the whole trajectory; returns 0 or (failing step + 1)."""
        N = dt.shape[0]
        w = workspace()
        A = np.empty((n, n))
        B = np.empty((n, m))
        x = x0.copy()
        J = np.eye(n)
        Y = np.eye(n)
        xs[0] = x
        Js[0] = J
        Ys[0] = Y
        for k in range(N):
            step(scheme, x, J, Y, dt[k], dw[k], w, A, B)
            if not all_finite(x):
                return k + 1
            xs[k + 1] = x
            Js[k + 1] = J
            Ys[k + 1] = Y
        return 0

    @njit
    def observe(x, J, Y, dt, etas, zeta, p, G, F, col, C, zsq, zsup, xsup, drift, accumulate):
        """Grid-point observations; quadrature terms only when accumulating."""
        E = etas.shape[0]
        for i in range(n):
            if abs(x[i]) > xsup[p]:
                xsup[p] = abs(x[i])
        s = 0.0
        for i in range(n):
            for j in range(n):
                r = -1.0 if i == j else 0.0
                for k in range(n):
                    r += J[i, k] * Y[k, j]
                s += r * r
        s = np.sqrt(s)
        if s > drift[p]:
            drift[p] = s
        if q > 0:
            ex(x, F)
            for r in range(q):
                z = 0.0
                for i in range(n):
                    for j in range(n):
                        z += zeta[i] * Y[i, j] * F[r, j]
                if abs(z) > zsup[p, r]:
                    zsup[p, r] = abs(z)
        if accumulate:
            g(x, G)
            for c in range(m):
                # column c of Y G, i.e. J^-1 V_c(x)
                for i in range(n):
                    col[i] = 0.0
                    for j in range(n):
                        col[i] += Y[i, j] * G[j, c]
                for i in range(n):
                    for j in range(n):
                        C[p, i, j] += col[i] * col[j] * dt
                for e in range(E):
                    z = 0.0
                    for i in range(n):
                        z += etas[e, i] * col[i]
                    zsq[p, e] += z * z * dt

    @njit(parallel=True)
    def ensemble(x0, dt, seed, paths, scheme, etas, zeta, xT, JT, C, zsq, zsup, xsup, drift, status):
        N = dt.shape[0]
        P = paths.shape[0]
        sq = np.sqrt(dt)
        for p in numba.prange(P):
            w = workspace()
            A = np.empty((n, n))
            B = np.empty((n, m))
            G = np.empty((n, m))
            F = np.empty((max(q, 1), n))
            col = np.empty(n)
            dw = np.empty(m)
            x = x0.copy()
            J = np.eye(n)
            Y = np.eye(n)
            pk = path_key(seed, paths[p])
            status[p] = 0
            for k in range(N):
                observe(x, J, Y, dt[k], etas, zeta, p, G, F, col, C, zsq, zsup, xsup, drift, True)
                sk = step_key(pk, k)
                for c in range(m):
                    dw[c] = sq[k] * normal_from(sk, c)
                step(scheme, x, J, Y, dt[k], dw, w, A, B)
                if not all_finite(x):
                    status[p] = k + 1
                    break
            if status[p] != 0:
                continue
            observe(x, J, Y, 0.0, etas, zeta, p, G, F, col, C, zsq, zsup, xsup, drift, False)
            for i in range(n):
                xT[p, i] = x[i]
                for j in range(n):
                    JT[p, i, j] = J[i, j]

    @njit
    def forward(x0, dt, dw, scheme, k0, xs, As, Bs, w, J, Y):
        """Re-run steps k0.. from the stored state xs[k0]; fills xs, As, Bs."""
        N = dt.shape[0]
        x = xs[k0].copy()
        for k in range(k0, N):
            step(scheme, x, J, Y, dt[k], dw[k], w, As[k], Bs[k])
            if not all_finite(x):
                return k + 1
            for i in range(n):
                xs[k + 1, i] = x[i]
        return 0

    @njit
    def partials(dt, As, Bs, DX, M, P, T):
        """DX[k] = A_{N-1} ... A_{k+1} B_k, and M = sum_k DX[k] DX[k]^T dt_k."""
        N = dt.shape[0]
        for i in range(n):
            for j in range(n):
                P[i, j] = 1.0 if i == j else 0.0
                M[i, j] = 0.0
        for k in range(N - 1, -1, -1):
            matmul(P, Bs[k], DX[k])
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for c in range(m):
                        s += DX[k, i, c] * DX[k, j, c]
                    M[i, j] += s * dt[k]
            matmul(P, As[k], T)
            for i in range(n):
                for j in range(n):
                    P[i, j] = T[i, j]

    @njit(parallel=True)
    def ibp(x0, dt, seed, paths, scheme, jdir, bump, cond_max, bumps, xT, ito, corr, cond, status):
        N = dt.shape[0]
        Pn = paths.shape[0]
        sq = np.sqrt(dt)
        for p in numba.prange(Pn):
            w = workspace()
            J = np.eye(n)
            Y = np.eye(n)
            xs = np.empty((N + 1, n))
            As = np.empty((N, n, n))
            Bs = np.empty((N, n, m))
            As2 = np.empty((N, n, n))
            Bs2 = np.empty((N, n, m))
            xs2 = np.empty((N + 1, n))
            DX = np.empty((N, n, m))
            DX2 = np.empty((N, n, m))
            M = np.empty((n, n))
            Mp = np.empty((n, n))
            Mm = np.empty((n, n))
            Pm = np.empty((n, n))
            T = np.empty((n, n))
            dcol = np.empty(n)
            dw = np.empty((N, m))
            pk = path_key(seed, paths[p])
            for k in range(N):
                sk = step_key(pk, k)
                for c in range(m):
                    dw[k, c] = sq[k] * normal_from(sk, c)
            xs[0] = x0
            status[p] = forward(x0, dt, dw, scheme, 0, xs, As, Bs, w, J, Y)
            if status[p] != 0:
                continue
            partials(dt, As, Bs, DX, M, Pm, T)
            cnd = np.linalg.cond(M)
            cond[p] = cnd
            if not (cnd < cond_max):
                status[p] = -1
                continue
            Minv = np.linalg.inv(M)
            s_ito = 0.0
            for k in range(N):
                for c in range(m):
                    u = 0.0
                    for i in range(n):
                        u += DX[k, i, c] * Minv[i, jdir]
                    s_ito += u * dw[k, c]
            s_corr = 0.0
            for k in range(N if bumps else 0):
                for c in range(m):
                    # central bump of increment (k, c): d/dw of DX[k][:, c] and of M
                    for sgn in range(2):
                        h = bump if sgn == 0 else -bump
                        for kk in range(N):
                            for i in range(n):
                                for j in range(n):
                                    As2[kk, i, j] = As[kk, i, j]
                                for cc in range(m):
                                    Bs2[kk, i, cc] = Bs[kk, i, cc]
                        for kk in range(k + 1):
                            for i in range(n):
                                xs2[kk, i] = xs[kk, i]
                        dw[k, c] += h
                        st = forward(x0, dt, dw, scheme, k, xs2, As2, Bs2, w, J, Y)
                        dw[k, c] -= h
                        if st != 0:
                            status[p] = -2
                        partials(dt, As2, Bs2, DX2, Mp if sgn == 0 else Mm, Pm, T)
                        for i in range(n):
                            if sgn == 0:
                                dcol[i] = DX2[k, i, c]
                            else:
                                dcol[i] = (dcol[i] - DX2[k, i, c]) / (2.0 * bump)
                    # du = dDX^T Minv e_j - DX^T Minv dM Minv e_j
                    du = 0.0
                    for i in range(n):
                        du += dcol[i] * Minv[i, jdir]
                    for i in range(n):
                        for a in range(n):
                            dm_ia = (Mp[i, a] - Mm[i, a]) / (2.0 * bump)
                            left = 0.0
                            for r in range(n):
                                left += DX[k, r, c] * Minv[r, i]
                            du -= left * dm_ia * Minv[a, jdir]
                    s_corr += du * dt[k]
            ito[p] = s_ito
            corr[p] = s_corr
            for i in range(n):
                xT[p, i] = xs[N, i]

    return {"path": path, "ensemble": ensemble, "ibp": ibp}
