"""Closed-form references for the simulation layer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .rng import normals
from .scenarios import geometric, langevin
from .sde import GridSpec, SimulationError, simulate_ensemble


def geometric_strong_error(N: int, paths: int, seed: int, x0: float = 1.0, T: float = 1.0,
                           scheme: str = "stratonovich-heun") -> float:
    """E|X_T - x0 exp(W_T)| for dX = X o dW."""
    sc = geometric(x0)
    spec = GridSpec(T, N)
    ens = simulate_ensemble(sc.system, sc.x0, spec, paths, seed, scheme)
    if ens.exploded:
        raise SimulationError(-1, f"{ens.exploded} paths exploded")
    W = (normals(seed, np.arange(paths), N, 1)[:, :, 0] * np.sqrt(spec.dt)).sum(axis=1)
    return float(np.mean(np.abs(ens.xT[:, 0] - x0 * np.exp(W))))


def convergence_table(exponents=(6, 7, 8, 9, 10), paths: int = 1000, seed: int = 0) -> list[tuple[float, float]]:
    """(h, strong error) for h = 2^-e."""
    return [(2.0**-e, geometric_strong_error(2**e, paths, seed)) for e in exponents]


def linear_moments(A: np.ndarray, B: np.ndarray, x0, T: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance at T of dX = A X dt + B dW (Van Loan's block exponential)."""
    n = A.shape[0]
    Q = B @ B.T
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n], blk[:n, n:], blk[n:, n:] = -A, Q, A.T
    F = expm(blk * T)
    eAT = F[n:, n:].T
    cov = eAT @ F[:n, n:]
    return eAT @ np.asarray(x0, float), 0.5 * (cov + cov.T)


def langevin_matrices(potential: float = 1.0, temperature: float = 1.0, dof: int = 1):
    d = int(dof)
    A = np.block([[np.zeros((d, d)), np.eye(d)], [-potential * np.eye(d), -np.eye(d)]])
    B = np.vstack([np.zeros((d, d)), math.sqrt(2.0 * temperature) * np.eye(d)])
    return A, B


@dataclass(frozen=True)
class MomentCheck:
    mean: np.ndarray
    mean_ref: np.ndarray
    mean_z: np.ndarray
    cov: np.ndarray
    cov_ref: np.ndarray
    cov_z: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return float(max(np.abs(self.mean_z).max(), np.abs(self.cov_z).max()))


def langevin_moment_check(paths: int, seed: int, N: int = 256, T: float = 1.0, **params) -> MomentCheck:
    sc = langevin(**params)
    ens = simulate_ensemble(sc.system, sc.x0, GridSpec(T, N), paths, seed)
    if ens.exploded:
        raise SimulationError(-1, f"{ens.exploded} paths exploded")
    A, B = langevin_matrices(sc.params["potential"], sc.params["temperature"], sc.params["dof"])
    m_ref, c_ref = linear_moments(A, B, sc.x0, T)
    X = ens.xT
    P = X.shape[0]
    m = X.mean(axis=0)
    mz = (m - m_ref) / (X.std(axis=0, ddof=1) / math.sqrt(P))
    # centre at the exact mean so each covariance entry is a plain sample mean
    D = X - m_ref
    prod = D[:, :, None] * D[:, None, :]
    cov = prod.mean(axis=0)
    cz = (cov - c_ref) / (prod.std(axis=0, ddof=1) / math.sqrt(P))
    return MomentCheck(m, m_ref, mz, cov, c_ref, cz)
