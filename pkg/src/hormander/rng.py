"""Counter-based Gaussian draws.

The draw for ``(seed, path, step, component)`` is a pure function of those
four integers: a SplitMix64-style finalizer is chained over them and two
53-bit uniforms feed a Box-Muller transform.  Paths can therefore be simulated
in any order, on any number of threads, and truncated grids reproduce the
prefix of longer ones.  The same arithmetic runs inside numba kernels
(``path_key`` / ``step_key`` / ``normal_from``) and vectorized under numpy
(``normals``).
"""

from __future__ import annotations

import numpy as np

from ._accel import njit

_U = np.uint64
_GAMMA = _U(0x9E3779B97F4A7C15)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = _U(30), _U(27), _U(31), _U(11)
_ONE, _TWO = _U(1), _U(2)
_SEED_SALT = _U(0x2545F4914F6CDD1D)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53
_TWO_PI = 2.0 * np.pi


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def path_key(seed, path):
    return _mix64(_mix64(_U(seed) ^ _SEED_SALT) + _U(path) * _GAMMA)


@njit(cache=True)
def step_key(pkey, k):
    return _mix64(pkey ^ (_U(k) * _GAMMA + _GAMMA))


@njit(cache=True)
def normal_from(skey, c):
    h1 = _mix64(skey + (_TWO * _U(c) + _ONE) * _GAMMA)
    h2 = _mix64(skey + (_TWO * _U(c) + _TWO) * _GAMMA)
    u1 = (float(h1 >> _S11) + 1.0) * _TO_UNIT
    u2 = float(h2 >> _S11) * _TO_UNIT
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


# ------------------------------------------------------------ numpy side


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def path_keys(seed: int, paths) -> np.ndarray:
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    with np.errstate(over="ignore"):
        s = _mix64_np(np.array([seed], dtype=np.uint64) ^ _SEED_SALT)
        return _mix64_np(s + paths * _GAMMA)


def step_keys(pkeys: np.ndarray, k: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix64_np(pkeys ^ (np.uint64(k) * _GAMMA + _GAMMA))


def normals_from(skeys: np.ndarray, c: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        h1 = _mix64_np(skeys + (_TWO * _U(c) + _ONE) * _GAMMA)
        h2 = _mix64_np(skeys + (_TWO * _U(c) + _TWO) * _GAMMA)
    u1 = ((h1 >> _S11).astype(np.float64) + 1.0) * _TO_UNIT
    u2 = (h2 >> _S11).astype(np.float64) * _TO_UNIT
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def normals(seed: int, paths, steps: int, m: int) -> np.ndarray:
    """Standard normals of shape ``(len(paths), steps, m)``."""
    pk = path_keys(seed, paths)
    out = np.empty((pk.size, steps, m))
    for k in range(steps):
        sk = step_keys(pk, k)
        for c in range(m):
            out[:, k, c] = normals_from(sk, c)
    return out
