"""Named test systems used by the CLI and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as E
from .sde import SdeSystem
from .vfield import VectorField


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    system: SdeSystem
    x0: np.ndarray
    test_points: tuple[tuple[float, ...], ...]
    params: dict = field(default_factory=dict)


def brownian(dim: int = 1) -> Scenario:
    """dX = dW in R^dim: elliptic, J = I."""
    n = int(dim)
    drift = VectorField.constant([0.0] * n, "V0")
    diff = tuple(VectorField.constant(np.eye(n)[i], f"V{i + 1}") for i in range(n))
    pts = ((0.0,) * n, (1.0,) * n, tuple(np.linspace(-1, 1, n)))
    return Scenario("brownian", SdeSystem(drift, diff, "brownian"), np.zeros(n), pts, {"dim": n})


def geometric(x0: float = 1.0) -> Scenario:
    """dX = X o dW, solved by X_t = x0 exp(W_t)."""
    x = E.var(0)
    sys = SdeSystem(VectorField((E.const(0.0),), "V0"), (VectorField((x,), "V1"),), "geometric")
    return Scenario("geometric", sys, np.array([float(x0)]), ((1.0,), (-2.0,)), {"x0": float(x0)})


def langevin(potential: float = 1.0, temperature: float = 1.0, dof: int = 1, quartic: float = 0.0,
             x0=None) -> Scenario:
    """Underdamped Langevin in (q, p):  dq = p dt,
    dp = (-V'(q) - p) dt + sqrt(2 T) dW  with  V(q) = a q^2/2 + b q^4/4."""
    d = int(dof)
    q = [E.var(i) for i in range(d)]
    p = [E.var(d + i) for i in range(d)]
    a, b = E.const(float(potential)), E.const(float(quartic))
    force = [E.neg(E.add(E.mul(a, qi), E.mul(b, E.power(qi, 3)))) for qi in q]
    drift = VectorField(tuple(p) + tuple(E.sub(f, pi) for f, pi in zip(force, p)), "V0")
    s = math.sqrt(2.0 * float(temperature))
    diff = tuple(VectorField.constant([0.0] * d + [s if j == i else 0.0 for j in range(d)], f"V{i + 1}")
                 for i in range(d))
    if x0 is None:
        x0 = [1.0] + [0.0] * (2 * d - 1)
    pts = (tuple(np.zeros(2 * d)), tuple(np.ones(2 * d)), tuple(np.asarray(x0, float)))
    params = {"potential": float(potential), "temperature": float(temperature), "dof": d, "quartic": float(quartic)}
    return Scenario("langevin", SdeSystem(drift, diff, "langevin"), np.asarray(x0, float), pts, params)


def counterexample() -> Scenario:
    """dX = -sin X dt + cos X o dW from 0; confined to [-pi/2, pi/2].
    Test points include the interval ends, where cos vanishes."""
    x = E.var(0)
    sys = SdeSystem(VectorField((E.neg(E.sin(x)),), "V0"), (VectorField((E.cos(x),), "V1"),), "counterexample")
    h = math.pi / 2
    return Scenario("counterexample", sys, np.zeros(1), ((0.0,), (h,), (-h,)))


def degenerate() -> Scenario:
    """n = 2, V_0 = 0, V_1 = e_1: every bracket vanishes and x_2 never moves."""
    sys = SdeSystem(VectorField.constant([0.0, 0.0], "V0"), (VectorField.constant([1.0, 0.0], "V1"),), "degenerate")
    return Scenario("degenerate", sys, np.zeros(2), ((0.0, 0.0), (1.0, -1.0)))


REGISTRY: dict[str, Callable[..., Scenario]] = {
    "brownian": brownian,
    "geometric": geometric,
    "langevin": langevin,
    "counterexample": counterexample,
    "degenerate": degenerate,
}


def get(name: str, **params) -> Scenario:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(REGISTRY)}") from None
    return factory(**params)
