"""Symbolic vector fields on R^n, Lie brackets and the bracket-rank test."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import expr as E
from .grammar import parse_components

DEFAULT_RANK_TOL = 1e-9
# singular values below this are zero regardless of scale, e.g. cos(fl(pi/2))
RANK_ATOL = 1e-12
DEFAULT_GENERATION_CAP = 512


class DimensionError(ValueError):
    pass


class BracketExplosionError(RuntimeError):
    """A bracket generation exceeded the configured size cap."""


@dataclass(frozen=True, eq=False)
class VectorField:
    """n component expressions over x_1..x_n, plus an optional bracket word."""

    components: tuple[E.Expr, ...]
    label: str = field(default="")

    def __post_init__(self):
        comps = tuple(E.as_expr(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        n = len(comps)
        if n == 0:
            raise DimensionError("a vector field needs at least one component")
        for c in comps:
            bad = [i for i in E.variables(c) if i >= n]
            if bad:
                raise DimensionError(f"component references x{bad[0] + 1} but the dimension is {n}")

    @classmethod
    def parse(cls, text: str, names: Sequence[str] | None = None, label: str = "") -> "VectorField":
        return cls(tuple(parse_components(text, names)), label)

    @classmethod
    def constant(cls, vec, label: str = "") -> "VectorField":
        return cls(tuple(E.const(v) for v in vec), label)

    @classmethod
    def linear(cls, A, label: str = "") -> "VectorField":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        xs = [E.var(j) for j in range(n)]
        return cls(tuple(E.add(*(E.mul(E.const(A[i, j]), xs[j]) for j in range(n))) for i in range(n)), label)

    @property
    def n(self) -> int:
        return len(self.components)

    def __eq__(self, other) -> bool:
        return isinstance(other, VectorField) and self.components == other.components

    def __hash__(self) -> int:
        return hash(tuple(c.skey for c in self.components))

    def __repr__(self) -> str:
        body = " ; ".join(str(c) for c in self.components)
        return f"VectorField({body!r}{', ' + repr(self.label) if self.label else ''})"

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    @cached_property
    def jacobian(self) -> tuple[tuple[E.Expr, ...], ...]:
        """Symbolic matrix with entry (i, j) = d component_i / d x_j."""
        return tuple(tuple(E.diff(c, j) for j in range(self.n)) for c in self.components)

    def __call__(self, x) -> np.ndarray:
        return eval_field(self, x)

    def with_label(self, label: str) -> "VectorField":
        return VectorField(self.components, label)

    def __add__(self, other: "VectorField") -> "VectorField":
        _same_dim(self, other)
        return VectorField(tuple(E.add(a, b) for a, b in zip(self.components, other.components)))

    def scaled(self, c: float) -> "VectorField":
        return VectorField(tuple(E.mul(E.const(c), a) for a in self.components))

    def __neg__(self) -> "VectorField":
        return self.scaled(-1.0)


def _same_dim(*fields: VectorField) -> int:
    n = fields[0].n
    for f in fields[1:]:
        if f.n != n:
            raise DimensionError(f"dimension mismatch: {n} vs {f.n}")
    return n


def _check_point(field: VectorField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != field.n:
        raise DimensionError(f"point has length {x.shape[0]}, field dimension is {field.n}")
    return x


def eval_field(field: VectorField, x) -> np.ndarray:
    x = _check_point(field, x)
    memo: dict = {}
    out = [E.evaluate(c, x, memo) for c in field.components]
    return np.array(np.broadcast_arrays(*out), dtype=float) if x.ndim > 1 else np.array(out, dtype=float)


def jacobian_at(field: VectorField, x) -> np.ndarray:
    x = _check_point(field, x)
    memo: dict = {}
    return np.array([[E.evaluate(d, x, memo) for d in row] for row in field.jacobian], dtype=float)


def directional(field: VectorField, g: E.Expr) -> E.Expr:
    """The first-order operator A_U g = <U, grad g> applied symbolically."""
    return E.add(*(E.mul(u, E.diff(g, i)) for i, u in enumerate(field.components)))


def lie_bracket(U: VectorField, V: VectorField) -> VectorField:
    """[U, V] = DV U - DU V, canonicalized, labelled by the bracket word."""
    n = _same_dim(U, V)
    DU, DV = U.jacobian, V.jacobian
    comps = []
    for i in range(n):
        terms = []
        for j in range(n):
            terms.append(E.mul(DV[i][j], U.components[j]))
            terms.append(E.neg(E.mul(DU[i][j], V.components[j])))
        comps.append(E.add(*terms))
    label = f"[{U.label or '?'},{V.label or '?'}]"
    return VectorField(tuple(comps), label)


@dataclass(frozen=True)
class BracketFamily:
    """Cumulative bracket generations; ``generations[k]`` is the k-th set."""

    generations: tuple[tuple[VectorField, ...], ...]
    fields: tuple[VectorField, ...]  # V_0 .. V_m
    zero_brackets: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.fields[0].n

    @property
    def m(self) -> int:
        return len(self.fields) - 1

    @property
    def depth(self) -> int:
        return len(self.generations) - 1

    def new_at(self, k: int) -> tuple[VectorField, ...]:
        """Fields first appearing at level k."""
        if k == 0:
            return self.generations[0]
        return self.generations[k][len(self.generations[k - 1]) :]


def _labelled(fields: Sequence[VectorField]) -> tuple[VectorField, ...]:
    return tuple(f if f.label else f.with_label(f"V{i}") for i, f in enumerate(fields))


def build_bracket_family(fields: Sequence[VectorField], K: int, cap: int = DEFAULT_GENERATION_CAP) -> BracketFamily:
    """Generations 0..K of the bracket recursion.

    ``fields`` is ``[V_0, V_1, ..., V_m]``; the drift enters the recursion but
    not level zero.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    if len(fields) < 2:
        raise ValueError("need a drift and at least one diffusion field")
    fields = _labelled(fields)
    _same_dim(*fields)
    gen0: list[VectorField] = []
    for f in fields[1:]:
        if f not in gen0:
            gen0.append(f)
    family = BracketFamily((tuple(gen0),), fields)
    for _ in range(K):
        family = extend_family(family, cap)
    return family


def extend_family(family: BracketFamily, cap: int = DEFAULT_GENERATION_CAP) -> BracketFamily:
    """Add one generation.  Only the newest fields need bracketing, since
    older ones already contributed theirs."""
    seen = set(family.generations[-1])
    zeros = list(family.zero_brackets)
    new: list[VectorField] = []
    for U in family.new_at(family.depth):
        for Vj in family.fields:
            B = lie_bracket(U, Vj)
            if B.is_zero:
                zeros.append(B.label)
            if B in seen:
                continue
            seen.add(B)
            new.append(B)
    gen = family.generations[-1] + tuple(new)
    if len(gen) > cap:
        raise BracketExplosionError(f"generation {family.depth + 1} has {len(gen)} fields, cap is {cap}")
    return BracketFamily(family.generations + (gen,), family.fields, tuple(zeros))


def span_matrix(family: BracketFamily, k: int, x) -> np.ndarray:
    if k > family.depth:
        raise ValueError(f"level {k} not built (depth {family.depth})")
    cols = [eval_field(V, x) for V in family.generations[k]]
    return np.column_stack(cols)


def numerical_rank(A: np.ndarray, tol: float = DEFAULT_RANK_TOL, atol: float = RANK_ATOL) -> int:
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] <= atol:
        return 0
    return int(np.sum(s > max(tol * s[0], atol)))


def spanned_dimension(
    family: BracketFamily, k: int, x, tol: float = DEFAULT_RANK_TOL, atol: float = RANK_ATOL
) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return numerical_rank(span_matrix(family, k, x), tol, atol)


@dataclass(frozen=True)
class HormanderResult:
    """Pointwise outcome: ``level`` is k* or None when undetermined."""

    x: tuple[float, ...]
    level: int | None
    dimensions: tuple[int, ...]
    family: BracketFamily

    @property
    def satisfied(self) -> bool:
        return self.level is not None

    def describe(self) -> str:
        if self.satisfied:
            return f"satisfied at level k*={self.level}"
        return f"undetermined up to K={len(self.dimensions) - 1}"


def check_parabolic_hormander(
    fields: Sequence[VectorField],
    x,
    K_max: int = 4,
    tol: float = DEFAULT_RANK_TOL,
    cap: int = DEFAULT_GENERATION_CAP,
) -> HormanderResult:
    """Smallest level at which the brackets span R^n at ``x``.

    The condition is a union over all levels, so failure to span up to
    ``K_max`` is reported as undetermined, never as false.
    """
    if K_max < 1:
        raise ValueError("K_max must be at least 1")
    x = np.asarray(x, dtype=float)
    n = fields[0].n
    dims: list[int] = []
    family = build_bracket_family(fields, 0, cap)
    for k in range(K_max + 1):
        if k > family.depth:
            family = extend_family(family, cap)
        d = spanned_dimension(family, k, x, tol)
        dims.append(d)
        if d == n:
            return HormanderResult(tuple(x.tolist()), k, tuple(dims), family)
    return HormanderResult(tuple(x.tolist()), None, tuple(dims), family)


@dataclass(frozen=True)
class PointwiseReport:
    """Per-point results and the level needed uniformly over the points."""

    results: tuple[HormanderResult, ...]

    @property
    def level(self) -> int | None:
        levels = [r.level for r in self.results]
        return None if any(k is None for k in levels) else max(levels)

    @property
    def satisfied(self) -> bool:
        return self.level is not None


def check_hormander_points(
    fields: Sequence[VectorField],
    points,
    K_max: int = 4,
    tol: float = DEFAULT_RANK_TOL,
    cap: int = DEFAULT_GENERATION_CAP,
) -> PointwiseReport:
    """Run the pointwise check at each point.  Nothing is claimed between
    points: the condition is only ever verified where it is evaluated."""
    return PointwiseReport(tuple(check_parabolic_hormander(fields, x, K_max, tol, cap) for x in points))
