"""Immutable, hash-consed expression trees over indexed real variables.

Nodes are interned on construction, so two structurally identical trees are
the same Python object and equality is identity.  Every constructor returns
the canonical form: sums and products are flattened, constants folded, like
terms and like factors collected, and operands ordered by a deterministic
structural key.  No division or root node exists, so every tree denotes an
entire function of its variables.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

CONST, VAR, ADD, MUL, POW, SIN, COS, EXP = range(8)
_KIND_NAMES = ("const", "var", "add", "mul", "pow", "sin", "cos", "exp")
_UNARY = {SIN: "sin", COS: "cos", EXP: "exp"}

_table: dict[tuple, "Expr"] = {}
_lock = threading.Lock()


class Expr:
    """A canonical expression node.  Build with the module constructors."""

    __slots__ = ("kind", "args", "value", "skey", "__weakref__")

    kind: int
    args: tuple["Expr", ...]
    value: object
    skey: int

    def __hash__(self) -> int:
        return self.skey

    def __eq__(self, other: object) -> bool:
        return self is other

    def __repr__(self) -> str:
        return f"Expr({to_string(self)})"

    def __str__(self) -> str:
        return to_string(self)

    def __reduce__(self):
        return (_rebuild, (self.kind, self.value, self.args))

    # arithmetic sugar; numbers are promoted to constants
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, k)

    @property
    def is_const(self) -> bool:
        return self.kind == CONST

    @property
    def is_zero(self) -> bool:
        return self.kind == CONST and self.value == 0.0


def _intern(kind: int, value, args: tuple[Expr, ...]) -> Expr:
    key = (kind, value, args)
    node = _table.get(key)
    if node is not None:
        return node
    node = object.__new__(Expr)
    node.kind = kind
    node.value = value
    node.args = args
    # tuple/int/float hashing is not salted, so this key is stable across runs
    node.skey = hash((kind, value, tuple(a.skey for a in args)))
    with _lock:
        return _table.setdefault(key, node)


def _rebuild(kind, value, args):
    if kind == CONST:
        return const(value)
    if kind == VAR:
        return var(value)
    if kind == ADD:
        return add(*args)
    if kind == MUL:
        return mul(*args)
    if kind == POW:
        return power(args[0], value)
    return _unary(kind, args[0])


def const(value: float) -> Expr:
    v = float(value)
    if not np.isfinite(v):
        raise ValueError(f"non-finite constant {value!r}")
    if v == 0.0:
        v = 0.0  # drop the sign of -0.0
    return _intern(CONST, v, ())


def var(index: int) -> Expr:
    if index < 0:
        raise ValueError("variable index must be non-negative")
    return _intern(VAR, int(index), ())


ZERO = const(0.0)
ONE = const(1.0)
MINUS_ONE = const(-1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)):
        return const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def _sortkey(e: Expr) -> int:
    return e.skey


def _split_coeff(t: Expr) -> tuple[float, Expr]:
    if t.kind == MUL and t.args[0].kind == CONST:
        rest = t.args[1:]
        core = rest[0] if len(rest) == 1 else _intern(MUL, None, rest)
        return t.args[0].value, core
    return 1.0, t


def _scale(core: Expr, c: float) -> Expr:
    if c == 1.0:
        return core
    factors = core.args if core.kind == MUL else (core,)
    return _intern(MUL, None, (const(c),) + factors)


def add(*terms: Expr) -> Expr:
    total = 0.0
    coeffs: dict[Expr, float] = {}
    stack = list(terms)
    while stack:
        t = as_expr(stack.pop())
        if t.kind == ADD:
            stack.extend(t.args)
        elif t.kind == CONST:
            total += t.value
        else:
            c, core = _split_coeff(t)
            coeffs[core] = coeffs.get(core, 0.0) + c
    out = sorted((_scale(core, c) for core, c in coeffs.items() if c != 0.0), key=_sortkey)
    if total != 0.0:
        out.insert(0, const(total))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return _intern(ADD, None, tuple(out))


def mul(*factors: Expr) -> Expr:
    scale = 1.0
    powers: dict[Expr, int] = {}
    stack = list(factors)
    while stack:
        f = as_expr(stack.pop())
        if f.kind == MUL:
            stack.extend(f.args)
        elif f.kind == CONST:
            scale *= f.value
        elif f.kind == POW:
            base = f.args[0]
            powers[base] = powers.get(base, 0) + f.value
        else:
            powers[f] = powers.get(f, 0) + 1
    if scale == 0.0:
        return ZERO
    out = sorted(
        (b if k == 1 else _intern(POW, k, (b,)) for b, k in powers.items() if k != 0),
        key=_sortkey,
    )
    if not out:
        return const(scale)
    if scale == 1.0:
        if len(out) == 1:
            return out[0]
        return _intern(MUL, None, tuple(out))
    return _intern(MUL, None, (const(scale),) + tuple(out))


def neg(a: Expr) -> Expr:
    return mul(MINUS_ONE, a)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def power(base: Expr, k: int) -> Expr:
    if isinstance(k, bool) or int(k) != k:
        raise ValueError("only integer exponents are supported")
    k = int(k)
    if k < 0:
        raise ValueError("negative exponents would introduce division")
    base = as_expr(base)
    if k == 0:
        return ONE
    if k == 1:
        return base
    if base.kind == CONST:
        return const(base.value**k)
    if base.kind == POW:
        return power(base.args[0], base.value * k)
    if base.kind == MUL:
        return mul(*(power(f, k) for f in base.args))
    return _intern(POW, k, (base,))


def _unary(kind: int, a: Expr) -> Expr:
    a = as_expr(a)
    if a.kind == CONST:
        fn = {SIN: np.sin, COS: np.cos, EXP: np.exp}[kind]
        return const(float(fn(a.value)))
    return _intern(kind, None, (a,))


def sin(a) -> Expr:
    return _unary(SIN, a)


def cos(a) -> Expr:
    return _unary(COS, a)


def exp(a) -> Expr:
    return _unary(EXP, a)


# ---------------------------------------------------------------- traversal


def topological(roots: Iterable[Expr]) -> list[Expr]:
    """All nodes reachable from ``roots``, children before parents."""
    order: list[Expr] = []
    seen: set[int] = set()
    for root in roots:
        stack: list[tuple[Expr, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                order.append(node)
                continue
            stack.append((node, True))
            for a in node.args:
                if id(a) not in seen:
                    stack.append((a, False))
    return order


_vars_cache: dict[Expr, frozenset] = {}


def variables(e: Expr) -> frozenset[int]:
    hit = _vars_cache.get(e)
    if hit is None:
        hit = frozenset(n.value for n in topological([e]) if n.kind == VAR)
        _vars_cache[e] = hit
    return hit


def node_count(roots: Iterable[Expr]) -> int:
    return len(topological(roots))


def substitute(e: Expr, mapping: Mapping[int, Expr], memo: dict | None = None) -> Expr:
    """Replace variables by expressions; unmapped variables stay put."""
    memo = {} if memo is None else memo
    for node in topological([e]):
        if node.kind == CONST:
            memo[node] = node
        elif node.kind == VAR:
            memo[node] = mapping.get(node.value, node)
        else:
            memo[node] = _rebuild(node.kind, node.value, tuple(memo[a] for a in node.args))
    return memo[e]


# interned nodes live for the whole process, so derivatives can be cached
# globally, keyed by (node, variable)
_diff_cache: dict[tuple[Expr, int], Expr] = {}


def diff(e: Expr, j: int) -> Expr:
    """Exact partial derivative with respect to variable ``j``."""
    hit = _diff_cache.get((e, j))
    if hit is not None:
        return hit
    if j not in variables(e):
        return ZERO
    memo = {}
    for node in topological([e]):
        cached = _diff_cache.get((node, j))
        if cached is not None:
            memo[node] = cached
            continue
        k = node.kind
        if k == CONST:
            d = ZERO
        elif k == VAR:
            d = ONE if node.value == j else ZERO
        elif k == ADD:
            d = add(*(memo[a] for a in node.args))
        elif k == MUL:
            terms = []
            args = node.args
            for i, a in enumerate(args):
                da = memo[a]
                if da.is_zero:
                    continue
                terms.append(mul(da, *args[:i], *args[i + 1 :]))
            d = add(*terms)
        elif k == POW:
            b = node.args[0]
            db = memo[b]
            d = ZERO if db.is_zero else mul(const(node.value), power(b, node.value - 1), db)
        elif k == SIN:
            a = node.args[0]
            d = mul(cos(a), memo[a])
        elif k == COS:
            a = node.args[0]
            d = neg(mul(sin(a), memo[a]))
        elif k == EXP:
            a = node.args[0]
            d = mul(node, memo[a])
        else:  # pragma: no cover
            raise AssertionError(k)
        memo[node] = d
        _diff_cache[(node, j)] = d
    return memo[e]


def evaluate(e: Expr, values, memo: dict | None = None):
    """Evaluate at ``values`` (indexable by variable index); numpy-broadcasting."""
    memo = {} if memo is None else memo
    for node in topological([e]):
        if id(node) in memo:
            continue
        k = node.kind
        if k == CONST:
            r = node.value
        elif k == VAR:
            r = values[node.value]
        else:
            a = [memo[id(c)] for c in node.args]
            if k == ADD:
                r = a[0]
                for t in a[1:]:
                    r = r + t
            elif k == MUL:
                r = a[0]
                for t in a[1:]:
                    r = r * t
            elif k == POW:
                r = a[0] ** node.value
            elif k == SIN:
                r = np.sin(a[0])
            elif k == COS:
                r = np.cos(a[0])
            else:
                r = np.exp(a[0])
        memo[id(node)] = r
    return memo[id(e)]


# ---------------------------------------------------------------- printing

_PREC = {ADD: 1, MUL: 2, POW: 3}


def to_string(e: Expr, names: Callable[[int], str] | Sequence[str] | None = None) -> str:
    """Render in the textual field grammar (round-trips through the parser)."""
    if names is None:
        namer = lambda i: f"x{i + 1}"  # noqa: E731
    elif callable(names):
        namer = names
    else:
        seq = list(names)
        namer = seq.__getitem__

    def fmt_const(v: float) -> str:
        return repr(v) if v != int(v) or abs(v) >= 1e16 else str(int(v))

    def go(node: Expr, parent_prec: int) -> str:
        k = node.kind
        if k == CONST:
            s = fmt_const(node.value)
            return f"({s})" if node.value < 0 and parent_prec > 0 else s
        if k == VAR:
            return namer(node.value)
        if k in _UNARY:
            return f"{_UNARY[k]}({go(node.args[0], 0)})"
        if k == POW:
            s = f"{go(node.args[0], 4)}^{node.value}"
        elif k == MUL:
            args = node.args
            lead = ""
            if args[0].kind == CONST and args[0].value == -1.0:
                lead, args = "-", args[1:]
            s = lead + "*".join(go(a, 2) for a in args)
            if lead and parent_prec >= 2:
                s = f"({s})"
                return s
        else:
            parts = [go(node.args[0], 1)]
            for a in node.args[1:]:
                t = go(a, 1)
                if t.startswith("-"):
                    parts.append(f"- {t[1:]}")
                elif t.startswith("(-") and a.kind == CONST:
                    parts.append(f"- {t[2:-1]}")
                else:
                    parts.append(f"+ {t}")
            s = " ".join(parts)
        return f"({s})" if _PREC[k] < parent_prec else s

    return go(e, 0)


# ---------------------------------------------------------------- codegen


def emit_assignments(
    targets: Sequence[tuple[str, Expr]],
    var_expr: Callable[[int], str],
    indent: str = "    ",
    np_name: str = "np",
) -> list[str]:
    """Straight-line code assigning each expression to its target string.

    Shared subtrees become temporaries.  The code only uses ``+ * **`` and
    ``np.sin/cos/exp``, so it runs unchanged on floats inside numba and on
    arrays under numpy.
    """
    roots = [e for _, e in targets]
    order = topological(roots)
    names: dict[int, str] = {}
    lines: list[str] = []
    used_vars = sorted({n.value for n in order if n.kind == VAR})
    for i in used_vars:
        lines.append(f"{indent}v{i} = {var_expr(i)}")
    tmp = 0
    for node in order:
        k = node.kind
        if k == CONST:
            names[id(node)] = f"({node.value!r})"
            continue
        if k == VAR:
            names[id(node)] = f"v{node.value}"
            continue
        a = [names[id(c)] for c in node.args]
        if k == ADD:
            rhs = " + ".join(a)
        elif k == MUL:
            rhs = " * ".join(a)
        elif k == POW:
            rhs = " * ".join([a[0]] * node.value) if node.value <= 4 else f"{a[0]} ** {node.value}"
        else:
            rhs = f"{np_name}.{_UNARY[k]}({a[0]})"
        name = f"t{tmp}"
        tmp += 1
        lines.append(f"{indent}{name} = {rhs}")
        names[id(node)] = name
    for target, e in targets:
        lines.append(f"{indent}{target} = {names[id(e)]}")
    return lines
