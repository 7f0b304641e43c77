"""Immutable expression trees with exact rational constants.

Nodes are built through the smart constructors (``add``, ``mul``, ``power``,
``sin`` ...), which flatten, fold constants and collect like terms.  The
structural key of a node is its prefix serialization, so equality and
hashing are cheap once the key has been computed.
"""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

HEADS = ("num", "sym", "add", "mul", "pow", "sin", "cos", "exp", "log", "fn")
_RANK = {h: i for i, h in enumerate(HEADS)}
NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_']*$")


class UnknownSymbolError(ValueError):
    pass


def _fmt_num(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


class Expr:
    """A node of the expression tree.

    ``head`` is one of ``HEADS``.  ``value`` holds the payload: the rational
    for ``num``, the name for ``sym``, the exponent for ``pow`` and the tuple
    ``(name, var, order)`` for opaque function nodes ``fn``.
    """

    __slots__ = ("head", "args", "value", "_key", "_hash")

    def __init__(self, head: str, args: tuple = (), value=None):
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_key", None)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, val):
        raise AttributeError("Expr is immutable")

    # structural identity -------------------------------------------------
    def key(self) -> str:
        k = self._key
        if k is None:
            k = _serialize(self)
            object.__setattr__(self, "_key", k)
        return k

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self.key())
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction)):
                return self.head == "num" and self.value == other
            return NotImplemented
        if self.head != other.head:
            return False
        return self.key() == other.key()

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __repr__(self):
        return f"Expr({self.key()})"

    def __str__(self):
        from .serialize import to_infix

        return to_infix(self)

    def __reduce__(self):
        return (_rebuild, (self.head, self.args, self.value))

    # arithmetic ------------------------------------------------------------
    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return add(self, mul(-1, o))

    def __rsub__(self, o):
        return add(o, mul(-1, self))

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return mul(self, power(o, -1))

    def __rtruediv__(self, o):
        return mul(o, power(self, -1))

    def __pow__(self, e):
        return power(self, e)

    def __neg__(self):
        return mul(-1, self)

    def __pos__(self):
        return self

    # convenience -----------------------------------------------------------
    @property
    def is_number(self) -> bool:
        return self.head == "num"

    def is_zero(self) -> bool:
        return self.head == "num" and self.value == 0

    def diff(self, s) -> "Expr":
        from .calculus import differentiate

        return differentiate(self, s)

    def subs(self, mapping: Mapping) -> "Expr":
        from .calculus import substitute

        return substitute(self, mapping)


def _rebuild(head, args, value):
    return Expr(head, args, value)


def _serialize(e: Expr) -> str:
    h = e.head
    if h == "num":
        return _fmt_num(e.value)
    if h == "sym":
        return e.value
    if h == "add":
        return "(+ " + " ".join(a.key() for a in e.args) + ")"
    if h == "mul":
        return "(* " + " ".join(a.key() for a in e.args) + ")"
    if h == "pow":
        return f"(^ {e.args[0].key()} {_fmt_num(e.value)})"
    if h == "fn":
        name, var, order = e.value
        rule = f" {e.args[0].key()}" if e.args else ""
        return f"(fn {name} {var} {order}{rule})"
    return f"({h} {e.args[0].key()})"


def _sort_key(e: Expr):
    return (_RANK[e.head], e.key())


# atoms ---------------------------------------------------------------------

def as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        return Fraction(int(v))
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Rational):
        return Fraction(v.numerator, v.denominator)
    if isinstance(v, float):
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError("non-finite constant")
        return Fraction(repr(v))
    if isinstance(v, str):
        return Fraction(v)
    raise TypeError(f"cannot convert {type(v).__name__} to a rational constant")


_NUM_CACHE: dict = {}


def num(v) -> Expr:
    f = as_fraction(v)
    e = _NUM_CACHE.get(f)
    if e is None:
        e = Expr("num", (), f)
        if len(_NUM_CACHE) < 512:
            _NUM_CACHE[f] = e
    return e


ZERO = num(0)
ONE = num(1)


def sym(name: str) -> Expr:
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise UnknownSymbolError(f"invalid symbol name {name!r}")
    if name in ("fn", "sin", "cos", "exp", "log"):
        raise UnknownSymbolError(f"reserved name {name!r}")
    return Expr("sym", (), name)


def symbols(names: str) -> tuple:
    return tuple(sym(n) for n in names.replace(",", " ").split())


def fn(name: str, var: str = "t", order: int = 0, rule: Expr | None = None) -> Expr:
    """Opaque function of a single variable.

    With ``rule`` the node's derivative with respect to ``var`` is ``rule``;
    without one, differentiation produces the next-order derivative node.
    """
    if not NAME_RE.match(name) or not NAME_RE.match(var):
        raise UnknownSymbolError(f"invalid function node {name}({var})")
    if rule is not None:
        if order:
            raise ValueError("rule-carrying nodes have order 0")
        return Expr("fn", (ensure(rule),), (name, var, 0))
    return Expr("fn", (), (name, var, int(order)))


def fn_label(e: Expr) -> str:
    name, _, order = e.value
    return name + "'" * order


def ensure(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, str):
        return sym(v)
    return num(v)


# sums ------------------------------------------------------------------------

def _split_coeff(e: Expr):
    if e.head == "mul" and e.args[0].head == "num":
        rest = e.args[1:]
        if len(rest) == 1:
            return e.args[0].value, rest[0]
        return e.args[0].value, Expr("mul", rest)
    return Fraction(1), e


def _scaled(c: Fraction, e: Expr) -> Expr:
    if c == 1:
        return e
    if e.head == "mul":
        return Expr("mul", (num(c),) + e.args)
    return Expr("mul", (num(c), e))


def add(*terms) -> Expr:
    const = Fraction(0)
    coeffs: dict = {}
    order: list = []
    stack = list(terms)
    stack.reverse()
    while stack:
        t = ensure(stack.pop())
        if t.head == "add":
            stack.extend(reversed(t.args))
            continue
        if t.head == "num":
            const += t.value
            continue
        c, base = _split_coeff(t)
        k = base.key()
        if k in coeffs:
            coeffs[k][0] += c
        else:
            coeffs[k] = [c, base]
            order.append(k)
    out = []
    for k in order:
        c, base = coeffs[k]
        if c != 0:
            out.append(_scaled(c, base))
    if not out:
        return num(const)
    if const != 0:
        out.append(num(const))
    if len(out) == 1:
        return out[0]
    out.sort(key=_sort_key)
    return Expr("add", tuple(out))


# products ------------------------------------------------------------------

def mul(*factors) -> Expr:
    coef = Fraction(1)
    powers: dict = {}
    order: list = []
    stack = list(factors)
    stack.reverse()
    while stack:
        f = ensure(stack.pop())
        h = f.head
        if h == "mul":
            stack.extend(reversed(f.args))
            continue
        if h == "num":
            coef *= f.value
            if coef == 0:
                return ZERO
            continue
        if h == "pow":
            base, e = f.args[0], f.value
        else:
            base, e = f, Fraction(1)
        k = base.key()
        if k in powers:
            powers[k][1] += e
        else:
            powers[k] = [base, e]
            order.append(k)
    out = []
    refold = False
    for k in order:
        base, e = powers[k]
        if e == 0:
            continue
        p = power(base, e) if e != 1 else base
        if p.head == "num":
            coef *= p.value
        else:
            refold = refold or p.head == "mul"
            out.append(p)
    if coef == 0:
        return ZERO
    if refold:
        return mul(num(coef), *out)
    if not out:
        return num(coef)
    out.sort(key=_sort_key)
    if coef != 1:
        out.insert(0, num(coef))
    if len(out) == 1:
        return out[0]
    return Expr("mul", tuple(out))


# powers --------------------------------------------------------------------

def _iroot(n: int, q: int):
    """Exact integer q-th root of n >= 0, or None."""
    if n < 0:
        return None
    if n < 2:
        return n
    r = int(round(n ** (1.0 / q)))
    for c in (r - 1, r, r + 1):
        if c >= 0 and c ** q == n:
            return c
    # large integers: Newton on ints
    x = 1 << ((n.bit_length() + q - 1) // q)
    while True:
        y = ((q - 1) * x + n // x ** (q - 1)) // q
        if y >= x:
            break
        x = y
    return x if x ** q == n else None


def rational_root(v: Fraction, q: int):
    """Exact real q-th root of a rational, or None."""
    if v < 0:
        if q % 2 == 0:
            return None
        r = rational_root(-v, q)
        return None if r is None else -r
    a = _iroot(v.numerator, q)
    b = _iroot(v.denominator, q)
    if a is None or b is None:
        return None
    return Fraction(a, b)


def power(b, e) -> Expr:
    b = ensure(b)
    e = as_fraction(e) if not isinstance(e, Expr) else _exp_value(e)
    if e == 0:
        return ONE
    if e == 1:
        return b
    h = b.head
    if h == "num":
        v = b.value
        if v == 0:
            if e < 0:
                raise ZeroDivisionError("zero to a negative power")
            return ZERO
        if v == 1:
            return ONE
        if e.denominator == 1:
            return num(v ** e.numerator)
        r = rational_root(v, e.denominator)
        if r is not None:
            return num(r ** e.numerator)
        return Expr("pow", (b,), e)
    if h == "pow":
        a = b.value
        if a.denominator % 2 == 0 or e.denominator == 1:
            return power(b.args[0], a * e)
        return Expr("pow", (b,), e)
    if h == "mul":
        if e.denominator == 1:
            return mul(*[power(a, e) for a in b.args])
        c = b.args[0]
        if c.head == "num" and c.value > 0:
            rest = b.args[1:]
            rest_e = rest[0] if len(rest) == 1 else Expr("mul", rest)
            return mul(power(c, e), power(rest_e, e))
        return Expr("pow", (b,), e)
    if h == "exp":
        return exp(mul(num(e), b.args[0]))
    return Expr("pow", (b,), e)


def _exp_value(e: Expr) -> Fraction:
    if e.head != "num":
        raise TypeError("only rational exponents are supported")
    return e.value


def sqrt(b) -> Expr:
    return power(b, Fraction(1, 2))


# elementary functions --------------------------------------------------------

def _neg_coeff(u: Expr) -> bool:
    if u.head == "num":
        return u.value < 0
    if u.head == "mul" and u.args[0].head == "num":
        return u.args[0].value < 0
    if u.head == "add":
        return _neg_coeff(u.args[0]) if u.args[0].head != "num" else _neg_coeff(u.args[1])
    return False


def sin(u) -> Expr:
    u = ensure(u)
    if u.head == "num" and u.value == 0:
        return ZERO
    if _neg_coeff(u):
        return mul(-1, Expr("sin", (mul(-1, u),)))
    return Expr("sin", (u,))


def cos(u) -> Expr:
    u = ensure(u)
    if u.head == "num" and u.value == 0:
        return ONE
    if _neg_coeff(u):
        return Expr("cos", (mul(-1, u),))
    return Expr("cos", (u,))


def exp(u) -> Expr:
    u = ensure(u)
    if u.head == "num" and u.value == 0:
        return ONE
    if u.head == "log":
        return u.args[0]
    if u.head == "mul" and len(u.args) == 2 and u.args[0].head == "num" and u.args[1].head == "log":
        return power(u.args[1].args[0], u.args[0].value)
    return Expr("exp", (u,))


def log(u) -> Expr:
    u = ensure(u)
    if u.head == "num":
        if u.value <= 0:
            raise ValueError("log of a non-positive constant")
        if u.value == 1:
            return ZERO
    if u.head == "exp":
        return u.args[0]
    return Expr("log", (u,))


# queries -------------------------------------------------------------------

def walk(e: Expr) -> Iterable[Expr]:
    """Pre-order traversal visiting each distinct subtree once."""
    seen = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        yield n
        stack.extend(n.args)


def free_symbols(e: Expr) -> set:
    out = set()
    for n in walk(e):
        if n.head == "sym":
            out.add(n.value)
    return out


def opaque_nodes(e: Expr) -> list:
    """Opaque function nodes, deduplicated, in a deterministic order."""
    found = {}
    for n in walk(e):
        if n.head == "fn":
            found[n.key()] = n
    return [found[k] for k in sorted(found)]


def depends_on(e: Expr, name: str) -> bool:
    for n in walk(e):
        if n.head == "sym" and n.value == name:
            return True
        if n.head == "fn" and n.value[1] == name:
            return True
    return False


def terms(e: Expr) -> tuple:
    return e.args if e.head == "add" else (e,)


def count_nodes(e: Expr) -> int:
    return sum(1 for _ in walk(e))
