"""Exact algebraic normal forms for expressions.

Expressions are mapped to fractions of polynomials whose generators are the
symbols plus *atoms*: opaque nodes, ``log``/``exp``/``sin``/``cos`` of an
argument, and square roots of polynomials.  The algebraic relations that are
known exactly are applied while multiplying:

* ``R**2 -> P`` for a square-root atom ``R`` of the polynomial ``P``;
* ``cos(u)**2 -> 1 - sin(u)**2``;
* ``exp(a*w) * exp(b*w) -> exp((a+b)*w)`` by giving each exponent base one atom.

A fraction with zero numerator after these reductions is identically zero.
The converse needs the atoms to be independent; for square roots this is
certified (no product of radicands may be a perfect square), other atoms
are transcendental over the rest by construction.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from itertools import combinations

from .calculus import expand
from .expr import Expr, fn_label, rational_root, walk
from .poly import ONE_MONO, Poly, mono_mul, poly_str


class NotRational(ValueError):
    """The expression has no exact rational normal form under the supported relations."""


class _F:
    """Fraction with a factored denominator {Poly: exponent}."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: dict | None = None):
        self.num = num
        self.den = den or {}

    def den_poly(self) -> Poly:
        out = Poly.const(1)
        for f, e in self.den.items():
            out = out * f ** e
        return out


class _Context:
    def __init__(self, expr: Expr):
        self.radicals: dict = {}      # var name -> radicand Poly
        self.trig: dict = {}          # base key -> (sin var, cos var)
        self.trig_coef: dict = {}     # base key -> coefficient used
        self.exp_scale: dict = {}     # base key -> lcm of coefficient denominators
        self.memo: dict = {}
        self.atoms: dict = {}         # var name -> description
        self._prescan(expr)

    # exponent bases ------------------------------------------------------------
    def _prescan(self, e: Expr):
        for n in walk(e):
            if n.head == "exp":
                for c, w in _linear_terms(n.args[0]):
                    k = w.key()
                    self.exp_scale[k] = _lcm(self.exp_scale.get(k, 1), c.denominator)

    # reductions ----------------------------------------------------------------
    def reduce(self, p: Poly) -> Poly:
        if not p.terms:
            return p
        vs = p.variables()
        for r, rad in self.radicals.items():
            if r in vs:
                p = p.reduce_power(r, 2, rad)
        for s, c in self.trig.values():
            if c in vs:
                p = p.reduce_power(c, 2, Poly.const(1) - Poly.var(s, 2))
        return p

    # fraction arithmetic ---------------------------------------------------------
    def add(self, a: _F, b: _F) -> _F:
        if not a.num.terms:
            return b
        if not b.num.terms:
            return a
        if a.den == b.den:
            return _F(a.num + b.num, dict(a.den))
        den = dict(a.den)
        for f, e in b.den.items():
            if den.get(f, 0) < e:
                den[f] = e
        na = a.num
        for f, e in den.items():
            k = e - a.den.get(f, 0)
            if k:
                na = na * f ** k
        nb = b.num
        for f, e in den.items():
            k = e - b.den.get(f, 0)
            if k:
                nb = nb * f ** k
        return _F(na + nb, den)

    def mul(self, a: _F, b: _F) -> _F:
        if not a.num.terms or not b.num.terms:
            return _F(Poly())
        den = dict(a.den)
        for f, e in b.den.items():
            den[f] = den.get(f, 0) + e
        return _F(self.reduce(a.num * b.num), den)

    def inv(self, a: _F) -> _F:
        p = a.num
        if not p.terms:
            raise ZeroDivisionError("division by an expression that is identically zero")
        num = a.den_poly()
        for r in sorted(self.radicals):
            if r in p.variables():
                conj = p.substitute(r, Poly.var(r).scale(-1))
                num = self.reduce(num * conj)
                p = self.reduce(p * conj)
        den: dict = {}
        m = p.monomial_content()
        if m:
            p = p.div_monomial(m)
            for v, e in m:
                den[Poly.var(v)] = den.get(Poly.var(v), 0) + e
        lc, p = p.normalized()
        if not p.is_const():
            den[p] = den.get(p, 0) + 1
        return _F(num.scale(1 / lc), den)

    def pow_int(self, a: _F, n: int) -> _F:
        if n < 0:
            return self.pow_int(self.inv(a), -n)
        out = _F(Poly.const(1))
        base = a
        while n:
            if n & 1:
                out = self.mul(out, base)
            n >>= 1
            if n:
                base = self.mul(base, base)
        return out

    # atoms -----------------------------------------------------------------------
    def atom(self, name: str, desc: str) -> _F:
        self.atoms.setdefault(name, desc)
        return _F(Poly.var(name))

    def sqrt(self, a: _F) -> _F:
        if a.den:
            raise NotRational("square root of a fraction with a non-constant denominator")
        p = a.num
        if not p.terms:
            return _F(Poly())
        bad = p.variables() & (set(self.radicals) | {v for pair in self.trig.values() for v in pair})
        if bad:
            raise NotRational("nested radical or trigonometric radicand")
        lc, mon = p.normalized()
        if lc < 0:
            mon = mon.scale(-1)
            lc = -lc
        root = rational_root(lc, 2)
        out = _F(Poly.const(1))
        if root is not None:
            scale = root
        else:
            scale, free = _square_split(lc)
            out = self._radical(Poly.const(free))
        if not (mon.is_const() and mon.const_value() == 1):
            out = self.mul(out, self._radical(mon))
        return _F(out.num.scale(scale), out.den)

    def _radical(self, p: Poly) -> _F:
        if p.is_const() and p.const_value() == 1:
            return _F(Poly.const(1))
        name = "sqrt[" + poly_str(p) + "]"
        self.radicals.setdefault(name, p)
        self.atoms.setdefault(name, "sqrt")
        return _F(Poly.var(name))

    # conversion --------------------------------------------------------------------
    def convert(self, e: Expr) -> _F:
        k = e.key()
        hit = self.memo.get(k)
        if hit is not None:
            return hit
        r = self._convert(e)
        self.memo[k] = r
        return r

    def _convert(self, e: Expr) -> _F:
        h = e.head
        if h == "num":
            return _F(Poly.const(e.value))
        if h == "sym":
            return _F(Poly.var(e.value))
        if h == "fn":
            return self.atom("fn[" + e.key() + "]", fn_label(e))
        if h == "add":
            acc = _F(Poly())
            for a in e.args:
                acc = self.add(acc, self.convert(a))
            return acc
        if h == "mul":
            acc = _F(Poly.const(1))
            for a in e.args:
                acc = self.mul(acc, self.convert(a))
            return acc
        if h == "pow":
            p = e.value
            if p.denominator not in (1, 2):
                raise NotRational(f"exponent {p} is not a half-integer")
            base = self.convert(e.args[0])
            n = math.floor(p)
            out = self.pow_int(base, n) if n else _F(Poly.const(1))
            if p.denominator == 2:
                out = self.mul(out, self.sqrt(base))
            return out
        if h == "log":
            return self.atom("log[" + e.args[0].key() + "]", "log")
        if h in ("sin", "cos"):
            u = e.args[0]
            terms = _linear_terms(u)
            if len(terms) == 1:
                c, w = terms[0]
            else:
                c, w = Fraction(1), expand(u)
            bk = w.key()
            prev = self.trig_coef.setdefault(bk, c)
            if prev != c:
                raise NotRational("trigonometric atoms with commensurate arguments")
            sk = "sin[" + u.key() + "]"
            ck = "cos[" + u.key() + "]"
            self.trig.setdefault(bk, (sk, ck))
            self.atoms.setdefault(sk, "sin")
            self.atoms.setdefault(ck, "cos")
            return _F(Poly.var(sk if h == "sin" else ck))
        if h == "exp":
            acc = _F(Poly.const(1))
            for c, w in _linear_terms(e.args[0]):
                k = w.key()
                scale = self.exp_scale.get(k, c.denominator)
                power = c * scale
                if power.denominator != 1:
                    raise NotRational("exponential base with unexpected scale")
                name = f"exp[{k}/{scale}]" if scale != 1 else f"exp[{k}]"
                atom = self.atom(name, "exp")
                acc = self.mul(acc, self.pow_int(atom, int(power)))
            return acc
        raise NotRational(f"unsupported node {h}")

    # independence ------------------------------------------------------------------
    def certify_radicals(self, rng: random.Random):
        names = sorted(self.radicals)
        if not names:
            return
        if len(names) > 6:
            raise NotRational("too many independent square roots to certify")
        variables = set()
        for p in self.radicals.values():
            variables |= p.variables()
        for size in range(1, len(names) + 1):
            for subset in combinations(names, size):
                prod = Poly.const(1)
                for n in subset:
                    prod = prod * self.radicals[n]
                if not _provably_nonsquare(prod, sorted(variables), rng):
                    raise NotRational("square-root atoms may be dependent")


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _linear_terms(u: Expr):
    """Split an exponent into [(rational coefficient, base with unit coefficient)]."""
    from .expr import ONE, Expr as _E

    u = expand(u)
    out = []
    for t in (u.args if u.head == "add" else (u,)):
        if t.head == "num":
            out.append((t.value, ONE))
        elif t.head == "mul" and t.args[0].head == "num":
            rest = t.args[1:]
            w = rest[0] if len(rest) == 1 else _E("mul", rest)
            out.append((t.args[0].value, w))
        else:
            out.append((Fraction(1), t))
    return out


def _square_split(c: Fraction):
    """c = sq**2 * free with free a squarefree-ish integer (small primes removed)."""
    n = c.numerator * c.denominator
    sq = Fraction(1, c.denominator)
    free = 1
    p = 2
    while p * p <= n and p < 10000:
        while n % (p * p) == 0:
            n //= p * p
            sq *= p
        if n % p == 0:
            n //= p
            free *= p
        p += 1
    free *= n
    return sq, free


def _provably_nonsquare(p: Poly, variables, rng: random.Random) -> bool:
    """True when some rational point shows p is not the square of a rational function."""
    if p.is_const():
        v = p.const_value()
        return v < 0 or rational_root(v, 2) is None
    for _ in range(12):
        point = {v: Fraction(rng.choice([-1, 1]) * rng.randint(1, 97)) for v in variables}
        val = p.evaluate(point)
        if val < 0 or rational_root(Fraction(val), 2) is None:
            return True
    return False


# public fraction type ----------------------------------------------------------------

class RationalPolyFraction:
    """num/den with exact rational coefficients; equality by cross-multiplication."""

    __slots__ = ("num", "den", "atoms")

    def __init__(self, num: Poly, den: Poly, atoms: dict | None = None):
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        self.num = num
        self.den = den
        self.atoms = atoms or {}

    @staticmethod
    def _from_internal(f: _F, atoms: dict) -> "RationalPolyFraction":
        num = f.num
        den = Poly.const(1)
        for fac, e in sorted(f.den.items(), key=lambda kv: poly_str(kv[0])):
            for _ in range(e):
                q = num.exact_div(fac) if len(num) <= 400 else None
                if q is not None:
                    num = q
                else:
                    den = den * fac
        out = RationalPolyFraction(num, den, atoms)
        return out._normalized()

    def _normalized(self) -> "RationalPolyFraction":
        num, den = self.num, self.den
        if num.is_zero():
            return RationalPolyFraction(Poly(), Poly.const(1), self.atoms)
        g = _mono_gcd(num.monomial_content(), den.monomial_content())
        if g:
            num = num.div_monomial(g)
            den = den.div_monomial(g)
        q = num.exact_div(den) if len(num) <= 400 and not den.is_const() else None
        if q is not None:
            num, den = q, Poly.const(1)
        lc, den = den.normalized()
        return RationalPolyFraction(num.scale(1 / lc), den, self.atoms)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __add__(self, o: "RationalPolyFraction") -> "RationalPolyFraction":
        if self.den == o.den:
            return RationalPolyFraction(self.num + o.num, self.den, {**self.atoms, **o.atoms})._normalized()
        return RationalPolyFraction(self.num * o.den + o.num * self.den, self.den * o.den,
                                    {**self.atoms, **o.atoms})._normalized()

    def __neg__(self):
        return RationalPolyFraction(-self.num, self.den, self.atoms)

    def __sub__(self, o):
        return self + (-o)

    def __mul__(self, o: "RationalPolyFraction") -> "RationalPolyFraction":
        return RationalPolyFraction(self.num * o.num, self.den * o.den, {**self.atoms, **o.atoms})._normalized()

    def __eq__(self, o):
        if not isinstance(o, RationalPolyFraction):
            return NotImplemented
        return (self.num * o.den - o.num * self.den).is_zero()

    def __hash__(self):
        raise TypeError("RationalPolyFraction is unhashable")

    def __repr__(self):
        if self.den.is_const() and self.den.const_value() == 1:
            return f"RationalPolyFraction({poly_str(self.num)})"
        return f"RationalPolyFraction(({poly_str(self.num)}) / ({poly_str(self.den)}))"


def _mono_gcd(a: tuple, b: tuple) -> tuple:
    db = dict(b)
    return tuple((v, min(e, db[v])) for v, e in a if v in db)


def to_rational_fraction(e: Expr) -> RationalPolyFraction:
    """Exact normal form; square roots must cancel, otherwise ``NotRational``.

    Atoms other than square roots (opaque nodes, exp, log, sin, cos) act as
    extra generators.
    """
    ctx = _Context(e)
    f = ctx.convert(e)
    f = _F(ctx.reduce(f.num), f.den)
    used = set()
    for p in [f.num] + list(f.den):
        used |= p.variables()
    if used & set(ctx.radicals):
        raise NotRational("expression keeps a square root of a non-square")
    return RationalPolyFraction._from_internal(f, dict(ctx.atoms))


def normal_numerator(e: Expr, seed: int = 0):
    """Reduced numerator of the exact normal form of ``e`` together with its context.

    Square roots are allowed.  When the numerator is nonzero the square-root
    atoms are certified independent, so the expression is really nonzero.
    """
    ctx = _Context(e)
    f = ctx.convert(e)
    num = ctx.reduce(f.num)
    if not num.is_zero():
        ctx.certify_radicals(random.Random(seed))
    return num, ctx
