"""Sparse multivariate polynomials with exact rational coefficients.

A monomial is a tuple of ``(variable, exponent)`` pairs sorted by variable
name; a polynomial maps monomials to nonzero ``Fraction`` coefficients.
Instances are treated as immutable once built.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

ONE_MONO: tuple = ()


def mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    la, lb = len(a), len(b)
    while i < la and j < lb:
        va, ea = a[i]
        vb, eb = b[j]
        if va == vb:
            out.append((va, ea + eb))
            i += 1
            j += 1
        elif va < vb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    if i < la:
        out.extend(a[i:])
    if j < lb:
        out.extend(b[j:])
    return tuple(out)


def mono_div(a: tuple, b: tuple):
    """a / b as a monomial, or None when b does not divide a."""
    da = dict(a)
    for v, e in b:
        r = da.get(v, 0) - e
        if r < 0:
            return None
        if r == 0:
            del da[v]
        else:
            da[v] = r
    return tuple(sorted(da.items()))


def mono_degree(m: tuple) -> int:
    return sum(e for _, e in m)


class Poly:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping | None = None):
        self.terms = dict(terms) if terms else {}
        self._hash = None

    # constructors ------------------------------------------------------------
    @staticmethod
    def const(c) -> "Poly":
        c = Fraction(c)
        return Poly({ONE_MONO: c} if c else {})

    @staticmethod
    def var(name: str, exp: int = 1) -> "Poly":
        return Poly({((name, exp),): Fraction(1)})

    # basic queries -------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and ONE_MONO in self.terms)

    def const_value(self) -> Fraction:
        return self.terms.get(ONE_MONO, Fraction(0))

    def variables(self) -> set:
        out = set()
        for m in self.terms:
            for v, _ in m:
                out.add(v)
        return out

    def degree_in(self, v: str) -> int:
        d = 0
        for m in self.terms:
            for w, e in m:
                if w == v and e > d:
                    d = e
        return d

    def total_degree(self) -> int:
        return max((mono_degree(m) for m in self.terms), default=0)

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    # arithmetic ----------------------------------------------------------------
    def __add__(self, other: "Poly") -> "Poly":
        if not other.terms:
            return self
        if not self.terms:
            return other
        out = dict(self.terms)
        for m, c in other.terms.items():
            r = out.get(m, 0) + c
            if r:
                out[m] = r
            else:
                out.pop(m, None)
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def scale(self, c) -> "Poly":
        c = Fraction(c)
        if c == 0:
            return Poly()
        if c == 1:
            return self
        return Poly({m: v * c for m, v in self.terms.items()})

    def __mul__(self, other: "Poly") -> "Poly":
        a, b = self.terms, other.terms
        if not a or not b:
            return Poly()
        if len(a) == 1 and ONE_MONO in a:
            return other.scale(a[ONE_MONO])
        if len(b) == 1 and ONE_MONO in b:
            return self.scale(b[ONE_MONO])
        out: dict = {}
        for ma, ca in a.items():
            for mb, cb in b.items():
                m = mono_mul(ma, mb)
                r = out.get(m, 0) + ca * cb
                if r:
                    out[m] = r
                else:
                    out.pop(m, None)
        return Poly(out)

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # structure -----------------------------------------------------------------
    def leading(self, order: list | None = None):
        """Leading (monomial, coefficient) in lex order over ``order``."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        if order is None:
            order = sorted(self.variables())
        idx = {v: i for i, v in enumerate(order)}

        def key(m):
            vec = [0] * len(order)
            for v, e in m:
                vec[idx[v]] = e
            return vec

        m = max(self.terms, key=key)
        return m, self.terms[m]

    def monomial_content(self) -> tuple:
        """Largest monomial dividing every term."""
        it = iter(self.terms)
        try:
            first = dict(next(it))
        except StopIteration:
            return ONE_MONO
        for m in it:
            dm = dict(m)
            for v in list(first):
                e = min(first[v], dm.get(v, 0))
                if e:
                    first[v] = e
                else:
                    del first[v]
            if not first:
                break
        return tuple(sorted(first.items()))

    def div_monomial(self, m: tuple) -> "Poly":
        return Poly({mono_div(k, m): c for k, c in self.terms.items()})

    def mul_monomial(self, m: tuple, c=1) -> "Poly":
        c = Fraction(c)
        return Poly({mono_mul(k, m): v * c for k, v in self.terms.items()})

    def coefficients_in(self, v: str) -> dict:
        """{exponent of v: coefficient polynomial}"""
        out: dict = {}
        for m, c in self.terms.items():
            e = 0
            rest = []
            for w, k in m:
                if w == v:
                    e = k
                else:
                    rest.append((w, k))
            out.setdefault(e, {})[tuple(rest)] = c
        return {e: Poly(t) for e, t in out.items()}

    def split_by(self, names) -> dict:
        """Group terms by their exponents in ``names``: {monomial in names: coefficient poly}."""
        names = set(names)
        out: dict = {}
        for m, c in self.terms.items():
            inside = tuple((v, e) for v, e in m if v in names)
            rest = tuple((v, e) for v, e in m if v not in names)
            out.setdefault(inside, {})[rest] = c
        return {k: Poly(t) for k, t in out.items()}

    def substitute(self, v: str, value: "Poly") -> "Poly":
        parts = self.coefficients_in(v)
        if set(parts) == {0}:
            return self
        out = Poly()
        powers = {0: Poly.const(1)}
        for e in sorted(parts):
            if e not in powers:
                powers[e] = value ** e
            out = out + parts[e] * powers[e]
        return out

    def reduce_power(self, v: str, n: int, replacement: "Poly") -> "Poly":
        """Rewrite v**n -> replacement wherever v appears with exponent >= n."""
        if self.degree_in(v) < n:
            return self
        keep: dict = {}
        out = Poly()
        cache = {}
        for m, c in self.terms.items():
            e = 0
            rest = []
            for w, k in m:
                if w == v:
                    e = k
                else:
                    rest.append((w, k))
            if e < n:
                r = keep.get(m, 0) + c
                if r:
                    keep[m] = r
                else:
                    keep.pop(m, None)
                continue
            q, rem = divmod(e, n)
            if q not in cache:
                cache[q] = replacement ** q
            mono = tuple(rest)
            if rem:
                mono = mono_mul(mono, ((v, rem),))
            out = out + cache[q].mul_monomial(mono, c)
        return Poly(keep) + out

    def evaluate(self, binding: Mapping):
        total = 0
        for m, c in self.terms.items():
            term = c
            for v, e in m:
                term = term * binding[v] ** e
            total = total + term
        return total

    def exact_div(self, other: "Poly"):
        """Quotient self / other when it is a polynomial, else None."""
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        if self.is_zero():
            return Poly()
        if other.is_const():
            return self.scale(1 / other.const_value())
        order = sorted(self.variables() | other.variables())
        lm_b, lc_b = other.leading(order)
        rem = self
        quot: dict = {}
        limit = 10 * (len(self) + 1) * (len(other) + 1) + 1000
        steps = 0
        while not rem.is_zero():
            lm_r, lc_r = rem.leading(order)
            m = mono_div(lm_r, lm_b)
            if m is None:
                return None
            c = lc_r / lc_b
            quot[m] = quot.get(m, 0) + c
            rem = rem - other.mul_monomial(m, c)
            steps += 1
            if steps > limit:
                return None
        return Poly({m: c for m, c in quot.items() if c})

    def normalized(self):
        """(c, p) with self = c * p and p's leading coefficient equal to 1."""
        if self.is_zero():
            return Fraction(0), self
        _, lc = self.leading()
        return lc, self.scale(1 / lc)

    def __repr__(self):
        return f"Poly({poly_str(self)})"


def poly_str(p: Poly) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for m in sorted(p.terms, key=lambda m: (-mono_degree(m), m)):
        c = p.terms[m]
        mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
        if not mono:
            parts.append(str(c))
        elif c == 1:
            parts.append(mono)
        elif c == -1:
            parts.append("-" + mono)
        else:
            parts.append(f"{c}*{mono}")
    return " + ".join(parts).replace("+ -", "- ")
