"""Differentiation and substitution."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from .expr import (
    ONE,
    ZERO,
    Expr,
    UnknownSymbolError,
    add,
    cos,
    ensure,
    exp,
    fn,
    log,
    mul,
    num,
    power,
    sin,
    sym,
)


def _symbol_name(s) -> str:
    if isinstance(s, Expr):
        if s.head != "sym":
            raise UnknownSymbolError(f"cannot differentiate with respect to {s.key()}")
        return s.value
    if isinstance(s, str):
        sym(s)  # validates the name
        return s
    raise UnknownSymbolError(f"not a symbol: {s!r}")


def differentiate(e: Expr, s) -> Expr:
    """Exact partial derivative of ``e`` with respect to the symbol ``s``.

    Opaque function nodes depending on ``s`` contribute their bound rule, or
    the next derivative node when they carry none.
    """
    name = _symbol_name(s)
    memo: dict = {}

    def d(n: Expr) -> Expr:
        k = id(n)
        hit = memo.get(k)
        if hit is not None:
            return hit[1]
        r = _d(n)
        memo[k] = (n, r)
        return r

    def _d(n: Expr) -> Expr:
        h = n.head
        if h == "num":
            return ZERO
        if h == "sym":
            return ONE if n.value == name else ZERO
        if h == "add":
            return add(*[d(a) for a in n.args])
        if h == "mul":
            parts = []
            args = n.args
            for i, a in enumerate(args):
                da = d(a)
                if da.is_zero():
                    continue
                parts.append(mul(da, *args[:i], *args[i + 1:]))
            return add(*parts)
        if h == "pow":
            b = n.args[0]
            db = d(b)
            if db.is_zero():
                return ZERO
            return mul(num(n.value), power(b, n.value - 1), db)
        if h == "fn":
            fname, var, order = n.value
            if var != name:
                return ZERO
            if n.args:
                return n.args[0]
            return fn(fname, var, order + 1)
        u = n.args[0]
        du = d(u)
        if du.is_zero():
            return ZERO
        if h == "sin":
            return mul(cos(u), du)
        if h == "cos":
            return mul(-1, sin(u), du)
        if h == "exp":
            return mul(n, du)
        if h == "log":
            return mul(du, power(u, -1))
        raise ValueError(f"unknown node {h}")

    return d(ensure(e))


def gradient(e: Expr, names) -> list:
    return [differentiate(e, n) for n in names]


def substitute(e: Expr, mapping: Mapping, compose_var: str | None = None) -> Expr:
    """Simultaneous substitution of symbols by expressions.

    Keys are symbol names (or symbol nodes).  An opaque node whose variable
    is replaced becomes a composite node; this needs a bound rule and the
    name of the new independent variable ``compose_var``.
    """
    table = {}
    for k, v in mapping.items():
        table[_symbol_name(k)] = ensure(v)
    memo: dict = {}

    def go(n: Expr) -> Expr:
        k = id(n)
        hit = memo.get(k)
        if hit is not None:
            return hit[1]
        r = _go(n)
        memo[k] = (n, r)
        return r

    def _go(n: Expr) -> Expr:
        h = n.head
        if h == "num":
            return n
        if h == "sym":
            return table.get(n.value, n)
        if h == "add":
            return add(*[go(a) for a in n.args])
        if h == "mul":
            return mul(*[go(a) for a in n.args])
        if h == "pow":
            return power(go(n.args[0]), n.value)
        if h == "fn":
            fname, var, order = n.value
            rule = go(n.args[0]) if n.args else None
            if var not in table:
                if rule is None:
                    return n
                return fn(fname, var, 0, rule)
            inner = table[var]
            if inner.head == "sym":
                return fn(fname, inner.value, order, rule) if rule is None else fn(fname, inner.value, 0, rule)
            if rule is None or compose_var is None:
                raise ValueError(f"cannot compose opaque node {fname} without a rule and a variable")
            return fn(fname + "_" + compose_var, compose_var, 0, mul(rule, differentiate(inner, compose_var)))
        u = go(n.args[0])
        return {"sin": sin, "cos": cos, "exp": exp, "log": log}[h](u)

    return go(ensure(e))


def _terms_of(e: Expr) -> tuple:
    return e.args if e.head == "add" else (e,)


def expand(e: Expr) -> Expr:
    """Distribute products over sums (integer powers of sums are multiplied out)."""
    memo: dict = {}

    def go(n: Expr) -> Expr:
        k = id(n)
        hit = memo.get(k)
        if hit is not None:
            return hit[1]
        r = _go(n)
        memo[k] = (n, r)
        return r

    def _go(n: Expr) -> Expr:
        h = n.head
        if h in ("num", "sym", "fn"):
            return n
        if h == "add":
            return add(*[go(a) for a in n.args])
        if h == "mul":
            acc = [ONE]
            for a in n.args:
                a = go(a)
                acc = [mul(x, y) for x in acc for y in _terms_of(a)]
            return add(*acc)
        if h == "pow":
            b = go(n.args[0])
            p = n.value
            if b.head == "add" and p.denominator == 1 and p > 0:
                acc = list(b.args)
                for _ in range(int(p) - 1):
                    acc = [go(mul(x, y)) for x in acc for y in b.args]
                    acc = list(_terms_of(add(*acc)))
                return add(*acc)
            return power(b, p)
        return {"sin": sin, "cos": cos, "exp": exp, "log": log}[h](go(n.args[0]))

    return go(ensure(e))


def polynomial_in(e: Expr, names, ) -> dict:
    """Split an expression polynomial in ``names`` into {exponents: coefficient}.

    Coefficients may depend on any other symbol.  Used to read off the
    velocity structure of first integrals.
    """
    names = list(names)
    ex = expand(e)
    out: dict = {}
    for t in (ex.args if ex.head == "add" else (ex,)):
        exps = [0] * len(names)
        rest = []
        for f in (t.args if t.head == "mul" else (t,)):
            base, p = (f.args[0], f.value) if f.head == "pow" else (f, Fraction(1))
            if base.head == "sym" and base.value in names and p.denominator == 1 and p > 0:
                exps[names.index(base.value)] += int(p)
            else:
                rest.append(f)
        key = tuple(exps)
        out[key] = add(out.get(key, ZERO), mul(*rest))
    return {k: v for k, v in out.items() if not v.is_zero()}
