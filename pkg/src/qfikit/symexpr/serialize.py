"""Prefix text format and a readable infix printer.

Grammar of the prefix format::

    expr   := number | name | "(" op expr* ")"
    number := ["-"] digits ["/" digits]
    op     := "+" | "*" | "^" | "sin" | "cos" | "exp" | "log" | "fn" | "-" | "/"
    (^ base p/q)                 rational power
    (fn NAME VAR ORDER [RULE])   opaque function of VAR; RULE is its derivative

``-`` and ``/`` are accepted on input only: ``(- a)`` negates, ``(- a b ...)``
subtracts, ``(/ a b)`` divides.  The printer emits the canonical subset, so
``parse(to_prefix(e)) == e``.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .expr import Expr, add, cos, exp, fn, log, mul, num, power, sin, sym

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")
_NUMBER = re.compile(r"^[+-]?\d+(/\d+)?$|^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")


class ParseError(ValueError):
    pass


def to_prefix(e: Expr) -> str:
    return e.key()


def _tokens(text: str):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected input at {pos}: {text[pos:pos + 20]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _atom(tok: str) -> Expr:
    if _NUMBER.match(tok):
        if "." in tok or "e" in tok.lower():
            return num(Fraction(tok))
        return num(Fraction(tok))
    try:
        return sym(tok)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def parse(text: str) -> Expr:
    toks = _tokens(text)
    if not toks:
        raise ParseError("empty expression")
    pos = 0

    def node() -> Expr:
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input")
        tok = toks[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unbalanced ')'")
        if tok != "(":
            return _atom(tok)
        if pos >= len(toks):
            raise ParseError("unexpected end of input")
        op = toks[pos]
        pos += 1
        if op == "fn":
            if pos + 3 > len(toks):
                raise ParseError("truncated fn node")
            name, var, order = toks[pos], toks[pos + 1], toks[pos + 2]
            pos += 3
            rule = None
            if pos < len(toks) and toks[pos] != ")":
                rule = node()
            if pos >= len(toks) or toks[pos] != ")":
                raise ParseError("fn node takes NAME VAR ORDER [RULE]")
            pos += 1
            try:
                return fn(name, var, int(order), rule)
            except ValueError as exc:
                raise ParseError(str(exc)) from None
        args = []
        while True:
            if pos >= len(toks):
                raise ParseError("missing ')'")
            if toks[pos] == ")":
                pos += 1
                break
            args.append(node())
        return _apply(op, args)

    e = node()
    if pos != len(toks):
        raise ParseError("trailing input")
    return e


def _apply(op: str, args: list) -> Expr:
    if op == "+":
        return add(*args)
    if op == "*":
        return mul(*args)
    if op == "-":
        if len(args) == 1:
            return mul(-1, args[0])
        if not args:
            raise ParseError("'-' needs arguments")
        return add(args[0], *[mul(-1, a) for a in args[1:]])
    if op == "/":
        if len(args) != 2:
            raise ParseError("'/' takes two arguments")
        return mul(args[0], power(args[1], -1))
    if op == "^":
        if len(args) != 2 or args[1].head != "num":
            raise ParseError("'^' takes a base and a rational exponent")
        return power(args[0], args[1].value)
    unary = {"sin": sin, "cos": cos, "exp": exp, "log": log}
    if op in unary:
        if len(args) != 1:
            raise ParseError(f"{op} takes one argument")
        try:
            return unary[op](args[0])
        except ValueError as exc:
            raise ParseError(str(exc)) from None
    raise ParseError(f"unknown operator {op!r}")


# infix ---------------------------------------------------------------------

def _frac_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _display_order(e: Expr):
    # polynomial-looking terms first, constants last
    return (e.head == "num", e.key())


def to_infix(e: Expr) -> str:
    return _infix(e, 0)


def _infix(e: Expr, prec: int) -> str:
    h = e.head
    if h == "num":
        s = _frac_str(e.value)
        if (e.value < 0 and prec > 0) or (e.value.denominator != 1 and prec > 1):
            return f"({s})"
        return s
    if h == "sym":
        return e.value
    if h == "fn":
        name, var, order = e.value
        return f"{name}{chr(39) * order}({var})"
    if h == "add":
        parts = []
        for i, a in enumerate(sorted(e.args, key=_display_order)):
            s = _infix(a, 1)
            if i and s.startswith("-"):
                parts.append(" - " + s[1:])
            elif i:
                parts.append(" + " + s)
            else:
                parts.append(s)
        s = "".join(parts)
        return f"({s})" if prec > 0 else s
    if h == "mul":
        args = list(e.args)
        sign = ""
        if args[0].head == "num" and args[0].value == -1:
            sign = "-"
            args = args[1:]
        num_part, den_part = [], []
        for a in args:
            if a.head == "pow" and a.value < 0:
                den_part.append(power(a.args[0], -a.value))
            else:
                num_part.append(a)
        top = "*".join(_infix(a, 2) for a in num_part) if num_part else "1"
        s = top
        if den_part:
            bottom = "*".join(_infix(a, 2) for a in den_part)
            if len(den_part) > 1:
                bottom = f"({bottom})"
            s = f"{top}/{bottom}"
        s = sign + s
        return f"({s})" if (prec > 1 or (sign and prec > 0)) else s
    if h == "pow":
        p = e.value
        b = _infix(e.args[0], 3)
        if p == Fraction(1, 2):
            return f"sqrt({_infix(e.args[0], 0)})"
        if p < 0:
            inner = _infix(power(e.args[0], -p), 2)
            s = f"1/{inner}"
            return f"({s})" if prec > 1 else s
        ps = _frac_str(p)
        if p.denominator != 1:
            ps = f"({ps})"
        return f"{b}^{ps}"
    return f"{h}({_infix(e.args[0], 0)})"
