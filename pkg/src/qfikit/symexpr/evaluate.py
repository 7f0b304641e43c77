"""Point evaluation (exact when possible) and compilation to Python callables."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .expr import Expr, fn_label, rational_root


class DomainError(ArithmeticError):
    """Evaluation left the real domain (division by zero, even root of a negative ...)."""


class UnboundSymbolError(KeyError):
    pass


def _lookup(binding: Mapping, name: str):
    try:
        v = binding[name]
    except KeyError:
        raise UnboundSymbolError(name) from None
    if isinstance(v, bool):
        return Fraction(int(v))
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return v
    return float(v)


def _fpow(b, p: Fraction):
    if p.denominator == 1:
        try:
            r = b ** p.numerator
        except ZeroDivisionError:
            raise DomainError("zero to a negative power") from None
        return r
    if isinstance(b, Fraction):
        r = rational_root(b, p.denominator)
        if r is not None:
            if r == 0 and p < 0:
                raise DomainError("zero to a negative power")
            return r ** p.numerator
        b = float(b)
    if b < 0:
        if p.denominator % 2 == 0:
            raise DomainError("even root of a negative number")
        mag = (-b) ** float(p)
        return -mag if p.numerator % 2 else mag
    if b == 0 and p < 0:
        raise DomainError("zero to a negative power")
    try:
        return b ** float(p)
    except OverflowError:
        raise DomainError("overflow") from None


def evaluate(e: Expr, binding: Mapping):
    """Evaluate ``e`` at ``binding`` (symbol name / node label -> number).

    The result is a ``Fraction`` when everything stays rational and a float
    otherwise.  Opaque nodes are looked up by label: ``f``, ``f'``, ``f''``.
    """
    memo: dict = {}

    def ev(n: Expr):
        k = id(n)
        hit = memo.get(k)
        if hit is not None:
            return hit[1]
        r = _ev(n)
        if isinstance(r, float) and not math.isfinite(r):
            raise DomainError(f"non-finite value at {n.key()[:60]}")
        memo[k] = (n, r)
        return r

    def _ev(n: Expr):
        h = n.head
        if h == "num":
            return n.value
        if h == "sym":
            return _lookup(binding, n.value)
        if h == "fn":
            return _lookup(binding, fn_label(n))
        if h == "add":
            acc = Fraction(0)
            for a in n.args:
                acc = acc + ev(a)
            return acc
        if h == "mul":
            acc = Fraction(1)
            for a in n.args:
                acc = acc * ev(a)
            return acc
        if h == "pow":
            return _fpow(ev(n.args[0]), n.value)
        u = ev(n.args[0])
        try:
            if h == "sin":
                return Fraction(0) if u == 0 else math.sin(u)
            if h == "cos":
                return Fraction(1) if u == 0 else math.cos(u)
            if h == "exp":
                return Fraction(1) if u == 0 else math.exp(u)
            if h == "log":
                if u <= 0:
                    raise DomainError("log of a non-positive number")
                return Fraction(0) if u == 1 else math.log(u)
        except OverflowError:
            raise DomainError("overflow") from None
        raise ValueError(f"unknown node {h}")

    try:
        return ev(e)
    except ZeroDivisionError:
        raise DomainError("division by zero") from None


def evaluate_float(e: Expr, binding: Mapping) -> float:
    return float(evaluate(e, binding))


# compilation -------------------------------------------------------------------

def _oddroot(b, p, q):
    mag = abs(b) ** (p / q)
    return -mag if (b < 0 and p % 2) else mag


def _np_oddroot(b, p, q):
    mag = np.abs(b) ** (p / q)
    return np.where((b < 0) & (p % 2 == 1), -mag, mag)


class Compiled:
    """A generated Python function evaluating several expressions at once."""

    def __init__(self, func, argnames, source):
        self.func = func
        self.argnames = tuple(argnames)
        self.source = source

    def __call__(self, *args):
        return self.func(*args)


def arg_name_of(e: Expr) -> str:
    return fn_label(e) if e.head == "fn" else e.value


def compile_exprs(exprs: Sequence[Expr], argnames: Sequence[str], backend: str = "math") -> Compiled:
    """Compile ``exprs`` into ``f(*args) -> list`` with common subexpressions shared.

    ``argnames`` lists symbol names and opaque-node labels in call order.
    The ``numpy`` backend vectorizes over array arguments.
    """
    argnames = list(argnames)
    pyarg = {a: f"a{i}" for i, a in enumerate(argnames)}
    if backend == "math":
        F = {"sin": "_m.sin", "cos": "_m.cos", "exp": "_m.exp", "log": "_m.log", "pow": "_m.pow", "odd": "_odd"}
    elif backend == "numpy":
        F = {"sin": "_np.sin", "cos": "_np.cos", "exp": "_np.exp", "log": "_np.log", "pow": "_np.power", "odd": "_npodd"}
    else:
        raise ValueError(backend)

    lines: list = []
    names: dict = {}
    counter = [0]

    def emit(n: Expr) -> str:
        k = n.key()
        if k in names:
            return names[k]
        h = n.head
        if h == "num":
            v = n.value
            s = repr(float(v))
            names[k] = f"({s})"
            return names[k]
        if h == "sym" or h == "fn":
            label = arg_name_of(n)
            if label not in pyarg:
                raise UnboundSymbolError(label)
            names[k] = pyarg[label]
            return names[k]
        if h == "add":
            s = " + ".join(emit(a) for a in n.args)
        elif h == "mul":
            s = " * ".join(emit(a) for a in n.args)
        elif h == "pow":
            b = emit(n.args[0])
            p = n.value
            if p.denominator == 1:
                if p == -1:
                    s = f"1.0 / {b}"
                elif p > 0:
                    s = f"{b} ** {p.numerator}"
                else:
                    s = f"1.0 / {b} ** {-p.numerator}"
            elif p.denominator % 2 == 0:
                if p == Fraction(1, 2):
                    s = f"{F['pow']}({b}, 0.5)" if backend == "numpy" else f"_m.sqrt({b})"
                else:
                    s = f"{F['pow']}({b}, {float(p)!r})"
            else:
                s = f"{F['odd']}({b}, {p.numerator}, {p.denominator})"
        elif h in ("sin", "cos", "exp", "log"):
            s = f"{F[h]}({emit(n.args[0])})"
        else:
            raise ValueError(h)
        counter[0] += 1
        tmp = f"_t{counter[0]}"
        lines.append(f"    {tmp} = {s}")
        names[k] = tmp
        return tmp

    outs = [emit(e) for e in exprs]
    header = f"def _compiled({', '.join(pyarg[a] for a in argnames)}):"
    body = "\n".join(lines)
    src = header + "\n" + (body + "\n" if body else "") + f"    return [{', '.join(outs)}]\n"
    glb = {"_m": math, "_np": np, "_odd": _oddroot, "_npodd": _np_oddroot}
    exec(compile(src, "<qfikit-compiled>", "exec"), glb)
    return Compiled(glb["_compiled"], argnames, src)
