"""Exact symbolic expressions: construction, calculus, evaluation and zero tests."""

from .algebra import NotRational, RationalPolyFraction, normal_numerator, to_rational_fraction
from .calculus import differentiate, expand, gradient, polynomial_in, substitute
from .evaluate import (
    Compiled,
    DomainError,
    UnboundSymbolError,
    compile_exprs,
    evaluate,
    evaluate_float,
)
from .expr import (
    ONE,
    ZERO,
    Expr,
    UnknownSymbolError,
    add,
    cos,
    count_nodes,
    depends_on,
    ensure,
    exp,
    fn,
    fn_label,
    free_symbols,
    log,
    mul,
    num,
    opaque_nodes,
    power,
    sin,
    sqrt,
    sym,
    symbols,
    walk,
)
from .poly import Poly
from .serialize import ParseError, parse, to_infix, to_prefix
from .zerotest import Auto, Exact, Sampled, Verdict, all_zero, is_identically_zero

__all__ = [name for name in dir() if not name.startswith("_")]
