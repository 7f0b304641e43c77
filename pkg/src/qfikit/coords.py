"""Phase-space symbol conventions shared by every module.

Coordinates are ``x, y, z`` and velocities ``vx, vy, vz``; ``t`` is time.
Only the first ``dim`` of each are used.
"""

from __future__ import annotations

from fractions import Fraction

from .symexpr import Expr, add, power, sym

COORD_NAMES = ("x", "y", "z")
VEL_NAMES = ("vx", "vy", "vz")
TIME = "t"


def check_dim(dim: int) -> int:
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
    return dim


def coords(dim: int = 3) -> tuple:
    return tuple(sym(n) for n in COORD_NAMES[: check_dim(dim)])


def vels(dim: int = 3) -> tuple:
    return tuple(sym(n) for n in VEL_NAMES[: check_dim(dim)])


def t() -> Expr:
    return sym(TIME)


def radius_squared(dim: int = 3) -> Expr:
    return add(*[power(q, 2) for q in coords(dim)])


def radius(dim: int = 3) -> Expr:
    """r = (x^2 + ...)^(1/2); never a primitive symbol."""
    return power(radius_squared(dim), Fraction(1, 2))



