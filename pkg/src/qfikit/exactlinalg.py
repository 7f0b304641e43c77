"""Gaussian elimination over the rationals."""

from __future__ import annotations

from fractions import Fraction


def _as_rows(rows) -> list:
    return [[Fraction(v) for v in r] for r in rows]


def rref(rows) -> tuple[list, list]:
    """Reduced row echelon form and the list of pivot columns."""
    m = _as_rows(rows)
    if not m:
        return m, []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        pv = m[r][c]
        m[r] = [v / pv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(rows) -> int:
    return len(rref(rows)[1])


def nullspace(rows, ncols: int | None = None) -> list:
    """Basis of {v : rows @ v = 0}."""
    rows = _as_rows(rows)
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    m, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -m[i][f]
        basis.append(v)
    return basis


def solve(rows, rhs) -> list | None:
    """One exact solution of rows @ x = rhs, or None when inconsistent."""
    aug = [list(r) + [b] for r, b in zip(_as_rows(rows), rhs)]
    ncols = len(aug[0]) - 1
    m, pivots = rref(aug)
    if ncols in pivots:
        return None
    x = [Fraction(0)] * ncols
    for i, pc in enumerate(pivots):
        x[pc] = m[i][ncols]
    return x
