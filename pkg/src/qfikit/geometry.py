"""Killing tensors and Killing vectors of flat Euclidean space.

Covariant derivatives reduce to partial derivatives in Cartesian
coordinates, so every check here is a statement about polynomials.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

from .coords import COORD_NAMES, coords
from .exactlinalg import rank, solve
from .symexpr import ZERO, Expr, Exact, add, differentiate, ensure, evaluate, is_identically_zero, mul, num
from .symexpr import Poly, to_rational_fraction

N_PARAMS = 20
PARAM_NAMES = tuple(f"a{i}" for i in range(1, N_PARAMS + 1))
# parameters that survive when z is dropped: the order-2 Killing tensors of the plane
E2_PARAMS = ("a3", "a5", "a6", "a13", "a15", "a17")


class NotKT(ValueError):
    """A symmetric tensor failed K_(ab,c) = 0."""


@dataclass(frozen=True)
class KTParams:
    values: tuple = (Fraction(0),) * N_PARAMS

    def __post_init__(self):
        vals = tuple(Fraction(v) for v in self.values)
        if len(vals) != N_PARAMS:
            raise ValueError(f"expected {N_PARAMS} parameters, got {len(vals)}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, **kw) -> "KTParams":
        """KTParams.of(a3=1, a9=1) style constructor."""
        vals = [Fraction(0)] * N_PARAMS
        for k, v in kw.items():
            if k not in PARAM_NAMES:
                raise KeyError(k)
            vals[PARAM_NAMES.index(k)] = Fraction(v)
        return cls(tuple(vals))

    @classmethod
    def one_hot(cls, i: int) -> "KTParams":
        """Basis element with a_i = 1 (1-based)."""
        return cls.of(**{f"a{i}": 1})

    def __getitem__(self, name: str) -> Fraction:
        return self.values[PARAM_NAMES.index(name)]

    def to_json(self) -> dict:
        return {n: _frac_text(v) for n, v in zip(PARAM_NAMES, self.values)}

    @classmethod
    def from_json(cls, data: Mapping) -> "KTParams":
        unknown = set(data) - set(PARAM_NAMES)
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)}")
        return cls.of(**{k: Fraction(str(v)) for k, v in data.items()})


def _frac_text(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class KillingTensor2:
    components: tuple  # dim x dim tuple of tuples of Expr, symmetric
    provenance: str = "custom"

    def __post_init__(self):
        comps = tuple(tuple(ensure(c) for c in row) for row in self.components)
        n = len(comps)
        if any(len(row) != n for row in comps):
            raise ValueError("tensor must be square")
        for a in range(n):
            for b in range(a + 1, n):
                if comps[a][b] != comps[b][a]:
                    raise ValueError(f"tensor is not symmetric at ({a},{b})")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def __getitem__(self, ab) -> Expr:
        a, b = ab
        return self.components[a][b]

    def contract(self, u: Sequence, w: Sequence) -> Expr:
        """K_ab u^a w^b"""
        n = self.dim
        return add(*[mul(self.components[a][b], u[a], w[b]) for a in range(n) for b in range(n)])

    def times_vector(self, w: Sequence) -> list:
        """K_ab w^b"""
        n = self.dim
        return [add(*[mul(self.components[a][b], w[b]) for b in range(n)]) for a in range(n)]

    def scaled(self, c) -> "KillingTensor2":
        return KillingTensor2(tuple(tuple(mul(c, x) for x in row) for row in self.components), self.provenance)

    def __add__(self, other: "KillingTensor2") -> "KillingTensor2":
        n = self.dim
        rows = tuple(tuple(add(self.components[a][b], other.components[a][b]) for b in range(n)) for a in range(n))
        return KillingTensor2(rows, "custom")

    def __neg__(self):
        return self.scaled(-1)

    def __sub__(self, other):
        return self + (-other)

    def equals(self, other: "KillingTensor2") -> bool:
        n = self.dim
        return n == other.dim and all(
            is_identically_zero(add(self.components[a][b], mul(-1, other.components[a][b])), Exact()).zero
            for a in range(n)
            for b in range(a, n)
        )


def zero_tensor(dim: int = 3) -> KillingTensor2:
    return KillingTensor2(tuple(tuple(ZERO for _ in range(dim)) for _ in range(dim)), "custom")


def identity_tensor(dim: int = 3) -> KillingTensor2:
    return KillingTensor2(tuple(tuple(num(int(a == b)) for b in range(dim)) for a in range(dim)), "custom")


def _sym_matrix(c11, c12, c13, c22, c23, c33) -> tuple:
    return ((c11, c12, c13), (c12, c22, c23), (c13, c23, c33))


def kt_from_params(p: KTParams, dim: int = 3) -> KillingTensor2:
    """General order-2 Killing tensor of E^3 in terms of its 20 constants.

    For ``dim=2`` only the planar parameters ``E2_PARAMS`` may be nonzero;
    the tensor is then restricted to the (x, y) block.
    """
    a = {n: num(v) for n, v in zip(PARAM_NAMES, p.values)}
    x, y, z = coords(3)
    h = Fraction(1, 2)
    c11 = add(mul(h, a["a6"], y, y), mul(h, a["a1"], z, z), mul(a["a4"], y, z), mul(a["a5"], y), mul(a["a2"], z), a["a3"])
    c12 = add(mul(h, a["a10"], z, z), mul(-h, a["a6"], x, y), mul(-h, a["a4"], x, z), mul(-h, a["a14"], y, z),
              mul(-h, a["a5"], x), mul(-h, a["a15"], y), mul(a["a16"], z), a["a17"])
    c13 = add(mul(h, a["a14"], y, y), mul(-h, a["a4"], x, y), mul(-h, a["a1"], x, z), mul(-h, a["a10"], y, z),
              mul(-h, a["a2"], x), mul(a["a18"], y), mul(-h, a["a11"], z), a["a19"])
    c22 = add(mul(h, a["a6"], x, x), mul(h, a["a7"], z, z), mul(a["a14"], x, z), mul(a["a15"], x), mul(a["a12"], z), a["a13"])
    c23 = add(mul(h, a["a4"], x, x), mul(-h, a["a14"], x, y), mul(-h, a["a10"], x, z), mul(-h, a["a7"], y, z),
              mul(-1, add(a["a16"], a["a18"]), x), mul(-h, a["a12"], y), mul(-h, a["a8"], z), a["a20"])
    c33 = add(mul(h, a["a1"], x, x), mul(h, a["a7"], y, y), mul(a["a10"], x, y), mul(a["a11"], x), mul(a["a8"], y), a["a9"])
    full = _sym_matrix(c11, c12, c13, c22, c23, c33)
    if dim == 3:
        return KillingTensor2(full, "from-params")
    if dim == 2:
        bad = [n for n, v in zip(PARAM_NAMES, p.values) if v and n not in E2_PARAMS]
        if bad:
            raise ValueError(f"parameters {bad} do not restrict to the plane")
        return KillingTensor2(((c11, c12), (c12, c22)), "from-params")
    raise ValueError("dim must be 2 or 3")


def generating_vector(p: KTParams) -> list:
    """Vector L_a with L_(a,b) equal to the Killing tensor of ``p`` restricted to a1=a4=a6=a7=a10=a14=0.

    The parameters a1, a4, a6, a7, a10, a14 enter only through a Killing
    vector part and drop out of the symmetrized gradient.
    """
    a = {n: num(v) for n, v in zip(PARAM_NAMES, p.values)}
    x, y, z = coords(3)
    l1 = add(mul(-1, a["a15"], y, y), mul(-1, a["a11"], z, z), mul(a["a5"], x, y), mul(a["a2"], x, z),
             mul(2, add(a["a16"], a["a18"]), y, z), mul(a["a3"], x), mul(2, a["a4"], y), mul(2, a["a1"], z), a["a6"])
    l2 = add(mul(-1, a["a5"], x, x), mul(-1, a["a8"], z, z), mul(a["a15"], x, y), mul(-2, a["a18"], x, z),
             mul(a["a12"], y, z), mul(2, add(a["a17"], mul(-1, a["a4"])), x), mul(a["a13"], y), mul(2, a["a7"], z), a["a14"])
    l3 = add(mul(-1, a["a2"], x, x), mul(-1, a["a12"], y, y), mul(-2, a["a16"], x, y), mul(a["a11"], x, z),
             mul(a["a8"], y, z), mul(2, add(a["a19"], mul(-1, a["a1"])), x), mul(2, add(a["a20"], mul(-1, a["a7"])), y),
             mul(a["a9"], z), a["a10"])
    return [l1, l2, l3]


def symmetrized_gradient(L: Sequence, dim: int | None = None) -> tuple:
    """L_(a,b) = (L_a,b + L_b,a)/2 as a tuple of rows."""
    L = [ensure(c) for c in L]
    n = dim or len(L)
    names = COORD_NAMES[:n]
    return tuple(
        tuple(mul(Fraction(1, 2), add(differentiate(L[a], names[b]), differentiate(L[b], names[a]))) for b in range(n))
        for a in range(n)
    )


def kt_from_vector(L: Sequence) -> KillingTensor2:
    """C_ab = L_(a;b); raises NotKT when the result is not a Killing tensor."""
    K = KillingTensor2(symmetrized_gradient(L), "from-vector")
    bad = failing_components(K)
    if bad:
        raise NotKT(f"L_(a;b) is not a Killing tensor; nonzero components {bad}")
    return K


@dataclass(frozen=True)
class KillingVectorE3:
    """Translations (c1, c2, c3) plus rotations (c7, c8, c9)."""

    c1: Fraction = Fraction(0)
    c2: Fraction = Fraction(0)
    c3: Fraction = Fraction(0)
    c7: Fraction = Fraction(0)
    c8: Fraction = Fraction(0)
    c9: Fraction = Fraction(0)

    def field(self) -> list:
        x, y, z = coords(3)
        return [
            add(num(self.c1), mul(self.c7, y), mul(self.c8, z)),
            add(num(self.c2), mul(-1, self.c7, x), mul(self.c9, z)),
            add(num(self.c3), mul(-1, self.c8, x), mul(-1, self.c9, y)),
        ]


def killing_vector_basis() -> list:
    out = []
    for name in ("c1", "c2", "c3", "c7", "c8", "c9"):
        out.append(KillingVectorE3(**{name: Fraction(1)}))
    return out


def homothetic_vector(dim: int = 3) -> list:
    """q^a, with L_(a;b) = delta_ab."""
    return list(coords(dim))


def is_killing_vector(L: Sequence) -> bool:
    n = len(L)
    S = symmetrized_gradient(L)
    return all(is_identically_zero(S[a][b], Exact()).zero for a in range(n) for b in range(a, n))


# covariant form --------------------------------------------------------------

def _levi(i, j, k) -> int:
    return (i - j) * (j - k) * (k - i) // 2


@dataclass(frozen=True)
class CovariantKTData:
    A: tuple = ((0, 0, 0), (0, 0, 0), (0, 0, 0))
    B: tuple = ((0, 0, 0), (0, 0, 0), (0, 0, 0))
    lam: tuple = (0, 0, 0)
    D: tuple = ((0, 0, 0), (0, 0, 0), (0, 0, 0))

    def __post_init__(self):
        conv = lambda m: tuple(tuple(Fraction(v) for v in row) for row in m)  # noqa: E731
        A, B, D = conv(self.A), conv(self.B), conv(self.D)
        for name, m in (("A", A), ("B", B), ("D", D)):
            if any(m[i][j] != m[j][i] for i in range(3) for j in range(3)):
                raise ValueError(f"{name} must be symmetric")
        if B[0][0] + B[1][1] + B[2][2] != 0:
            raise ValueError("B must be traceless")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "lam", tuple(Fraction(v) for v in self.lam))

    @classmethod
    def from_flat(cls, v: Sequence) -> "CovariantKTData":
        """20 numbers: A (11,12,13,22,23,33), B (11,12,13,22,23), lambda (3), D (6)."""
        v = [Fraction(x) for x in v]
        if len(v) != 20:
            raise ValueError("need 20 numbers")

        def sym6(w):
            return ((w[0], w[1], w[2]), (w[1], w[3], w[4]), (w[2], w[4], w[5]))

        b = v[6:11]
        B = ((b[0], b[1], b[2]), (b[1], b[3], b[4]), (b[2], b[4], -b[0] - b[3]))
        return cls(sym6(v[0:6]), B, tuple(v[11:14]), sym6(v[14:20]))


def kt_from_covariant(d: CovariantKTData) -> KillingTensor2:
    q = coords(3)
    rng = range(3)
    comps = [[None] * 3 for _ in rng]
    for i in rng:
        for j in rng:
            terms = []
            for k in rng:
                for l in rng:
                    c = Fraction(0)
                    for m in rng:
                        for n in rng:
                            e = _levi(i, k, m) * _levi(j, l, n) + _levi(j, k, m) * _levi(i, l, n)
                            if e:
                                c += e * d.A[m][n]
                    if c:
                        terms.append(mul(c, q[k], q[l]))
            for k in rng:
                c = Fraction(0)
                for l in rng:
                    c += Fraction(1, 2) * (d.B[i][l] * _levi(j, k, l) + d.B[j][l] * _levi(i, k, l))
                c += Fraction(1, 2) * (d.lam[i] * (j == k) + d.lam[j] * (i == k))
                c -= (i == j) * d.lam[k]
                if c:
                    terms.append(mul(c, q[k]))
            terms.append(num(d.D[i][j]))
            comps[i][j] = add(*terms)
    return KillingTensor2(tuple(tuple(r) for r in comps), "covariant-form")


# residuals -------------------------------------------------------------------

def kt_residual(K, dim: int | None = None) -> dict:
    """Components (a<=b<=c) of K_(ab,c) = (K_ab,c + K_bc,a + K_ca,b)/3."""
    comps = K.components if isinstance(K, KillingTensor2) else tuple(tuple(ensure(c) for c in row) for row in K)
    n = dim or len(comps)
    names = COORD_NAMES[:n]
    d = lambda a, b, c: differentiate(comps[a][b], names[c])  # noqa: E731
    out = {}
    for a, b, c in itertools.combinations_with_replacement(range(n), 3):
        out[(a, b, c)] = mul(Fraction(1, 3), add(d(a, b, c), d(b, c, a), d(c, a, b)))
    return out


def failing_components(K) -> list:
    return [idx for idx, r in kt_residual(K).items() if not is_identically_zero(r, Exact()).zero]


def is_killing_tensor(K) -> bool:
    return not failing_components(K)


# linear structure ------------------------------------------------------------

def _sample_points(dim: int, count: int, seed: int) -> list:
    rng = random.Random(seed)
    return [{COORD_NAMES[i]: Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for i in range(dim)} for _ in range(count)]


def _tensor_row(K: KillingTensor2, points: list) -> list:
    n = K.dim
    row = []
    for pt in points:
        for a in range(n):
            for b in range(a, n):
                row.append(Fraction(evaluate(K.components[a][b], pt)))
    return row


def kt_space_dimension_check(params: Sequence[str] | None = None, dim: int = 3, points: int = 12, seed: int = 7) -> dict:
    """Rank of the one-hot basis tensors sampled at rational points."""
    if params is None:
        params = list(PARAM_NAMES) if dim == 3 else list(E2_PARAMS)
    pts = _sample_points(dim, points, seed)
    rows = [_tensor_row(kt_from_params(KTParams.of(**{p: 1}), dim), pts) for p in params]
    return {"dim": dim, "params": list(params), "sample_points": points, "rank": rank(rows)}


def _coefficient_vector(K: KillingTensor2) -> dict:
    out = {}
    for a in range(3):
        for b in range(a, 3):
            poly = to_rational_fraction(K.components[a][b]).num
            for m, c in poly.terms.items():
                out[(a, b, m)] = c
    return out


@lru_cache(maxsize=1)
def covariant_to_params_matrix() -> tuple:
    """20x20 rational matrix M with a = M @ (flat covariant data), by exact linear solve."""
    basis = [_coefficient_vector(kt_from_params(KTParams.one_hot(i))) for i in range(1, N_PARAMS + 1)]
    keys = sorted(set().union(*basis), key=repr)
    A = [[b.get(k, Fraction(0)) for b in basis] for k in keys]
    cols = []
    for j in range(20):
        flat = [0] * 20
        flat[j] = 1
        target = _coefficient_vector(kt_from_covariant(CovariantKTData.from_flat(flat)))
        extra = set(target) - set(keys)
        if extra:
            raise NotKT("covariant tensor leaves the span of the parameter basis")
        sol = solve(A, [target.get(k, Fraction(0)) for k in keys])
        if sol is None:
            raise NotKT("covariant tensor leaves the span of the parameter basis")
        cols.append(sol)
    return tuple(tuple(cols[j][i] for j in range(20)) for i in range(20))


def covariant_to_params(d: CovariantKTData) -> KTParams:
    flat = [d.A[0][0], d.A[0][1], d.A[0][2], d.A[1][1], d.A[1][2], d.A[2][2],
            d.B[0][0], d.B[0][1], d.B[0][2], d.B[1][1], d.B[1][2],
            *d.lam,
            d.D[0][0], d.D[0][1], d.D[0][2], d.D[1][1], d.D[1][2], d.D[2][2]]
    M = covariant_to_params_matrix()
    return KTParams(tuple(sum((M[i][j] * flat[j] for j in range(20)), Fraction(0)) for i in range(20)))


def poly_components(K: KillingTensor2) -> list:
    """Upper-triangle components as exact polynomials (for tests and reports)."""
    n = K.dim
    out = []
    for a in range(n):
        for b in range(a, n):
            f = to_rational_fraction(K.components[a][b])
            if not f.den.is_const():
                raise ValueError("component is not polynomial")
            out.append(f.num.scale(1 / f.den.const_value()))
    return out


__all__ = [
    "E2_PARAMS", "PARAM_NAMES", "NotKT", "KTParams", "KillingTensor2", "KillingVectorE3", "CovariantKTData",
    "kt_from_params", "kt_from_vector", "kt_from_covariant", "kt_residual", "kt_space_dimension_check",
    "generating_vector", "symmetrized_gradient", "killing_vector_basis", "homothetic_vector",
    "is_killing_vector", "is_killing_tensor", "failing_components", "covariant_to_params",
    "covariant_to_params_matrix", "zero_tensor", "identity_tensor", "poly_components", "Poly",
]
