"""Named first integrals of the time-dependent generalized Kepler system.

Every integral carries the omega family under which it is conserved; the
relations among integrals are exposed as expressions that vanish
identically on phase space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .conditions import DynSystem, ExplicitSystem, determining_residuals, QFICandidate, is_first_integral, \
    total_time_derivative
from .coords import coords, radius, radius_squared, vels
from .symexpr import (
    ZERO,
    Expr,
    add,
    cos,
    differentiate,
    ensure,
    exp,
    fn,
    is_identically_zero,
    mul,
    num,
    power,
    sin,
    sqrt,
    substitute,
    sym,
    to_prefix,
)

T = sym("t")
HALF = Fraction(1, 2)


def _dt(e: Expr) -> Expr:
    return differentiate(e, "t")


def _e(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return num(Fraction(v))


def _dot(u, w) -> Expr:
    return add(*[mul(a, b) for a, b in zip(u, w)])


def _is_zero(v) -> bool:
    v = _e(v)
    return v.is_zero() or is_identically_zero(v).zero


# metadata -------------------------------------------------------------------------

@dataclass(frozen=True)
class Family:
    """An omega family: the system under which an integral is conserved."""

    name: str
    template: str
    system: object
    nu: Fraction | None = None
    params: tuple = ()

    def to_json(self) -> dict:
        out = {"name": self.name, "template": self.template,
               "params": {k: (to_prefix(v) if isinstance(v, Expr) else str(v)) for k, v in self.params}}
        if self.nu is not None:
            out["nu"] = str(self.nu)
        return out


@dataclass(frozen=True)
class FirstIntegral:
    name: str
    expr: Expr
    family: Family
    kind: str = "quadratic"

    def __post_init__(self):
        if not isinstance(self.family, Family):
            raise TypeError("a first integral needs its omega family")
        if self.kind not in ("linear", "quadratic"):
            raise ValueError("kind is linear or quadratic")

    @property
    def system(self):
        return self.family.system

    def time_derivative(self) -> Expr:
        return total_time_derivative(self.expr, self.family.system)

    def check(self, strategy=None):
        """Determining-system report for Newtonian families, plain dI/dt verdict otherwise."""
        sysm = self.family.system
        if isinstance(sysm, DynSystem):
            return determining_residuals(QFICandidate.from_expr(self.expr, sysm.dim), sysm, strategy)
        return is_first_integral(self.expr, sysm, strategy)

    def is_conserved(self, strategy=None) -> bool:
        return is_first_integral(self.expr, self.family.system, strategy).zero

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "expr": to_prefix(self.expr), "family": self.family.to_json()}


def _params(**kw) -> tuple:
    return tuple(sorted((k, v if isinstance(v, Expr) else Fraction(v)) for k, v in kw.items()))


def _kepler_family(name: str, template: str, nu, omega, **params) -> Family:
    return Family(name, template, DynSystem.kepler(nu, omega), Fraction(nu), _params(**params))


def constant_family(nu, k) -> Family:
    if _is_zero(k):
        raise ValueError("k must be nonzero")
    return _kepler_family("constant", "omega = k", nu, _e(k), k=_e(k))


# angular momentum -----------------------------------------------------------------

def _L_components():
    q, v = coords(3), vels(3)
    return [add(mul(q[(i + 1) % 3], v[(i + 2) % 3]), mul(-1, q[(i + 2) % 3], v[(i + 1) % 3])) for i in range(3)]


def angular_momentum(i: int, nu=1, omega=None) -> FirstIntegral:
    """L_i = q_(i+1) v_(i+2) - q_(i+2) v_(i+1), indices cyclic; conserved for every omega."""
    if i not in (1, 2, 3):
        raise ValueError("index runs over 1..3")
    fam = _kepler_family("arbitrary omega", "omega(t) free", nu, fn("w") if omega is None else _e(omega))
    return FirstIntegral(f"L{i}", _L_components()[i - 1], fam, "linear")


def angular_momentum_tensor() -> tuple:
    q, v = coords(3), vels(3)
    return tuple(tuple(add(mul(q[i], v[j]), mul(-1, q[j], v[i])) for j in range(3)) for i in range(3))


# constant omega --------------------------------------------------------------------

CONSTANT_OMEGA_NAMES = ("H", "L", "B", "R", "I1", "I2", "I3+", "I3-", "C", "S")


def hamiltonian_expr(nu, k) -> Expr:
    v = vels(3)
    return add(mul(HALF, _dot(v, v)), mul(-1, _e(k), power(radius(3), -Fraction(nu))))


def runge_lenz_exprs(k) -> list:
    q, v = coords(3), vels(3)
    v2, qv = _dot(v, v), _dot(q, v)
    rinv = power(radius(3), -1)
    return [add(mul(v2, q[i]), mul(-1, qv, v[i]), mul(-1, _e(k), rinv, q[i])) for i in range(3)]


def constant_omega_integral(name: str, k=1, nu=1, i: int | None = None, j: int | None = None) -> FirstIntegral:
    """Integrals of the constant-omega system omega = k.

    ``name`` is one of H, L, B, R, I1, I2, I3+, I3-, C, S; indexed names
    take ``i`` (and ``j`` for B).  I3+ and I3- need k > 0; the real pair
    C, S replaces them for k < 0.
    """
    nu, k = Fraction(nu), Fraction(k)
    if k == 0:
        raise ValueError("k must be nonzero")
    fam = constant_family(nu, k)
    q, v = coords(3), vels(3)

    def need(cond, what):
        if not cond:
            raise ValueError(f"{name} is not an integral for nu={nu}, k={k}: {what}")

    def idx(n):
        if n not in (1, 2, 3):
            raise ValueError(f"{name} needs an index in 1..3")
        return n - 1

    if name == "H":
        return FirstIntegral(f"H_{nu}", hamiltonian_expr(nu, k), fam)
    if name == "L":
        return FirstIntegral(f"L{i}", _L_components()[idx(i)], fam, "linear")
    if name == "B":
        need(nu == -2, "requires nu = -2")
        a, b = idx(i), idx(j)
        return FirstIntegral(f"B{i}{j}", add(mul(v[a], v[b]), mul(-2 * k, q[a], q[b])), fam)
    if name == "R":
        need(nu == 1, "requires nu = 1")
        return FirstIntegral(f"R{i}", runge_lenz_exprs(k)[idx(i)], fam)
    if name in ("I1", "I2"):
        need(nu == 2, "requires nu = 2")
        H2 = hamiltonian_expr(2, k)
        qv = _dot(q, v)
        if name == "I1":
            e = add(mul(-1, H2, T, T), mul(T, qv), mul(-HALF, radius_squared(3)))
        else:
            e = add(mul(-1, H2, T), mul(HALF, qv))
        return FirstIntegral(name, e, fam)
    if name in ("I3+", "I3-"):
        need(nu == -2 and k > 0, "requires nu = -2 and k > 0")
        s = 1 if name == "I3+" else -1
        w = sqrt(num(2 * k))
        a = idx(i)
        e = mul(exp(mul(s, w, T)), add(v[a], mul(-s, w, q[a])))
        return FirstIntegral(f"{name}{i}", e, fam, "linear")
    if name in ("C", "S"):
        need(nu == -2 and k < 0, "requires nu = -2 and k < 0")
        w = sqrt(num(-2 * k))
        a = idx(i)
        wt = mul(w, T)
        if name == "C":
            e = add(mul(v[a], cos(wt)), mul(w, q[a], sin(wt)))
        else:
            e = add(mul(v[a], sin(wt)), mul(-1, w, q[a], cos(wt)))
        return FirstIntegral(f"{name}{i}", e, fam, "linear")
    raise ValueError(f"unknown constant-omega integral {name!r}")


# polynomial families ----------------------------------------------------------------

def _quad(b0, b1, b2) -> Expr:
    return add(_e(b0), mul(_e(b1), T), mul(_e(b2), T, T))


def omega_nu(nu, b0, b1, b2, k) -> Expr:
    return mul(_e(k), power(_quad(b0, b1, b2), (Fraction(nu) - 2) / 2))


def J_nu(nu, b0, b1, b2, k) -> FirstIntegral:
    """J = a (v^2/2 - omega/r^nu) - a'/2 (q.v) + b2 r^2/2 with a = b0 + b1 t + b2 t^2."""
    nu = Fraction(nu)
    if nu == 0:
        raise ValueError("nu must be nonzero")
    q, v = coords(3), vels(3)
    a = _quad(b0, b1, b2)
    w = omega_nu(nu, b0, b1, b2, k)
    e = add(mul(a, add(mul(HALF, _dot(v, v)), mul(-1, w, power(radius(3), -nu)))),
            mul(-HALF, _dt(a), _dot(q, v)),
            mul(HALF, _e(b2), radius_squared(3)))
    fam = _kepler_family("omega_nu", "omega = k (b0 + b1 t + b2 t^2)^((nu-2)/2)", nu, w,
                         b0=_e(b0), b1=_e(b1), b2=_e(b2), k=_e(k))
    return FirstIntegral(f"J_{nu}", e, fam)


@dataclass(frozen=True)
class KeplerTimeDependent:
    """E2, the modified Runge-Lenz vector and A_i for omega = c11/(b0 + b1 t)."""

    E2: FirstIntegral
    Rtilde: tuple
    A: tuple
    b0: Expr
    b1: Expr
    c11: Expr

    def relations(self) -> dict:
        L = _L_components()
        Avec = [a.expr for a in self.A]
        L2 = _dot(L, L)
        return {
            "A.L = 0": _dot(Avec, L),
            "2 E2 L^2 + c11^2 = A^2": add(mul(2, self.E2.expr, L2), power(self.c11, 2), mul(-1, _dot(Avec, Avec))),
        }


def kepler_time_dependent(b0, b1, c11) -> KeplerTimeDependent:
    if _is_zero(c11):
        raise ValueError("c11 must be nonzero")
    b0, b1, c11 = _e(b0), _e(b1), _e(c11)
    q, v = coords(3), vels(3)
    u = add(b0, mul(b1, T))
    w = mul(c11, power(u, -1))
    fam = _kepler_family("omega_2K", "omega = c11/(b0 + b1 t)", 1, w, b0=b0, b1=b1, c11=c11)
    E2 = add(mul(power(u, 2), add(mul(HALF, _dot(v, v)), mul(-1, c11, power(mul(radius(3), u), -1)))),
             mul(-1, b1, u, _dot(q, v)),
             mul(HALF, power(b1, 2), radius_squared(3)))
    v2, qv = _dot(v, v), _dot(q, v)
    rinv = power(radius(3), -1)
    Rt = tuple(add(mul(v2, q[i]), mul(-1, qv, v[i]), mul(-1, c11, rinv, power(u, -1), q[i])) for i in range(3))
    L = _L_components()
    A = []
    for i in range(3):
        extra = add(mul(q[(i + 2) % 3], L[(i + 1) % 3]), mul(-1, q[(i + 1) % 3], L[(i + 2) % 3]))
        A.append(FirstIntegral(f"A{i + 1}", add(mul(u, Rt[i]), mul(b1, extra)), fam))
    return KeplerTimeDependent(FirstIntegral("E2", E2, fam), Rt, tuple(A), b0, b1, c11)


def omega_3K(b0, b1, b2, k) -> Expr:
    return mul(_e(k), power(_quad(b0, b1, b2), Fraction(-1, 2)))


def kepler_E3(b0, b1, b2, k) -> FirstIntegral:
    if _is_zero(k):
        raise ValueError("k must be nonzero")
    q, v = coords(3), vels(3)
    a = _quad(b0, b1, b2)
    e = add(mul(a, add(mul(HALF, _dot(v, v)), mul(-1, _e(k), power(mul(radius(3), sqrt(a)), -1)))),
            mul(-HALF, _dt(a), _dot(q, v)),
            mul(HALF, _e(b2), radius_squared(3)))
    fam = _kepler_family("omega_3K", "omega = k (b0 + b1 t + b2 t^2)^(-1/2)", 1, omega_3K(b0, b1, b2, k),
                         b0=_e(b0), b1=_e(b1), b2=_e(b2), k=_e(k))
    return FirstIntegral("E3", e, fam)


def E_mu_compact(mu: int, b0, b1, b2=0, k=1) -> FirstIntegral:
    """The omega-generic energy k^2 [w^-2 (v^2/2 - w/r) - (w^-2)'/2 q.v + (w^-2)'' r^2/4].

    mu = 2 uses w = k/(b0 + b1 t), mu = 3 uses w = k (b0 + b1 t + b2 t^2)^(-1/2).
    """
    if mu == 2:
        w = mul(_e(k), power(add(_e(b0), mul(_e(b1), T)), -1))
        fam = _kepler_family("omega_2K", "omega = c11/(b0 + b1 t)", 1, w, b0=_e(b0), b1=_e(b1), c11=_e(k))
    elif mu == 3:
        w = omega_3K(b0, b1, b2, k)
        fam = _kepler_family("omega_3K", "omega = k (b0 + b1 t + b2 t^2)^(-1/2)", 1, w,
                             b0=_e(b0), b1=_e(b1), b2=_e(b2), k=_e(k))
    else:
        raise ValueError("mu is 2 or 3")
    q, v = coords(3), vels(3)
    winv2 = power(w, -2)
    d1 = _dt(winv2)
    e = mul(power(_e(k), 2), add(mul(winv2, add(mul(HALF, _dot(v, v)), mul(-1, w, power(radius(3), -1)))),
                                 mul(-HALF, d1, _dot(q, v)),
                                 mul(Fraction(1, 4), _dt(d1), radius_squared(3))))
    return FirstIntegral(f"E_mu{mu}", e, fam)


# oscillators -----------------------------------------------------------------------

@dataclass(frozen=True)
class OscillatorSpec:
    """Parameterization of the time-dependent isotropic oscillator (nu = -2).

    kind ``f``: omega = f''/(4f) - (f'/f)^2/8 - c0/(4 f^2), angle theta' = (c0/2)^(1/2)/f;
    kind ``a3``: the same omega written for the tensor coefficient a3;
    kind ``rho``: f = rho^2 (Lewis form);
    kind ``g``: omega = g''/(2 g).
    """

    kind: str
    func: Expr
    c0: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in ("f", "g", "a3", "rho"):
            raise ValueError("kind is one of f, g, a3, rho")
        object.__setattr__(self, "func", _e(self.func))
        object.__setattr__(self, "c0", self.c0 if isinstance(self.c0, Expr) else Fraction(self.c0))
        if _is_zero(self.func):
            raise ValueError(f"{self.kind} must not vanish identically")

    @property
    def f(self) -> Expr:
        if self.kind == "rho":
            return power(self.func, 2)
        return self.func

    def omega(self) -> Expr:
        if self.kind == "g":
            g = self.func
            return mul(HALF, _dt(_dt(g)), power(g, -1))
        f = self.f
        fd = _dt(f)
        c0 = _e(self.c0)
        return add(mul(Fraction(1, 4), _dt(fd), power(f, -1)),
                   mul(Fraction(-1, 8), power(mul(fd, power(f, -1)), 2)),
                   mul(Fraction(-1, 4), c0, power(f, -2)))

    def theta_rate(self) -> Expr:
        return mul(sqrt(mul(HALF, _e(self.c0))), power(self.f, -1))

    def theta(self, name: str = "theta") -> Expr:
        """Opaque angle node with derivative (c0/2)^(1/2)/f."""
        if self.kind == "g":
            raise ValueError("the angle is defined for the f parameterization")
        if not isinstance(self.c0, Expr) and self.c0 <= 0:
            raise ValueError("c0 must be positive for a real angle")
        return fn(name, "t", 0, self.theta_rate())

    def family(self) -> Family:
        tmpl = "omega = g''/(2g)" if self.kind == "g" else "omega = f''/(4f) - (f'/f)^2/8 - c0/(4f^2)"
        return Family("oscillator/" + self.kind, tmpl, DynSystem.kepler(-2, self.omega()), Fraction(-2),
                      _params(func=self.func, c0=_e(self.c0)))


def oscillator_Lambda(spec: OscillatorSpec) -> tuple:
    """Lambda_ij = a3 (v_i v_j - 2 omega q_i q_j) - a3' q_(i v_j) + a3''/2 q_i q_j."""
    if spec.kind == "g":
        raise ValueError("Lambda needs the f, a3 or rho parameterization")
    a3 = mul(-1, power(spec.func, 2)) if spec.kind == "rho" else spec.func
    w = spec.omega()
    fam = spec.family()
    q, v = coords(3), vels(3)
    da = _dt(a3)
    out = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            e = add(mul(a3, add(mul(v[i], v[j]), mul(-2, w, q[i], q[j]))),
                    mul(-HALF, da, add(mul(q[i], v[j]), mul(q[j], v[i]))),
                    mul(HALF, _dt(da), q[i], q[j]))
            out[i][j] = out[j][i] = FirstIntegral(f"Lambda{i + 1}{j + 1}", e, fam)
    return tuple(tuple(r) for r in out)


def lambda_lewis_form(rho, c0) -> tuple:
    """-(rho v_i - rho' q_i)(rho v_j - rho' q_j) - (c0/2) rho^-2 q_i q_j."""
    rho = _e(rho)
    q, v = coords(3), vels(3)
    rd = _dt(rho)
    u = [add(mul(rho, v[i]), mul(-1, rd, q[i])) for i in range(3)]
    return tuple(tuple(add(mul(-1, u[i], u[j]), mul(-HALF, _e(c0), power(rho, -2), q[i], q[j])) for j in range(3))
                 for i in range(3))


def _I4_pair(f: Expr, c0, theta: Expr):
    q, v = coords(3), vels(3)
    s = sqrt(mul(HALF, _e(c0)))
    fd = _dt(f)
    sq = sqrt(f)
    isq = power(f, Fraction(-1, 2))
    I41, I42 = [], []
    for i in range(3):
        lin = add(mul(sq, v[i]), mul(-HALF, fd, isq, q[i]))
        I41.append(add(mul(s, isq, q[i], sin(theta)), mul(lin, cos(theta))))
        I42.append(add(mul(-1, s, isq, q[i], cos(theta)), mul(lin, sin(theta))))
    return I41, I42


def oscillator_linear(spec: OscillatorSpec) -> dict:
    """I_4i = g v_i - g' q_i (kind g), or the angle pair I41_i, I42_i (kinds f, rho)."""
    fam = spec.family()
    q, v = coords(3), vels(3)
    if spec.kind == "g":
        g = spec.func
        return {"I4": tuple(FirstIntegral(f"I4{i + 1}", add(mul(g, v[i]), mul(-1, _dt(g), q[i])), fam, "linear")
                            for i in range(3))}
    if spec.kind == "a3":
        raise ValueError("use the f parameterization for the linear integrals")
    I41, I42 = _I4_pair(spec.f, spec.c0, spec.theta())
    return {"I41": tuple(FirstIntegral(f"I41_{i + 1}", e, fam, "linear") for i, e in enumerate(I41)),
            "I42": tuple(FirstIntegral(f"I42_{i + 1}", e, fam, "linear") for i, e in enumerate(I42))}


def oscillator_relations(spec: OscillatorSpec) -> dict:
    """Phase-space identities among Lambda, the angle pair and L_ij (each entry should vanish).

    The angle enters as an independent symbol here, so the identities hold
    for every value of it.
    """
    if spec.kind not in ("f", "rho"):
        raise ValueError("relations need the f or rho parameterization")
    th = sym("theta")
    I41, I42 = _I4_pair(spec.f, spec.c0, th)
    Lam = oscillator_Lambda(OscillatorSpec("a3", spec.f, spec.c0))
    Lij = angular_momentum_tensor()
    k = power(sqrt(mul(HALF, _e(spec.c0))), -1)  # (2/c0)^(1/2) through the same radical
    out = {}
    for i in range(3):
        for j in range(i, 3):
            out[f"Lambda{i + 1}{j + 1} = I41_{i + 1} I41_{j + 1} + I42_{i + 1} I42_{j + 1}"] = add(
                Lam[i][j].expr, mul(-1, I41[i], I41[j]), mul(-1, I42[i], I42[j]))
    for i in range(3):
        for j in range(i + 1, 3):
            out[f"L{i + 1}{j + 1} = (2/c0)^(1/2) (I41_{i + 1} I42_{j + 1} - I41_{j + 1} I42_{i + 1})"] = add(
                Lij[i][j], mul(-1, k, add(mul(I41[i], I42[j]), mul(-1, I41[j], I42[i]))))
    for i in range(3):
        out[f"dI42_{i + 1}/dtheta = I41_{i + 1}"] = add(differentiate(I42[i], "theta"), mul(-1, I41[i]))
    return out


def oscillator_Iij(b0, b1, b2, c0) -> tuple:
    """The tensor family for omega = k/(b0 + b1 t + b2 t^2)^2, k = -(b1^2 - 4 b0 b2 + 2 c0)/8."""
    a = _quad(b0, b1, b2)
    kk = mul(Fraction(-1, 8), add(power(_e(b1), 2), mul(-4, _e(b0), _e(b2)), mul(2, _e(c0))))
    w = mul(kk, power(a, -2))
    fam = _kepler_family("omega_Iij", "omega = k/(b0 + b1 t + b2 t^2)^2", -2, w,
                         b0=_e(b0), b1=_e(b1), b2=_e(b2), c0=_e(c0))
    q, v = coords(3), vels(3)
    out = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            e = add(mul(a, add(mul(v[i], v[j]), mul(-2, w, q[i], q[j]))),
                    mul(-HALF, _dt(a), add(mul(q[i], v[j]), mul(q[j], v[i]))),
                    mul(_e(b2), q[i], q[j]))
            out[i][j] = out[j][i] = FirstIntegral(f"I{i + 1}{j + 1}", e, fam)
    return tuple(tuple(r) for r in out), kk


def lewis_invariant(rho, c0) -> FirstIntegral:
    """I = (x rho' - rho x')^2/2 + (c0/4)(x/rho)^2 for x'' = -psi^2 x, psi^2 = -rho''/rho + c0/(2 rho^4)."""
    rho = _e(rho)
    if _is_zero(rho):
        raise ValueError("rho must not vanish identically")
    x, = coords(1)
    vx, = vels(1)
    psi2 = add(mul(-1, _dt(_dt(rho)), power(rho, -1)), mul(HALF, _e(c0), power(rho, -4)))
    e = add(mul(HALF, power(add(mul(x, _dt(rho)), mul(-1, rho, vx)), 2)),
            mul(Fraction(1, 4), _e(c0), power(mul(x, power(rho, -1)), 2)))
    fam = Family("lewis", "psi^2 = -rho''/rho + c0/(2 rho^4)", DynSystem(1, psi2, (x,)), None,
                 _params(rho=rho, c0=_e(c0)))
    return FirstIntegral("Lewis", e, fam)


def lewis_invariant_pair(psi, c0) -> FirstIntegral:
    """Lewis invariant on the coupled pair x'' = -psi^2 x, rho'' = -psi^2 rho + c0/(2 rho^3).

    The second coordinate y plays the role of rho.
    """
    psi = _e(psi)
    x, y = coords(2)
    vx, vy = vels(2)
    p2 = power(psi, 2)
    sysm = ExplicitSystem(2, (mul(-1, p2, x), add(mul(-1, p2, y), mul(HALF, _e(c0), power(y, -3)))), "lewis pair")
    e = add(mul(HALF, power(add(mul(x, vy), mul(-1, y, vx)), 2)),
            mul(Fraction(1, 4), _e(c0), power(mul(x, power(y, -1)), 2)))
    fam = Family("lewis pair", "x'' = -psi^2 x, rho'' = -psi^2 rho + c0/(2 rho^3)", sysm, None,
                 _params(psi=psi, c0=_e(c0)))
    return FirstIntegral("Lewis", e, fam)


# relation suites -------------------------------------------------------------------

def kepler_relations(b0, b1, c11) -> dict:
    return kepler_time_dependent(b0, b1, c11).relations()


def kepler_reduction_relations(b0, c11) -> dict:
    """b1 = 0: A_i = b0 R_i, E2 = b0^2 H and 2 H L^2 + k^2 = R^2 with k = c11/b0."""
    b0, c11 = _e(b0), _e(c11)
    kt = kepler_time_dependent(b0, 0, c11)
    k = mul(c11, power(b0, -1))
    R = runge_lenz_exprs(k)
    H = hamiltonian_expr(1, k)
    L = _L_components()
    out = {f"A{i + 1} = b0 R{i + 1}": add(kt.A[i].expr, mul(-1, b0, R[i])) for i in range(3)}
    out["E2 = b0^2 H"] = add(kt.E2.expr, mul(-1, power(b0, 2), H))
    out["2 H L^2 + k^2 = R^2"] = add(mul(2, H, _dot(L, L)), power(k, 2), mul(-1, _dot(R, R)))
    return out


def polynomial_family_relations(b0, b1, b2, k, c0) -> dict:
    """J_2 = b0 H_2 - b1 I_2 - b2 I_1 and Tr I_ij = 2 J_-2."""
    J2 = J_nu(2, b0, b1, b2, k)
    H2 = constant_omega_integral("H", k, 2) if not isinstance(k, Expr) else None
    I1 = constant_omega_integral("I1", k, 2) if H2 else None
    I2 = constant_omega_integral("I2", k, 2) if H2 else None
    out = {}
    if H2 is not None:
        out["J_2 = b0 H_2 - b1 I_2 - b2 I_1"] = add(J2.expr, mul(-1, _e(b0), H2.expr), mul(_e(b1), I2.expr),
                                                    mul(_e(b2), I1.expr))
    Iij, kk = oscillator_Iij(b0, b1, b2, c0)
    Jm2 = J_nu(-2, b0, b1, b2, kk)
    out["Tr I = 2 J_-2"] = add(Iij[0][0].expr, Iij[1][1].expr, Iij[2][2].expr, mul(-2, Jm2.expr))
    return out


def energy_relations(b0, b1, b2, k) -> dict:
    """Compact omega-generic energy against E2 and E3, and the b1 = b2 = 0 reduction of E3."""
    out = {}
    E2 = kepler_time_dependent(b0, b1, k).E2
    out["compact(mu=2) = E2"] = add(E_mu_compact(2, b0, b1, 0, k).expr, mul(-1, E2.expr))
    out["compact(mu=3) = E3"] = add(E_mu_compact(3, b0, b1, b2, k).expr, mul(-1, kepler_E3(b0, b1, b2, k).expr))
    b0e = _e(b0)
    E3r = kepler_E3(b0, 0, 0, k).expr
    out["E3(b1=b2=0) = b0 H"] = add(E3r, mul(-1, b0e, hamiltonian_expr(1, mul(_e(k), power(b0e, Fraction(-1, 2))))))
    return out


def exponential_pair_relations(k) -> dict:
    """I3+_a I3-_a = B_aa for k > 0."""
    out = {}
    for i in (1, 2, 3):
        p = constant_omega_integral("I3+", k, -2, i).expr
        m = constant_omega_integral("I3-", k, -2, i).expr
        out[f"I3+{i} I3-{i} = B{i}{i}"] = add(mul(p, m), mul(-1, constant_omega_integral("B", k, -2, i, i).expr))
    return out


def oscillator_reductions(c0, k) -> dict:
    """f = 1 gives constant omega = -c0/4; constant a3 gives Lambda = B with omega = -c0/4."""
    spec1 = OscillatorSpec("f", num(1), c0)
    out = {"f = 1: omega = -c0/4": add(spec1.omega(), mul(Fraction(1, 4), _e(c0)))}
    spec2 = OscillatorSpec("a3", num(1), Fraction(-4) * Fraction(k))
    Lam = oscillator_Lambda(spec2)
    for i in range(3):
        for j in range(i, 3):
            out[f"a3 = 1: Lambda{i + 1}{j + 1} = B{i + 1}{j + 1}"] = add(
                Lam[i][j].expr, mul(-1, constant_omega_integral("B", k, -2, i + 1, j + 1).expr))
    return out


def check_relations(rel: Mapping, strategy=None) -> dict:
    return {name: is_identically_zero(e, strategy) for name, e in rel.items()}


# kepler reduction cross-check -----------------------------------------------------------

def verify_branch(nu, name: str, strategy=None) -> bool:
    """Each branch's integrals are conserved under its omega family (symbolic parameters)."""
    nu = Fraction(nu)
    b0, b1, b2, k, c0, c11 = (sym(s) for s in ("b0", "b1", "b2", "k", "c0", "c11"))
    if name == "arbitrary omega":
        fis = [angular_momentum(i, nu) for i in (1, 2, 3)]
    elif name == "omega_nu":
        fis = [J_nu(nu, b0, b1, b2, k)]
    elif name == "omega_2K":
        kt = kepler_time_dependent(b0, b1, c11)
        fis = [kt.E2, *kt.A]
    elif name == "omega_3K":
        fis = [kepler_E3(b0, b1, b2, k)]
    elif name == "Lewis-type omega":
        spec = OscillatorSpec("a3", fn("a3"), c0)
        Lam = oscillator_Lambda(spec)
        fis = [Lam[i][j] for i in range(3) for j in range(i, 3)]
        # the same omega must satisfy the third-order condition on a3
        a3 = fn("a3")
        w = spec.omega()
        third = add(_dt(_dt(_dt(a3))), mul(-8, w, _dt(a3)), mul(-4, _dt(w), a3))
        if not is_identically_zero(third, strategy).zero:
            return False
    elif name == "linear-integral omega":
        fis = list(oscillator_linear(OscillatorSpec("g", fn("g")))["I4"])
    else:
        raise ValueError(f"unknown branch {name!r}")
    return all(fi.is_conserved(strategy) for fi in fis)


# listing ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    key: str
    group: str
    nu: Fraction | None
    omega_template: str
    params: tuple
    build: object = field(repr=False, compare=False, default=None)

    def to_json(self) -> dict:
        return {"key": self.key, "group": self.group, "nu": None if self.nu is None else str(self.nu),
                "omega": self.omega_template, "params": list(self.params)}


def _t1(names_idx, k, nu):
    def build(**p):
        kk = Fraction(p.get("k", k))
        out = []
        for nm, idx in names_idx:
            out.append(constant_omega_integral(nm, kk, nu, *idx))
        return out
    return build


def _all_idx():
    return [(i,) for i in (1, 2, 3)]


def _build_E2A(b0, b1, c11):
    kt = kepler_time_dependent(Fraction(b0), Fraction(b1), Fraction(c11))
    return [kt.E2, *kt.A]


def _build_Lambda(func, c0, kind="f"):
    Lam = oscillator_Lambda(OscillatorSpec(kind, func, c0))
    return [Lam[i][j] for i in range(3) for j in range(i, 3)]


def _build_I4pair(func, c0):
    d = oscillator_linear(OscillatorSpec("f", func, c0))
    return [*d["I41"], *d["I42"]]


def _build_Iij(b0, b1, b2, c0):
    Iij, _ = oscillator_Iij(Fraction(b0), Fraction(b1), Fraction(b2), Fraction(c0))
    return [Iij[i][j] for i in range(3) for j in range(i, 3)]


def _parse_func(text):
    from .symexpr import parse
    return parse(text) if isinstance(text, str) else _e(text)


def catalog_entries() -> list:
    """Every catalog entry with its parameter names and a builder taking those parameters."""
    E = CatalogEntry
    F = Fraction
    return [
        E("H_nu", "constant omega", None, "omega = k", ("nu", "k"),
          lambda nu, k: [constant_omega_integral("H", F(k), F(nu))]),
        E("L_i", "any omega", None, "omega(t) free", ("nu", "omega"),
          lambda nu, omega: [angular_momentum(i, F(nu), _parse_func(omega)) for i in (1, 2, 3)]),
        E("B_ij", "constant omega", F(-2), "omega = k", ("k",),
          lambda k: [constant_omega_integral("B", F(k), -2, i, j) for i in (1, 2, 3) for j in range(i, 4)]),
        E("I3a+-", "constant omega", F(-2), "omega = k > 0", ("k",),
          lambda k: [constant_omega_integral(n, F(k), -2, i) for n in ("I3+", "I3-") for i in (1, 2, 3)]),
        E("C_i,S_i", "constant omega", F(-2), "omega = k < 0", ("k",),
          lambda k: [constant_omega_integral(n, F(k), -2, i) for n in ("C", "S") for i in (1, 2, 3)]),
        E("R_i", "constant omega", F(1), "omega = k", ("k",),
          lambda k: [constant_omega_integral("R", F(k), 1, i) for i in (1, 2, 3)]),
        E("I1,I2", "constant omega", F(2), "omega = k", ("k",),
          lambda k: [constant_omega_integral("I1", F(k), 2), constant_omega_integral("I2", F(k), 2)]),
        E("J_nu", "polynomial", None, "omega = k (b0 + b1 t + b2 t^2)^((nu-2)/2)", ("nu", "b0", "b1", "b2", "k"),
          lambda nu, b0, b1, b2, k: [J_nu(F(nu), F(b0), F(b1), F(b2), F(k))]),
        E("E2,A_i", "time-dependent Kepler", F(1), "omega = c11/(b0 + b1 t)", ("b0", "b1", "c11"), _build_E2A),
        E("E3", "time-dependent Kepler", F(1), "omega = k (b0 + b1 t + b2 t^2)^(-1/2)", ("b0", "b1", "b2", "k"),
          lambda b0, b1, b2, k: [kepler_E3(F(b0), F(b1), F(b2), F(k))]),
        E("I_ij", "oscillator", F(-2), "omega = k/(b0 + b1 t + b2 t^2)^2", ("b0", "b1", "b2", "c0"), _build_Iij),
        E("Lambda_ij", "oscillator", F(-2), "omega = a3''/(4a3) - (a3'/a3)^2/8 - c0/(4a3^2)", ("f", "c0"),
          lambda f, c0: _build_Lambda(_parse_func(f), F(c0))),
        E("I_4i", "oscillator", F(-2), "omega = g''/(2g)", ("g",),
          lambda g: list(oscillator_linear(OscillatorSpec("g", _parse_func(g)))["I4"])),
        E("I41,I42", "oscillator", F(-2), "omega = f''/(4f) - (f'/f)^2/8 - c0/(4f^2)", ("f", "c0"),
          lambda f, c0: _build_I4pair(_parse_func(f), F(c0))),
        E("Lewis", "oscillator", None, "x'' = -psi^2 x, rho'' = -psi^2 rho + c0/(2 rho^3)", ("psi", "c0"),
          lambda psi, c0: [lewis_invariant_pair(_parse_func(psi), F(c0))]),
    ]


def entry(key: str) -> CatalogEntry:
    for e in catalog_entries():
        if e.key == key:
            return e
    raise KeyError(key)


def build(key: str, params: Mapping) -> list:
    e = entry(key)
    missing = [p for p in e.params if p not in params]
    if missing:
        raise ValueError(f"{key} needs parameters {missing}")
    return e.build(**{p: params[p] for p in e.params})


def listing() -> list:
    return [e.to_json() for e in catalog_entries()]
