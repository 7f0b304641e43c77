"""Damping absorption and the 1d nonlinear family x'' = -omega(t) x^mu + phi(t) x'.

The new time s(t) = int exp(int phi dt) dt removes the damping term: with
x' = dx/ds the equation becomes x'' = -wbar(s) x^mu, where
omega(t) = wbar(s(t)) exp(2 int phi dt).  Quantities written in s-space use
the symbols ``s``, ``x`` and ``xp`` (for dx/ds).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .conditions import DynSystem, is_first_integral
from .symexpr import (
    ZERO,
    Expr,
    Verdict,
    add,
    depends_on,
    differentiate,
    ensure,
    exp,
    fn,
    free_symbols,
    is_identically_zero,
    log,
    mul,
    num,
    power,
    sin,
    cos,
    substitute,
    sym,
    to_prefix,
)

T = sym("t")
S = sym("s")
X = sym("x")
XP = sym("xp")
VX = sym("vx")


class AuxiliaryConditionError(ValueError):
    """A supplied auxiliary function violates its defining equation."""

    def __init__(self, condition: str, verdict: Verdict):
        super().__init__(f"auxiliary condition violated: {condition}")
        self.condition = condition
        self.verdict = verdict


def _e(v) -> Expr:
    return v if isinstance(v, Expr) else num(Fraction(v))


def _ds(e: Expr) -> Expr:
    return differentiate(e, "s")


def _dt(e: Expr) -> Expr:
    return differentiate(e, "t")


# reparameterization ------------------------------------------------------------------

@dataclass(frozen=True)
class Reparam:
    """s(t) and its companions for a damping function phi(t).

    ``int_phi`` is int phi dt, ``E`` = exp(int phi dt) = ds/dt.  ``t_of_s``
    is the inverse map when a closed form exists.
    """

    phi: Expr
    int_phi: Expr
    E: Expr
    s: Expr
    t_of_s: Expr | None
    closed: bool
    form: str

    def to_time(self, e_s: Expr) -> Expr:
        """Rewrite an s-space expression in t; xp becomes x'/E."""
        return substitute(e_s, {"s": self.s, "xp": mul(VX, power(self.E, -1))}, compose_var="t")

    def omega_from_bar(self, wbar: Expr) -> Expr:
        return mul(self.to_time(ensure(wbar)), power(self.E, 2))

    def bar_from_omega(self, omega: Expr) -> Expr:
        if self.t_of_s is None:
            raise ValueError("no closed-form inverse t(s) for this damping")
        back = {"t": self.t_of_s}
        return mul(substitute(ensure(omega), back), power(substitute(self.E, back), -2))

    def dt_ds(self) -> Expr:
        return power(self.E, -1)


def _linear_reciprocal(phi: Expr):
    """(alpha, beta) with phi = 1/(alpha + beta t), or None."""
    if free_symbols(phi) - {"t"} or phi.is_zero():
        return None
    inv = power(phi, -1)
    if not is_identically_zero(_dt(_dt(inv))).zero:
        return None
    beta = _dt(inv)
    alpha = substitute(inv, {"t": 0})
    if beta.head != "num" or alpha.head != "num":
        return None
    return alpha.value, beta.value


def reparameterize(phi, t0=0) -> Reparam:
    """Closed forms for phi = 0, a constant, c/(a + b t) and -k/t; opaque nodes otherwise.

    Integration constants are fixed so that int phi and s vanish at t0,
    except for phi = -k/t where the conventional M(t) = ln t (k = 1) or
    t^(1-k)/(1-k) is used, with exp(int phi dt) = t^-k.
    """
    phi = _e(phi)
    t0 = Fraction(t0)
    if phi.is_zero():
        return Reparam(phi, ZERO, num(1), add(T, -t0), add(S, t0), True, "zero")
    if not (free_symbols(phi) - {"t"}) and not depends_on(phi, "t") and phi.head == "num":
        c = phi.value
        ip = mul(c, add(T, -t0))
        E = exp(ip)
        s = mul(Fraction(1) / c, add(E, -1))
        t_of_s = add(t0, mul(Fraction(1) / c, log(add(1, mul(c, S)))))
        return Reparam(phi, ip, E, s, t_of_s, True, "constant")
    lr = _linear_reciprocal(phi)
    if lr is not None:
        alpha, beta = lr
        if beta == 0:
            return reparameterize(num(1 / alpha), t0)
        p = 1 / beta
        if alpha == 0:
            k = -p
            ip = mul(-k, log(T))
            E = power(T, -k)
            if k == 1:
                return Reparam(phi, ip, E, log(T), exp(S), True, "-k/t")
            return Reparam(phi, ip, E, mul(Fraction(1) / (1 - k), power(T, 1 - k)),
                           power(mul(1 - k, S), Fraction(1) / (1 - k)), True, "-k/t")
        d0 = alpha + beta * t0
        u = mul(Fraction(1) / d0, add(alpha, mul(beta, T)))
        ip = mul(p, log(u))
        E = power(u, p)
        if p == -1:
            s = mul(d0 / beta, log(u))
            u_of_s = exp(mul(beta / d0, S))
        else:
            s = mul(d0 / (beta * (p + 1)), add(power(u, p + 1), -1))
            u_of_s = power(add(1, mul((p + 1) * beta / d0, S)), Fraction(1) / (p + 1))
        t_of_s = mul(Fraction(1) / beta, add(mul(d0, u_of_s), -alpha))
        return Reparam(phi, ip, E, s, t_of_s, True, "c/(a+bt)")
    ip = fn("Phi", "t", 0, phi)
    E = exp(ip)
    return Reparam(phi, ip, E, fn("s", "t", 0, E), None, False, "opaque")


# nonlinear family ---------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinResult:
    omega: Expr
    I: Expr
    system: DynSystem
    reparam: Reparam
    I_s: Expr | None = None
    wbar: Expr | None = None

    def is_conserved(self, strategy=None) -> bool:
        return is_first_integral(self.I, self.system, strategy).zero

    def to_json(self) -> dict:
        return {"omega": to_prefix(self.omega), "I": to_prefix(self.I), "mu": str(self.system.mu),
                "phi": to_prefix(self.system.phi)}


def _check_mu(mu) -> Fraction:
    mu = Fraction(mu)
    if mu == -1:
        raise ValueError("mu = -1 is excluded")
    return mu


def _finish(mu, wbar_s: Expr, I_s: Expr, rep: Reparam) -> NonlinResult:
    omega = rep.omega_from_bar(wbar_s)
    I = rep.to_time(I_s)
    return NonlinResult(omega, I, DynSystem.nonlinear(mu, omega, rep.phi), rep, I_s, wbar_s)


def nonlin_qfi_general(mu, phi, c1, c2, c3, t0=0) -> NonlinResult:
    """omega = P(s)^(-(mu+3)/2) exp(2 int phi), P = c1 + c2 s + c3 s^2, with its quadratic integral."""
    mu = _check_mu(mu)
    c1, c2, c3 = (Fraction(c) for c in (c1, c2, c3))
    if c1 == c2 == c3 == 0:
        raise ValueError("c1, c2, c3 must not all vanish")
    rep = reparameterize(phi, t0)
    P = add(c1, mul(c2, S), mul(c3, S, S))
    wbar = power(P, -(mu + 3) / 2)
    I_s = add(mul(P, XP, XP), mul(-1, _ds(P), X, XP),
              mul(Fraction(2) / (mu + 1), power(P, -(mu + 1) / 2), power(X, mu + 1)),
              mul(c3, X, X))
    return _finish(mu, wbar, I_s, rep)


def _require(name: str, e: Expr, strategy=None):
    v = is_identically_zero(e, strategy)
    if not v.zero:
        raise AuxiliaryConditionError(name, v)
    return v


def nonlin_qfi_mu0(K11, b1, wbar, phi=0, t0=0, strategy=None) -> NonlinResult:
    """mu = 0 with K11(s) quadratic and b1'' = 2 wbar' K11 + 3 wbar K11'.

    The term int b1 wbar ds is an opaque node advanced by quadrature.
    """
    K11, b1, wbar = ensure(K11), ensure(b1), ensure(wbar)
    _require("K11''' = 0", _ds(_ds(_ds(K11))), strategy)
    _require("b1'' = 2 wbar' K11 + 3 wbar K11'",
             add(_ds(_ds(b1)), mul(-2, _ds(wbar), K11), mul(-3, wbar, _ds(K11))), strategy)
    rep = reparameterize(phi, t0)
    integrand = mul(b1, wbar)
    if integrand.is_zero():
        Jb = ZERO
    else:
        Jb = fn("Jb", "t", 0, mul(rep.to_time(integrand), rep.E))
    I_s = add(mul(K11, XP, XP), mul(-1, _ds(K11), X, XP), mul(b1, XP),
              mul(Fraction(1, 2), _ds(_ds(K11)), X, X), mul(2, wbar, K11, X), mul(-1, _ds(b1), X))
    res = _finish(0, wbar, I_s, rep)
    return NonlinResult(res.omega, add(res.I, Jb), res.system, rep, I_s, wbar)


def nonlin_qfi_mu2(K11, c4, c5, phi=0, t0=0, strategy=None) -> NonlinResult:
    """mu = 2 with wbar = K11^(-5/2) and K11''' = 2 (c4 + c5 s) K11^(-5/2)."""
    K11 = ensure(K11)
    lin = add(_e(c4), mul(_e(c5), S))
    _require("K11''' = 2 (c4 + c5 s) K11^(-5/2)",
             add(_ds(_ds(_ds(K11))), mul(-2, lin, power(K11, Fraction(-5, 2)))), strategy)
    rep = reparameterize(phi, t0)
    wbar = power(K11, Fraction(-5, 2))
    I_s = add(mul(K11, XP, XP), mul(-1, _ds(K11), X, XP), mul(lin, XP),
              mul(Fraction(2, 3), power(K11, Fraction(-3, 2)), power(X, 3)),
              mul(Fraction(1, 2), _ds(_ds(K11)), X, X), mul(-1, _e(c5), X))
    return _finish(2, wbar, I_s, rep)


@dataclass(frozen=True)
class Mu1Result:
    omega: Expr
    theta: Expr
    solution: Expr
    I: Expr
    system: DynSystem
    reparam: Reparam

    def solution_residual(self) -> Expr:
        """x'' + omega x - phi x' for the closed-form solution (should vanish identically)."""
        x = self.solution
        xd = _dt(x)
        return add(_dt(xd), mul(self.omega, x), mul(-1, self.system.phi, xd))


def nonlin_qfi_mu1(rho, phi=0, t0=0) -> Mu1Result:
    """mu = 1: omega = -rho''/rho + phi rho'/rho + rho^-4 exp(2 int phi).

    General solution x = rho (A sin theta + B cos theta), theta' = rho^-2 exp(int phi);
    A^2 + B^2 = (x/rho)^2 + ((rho x' - rho' x)/exp(int phi))^2 is the quadratic integral.
    """
    rho = _e(rho)
    if is_identically_zero(rho).zero:
        raise ValueError("rho must not vanish identically")
    rep = reparameterize(phi, t0)
    E = rep.E
    rd = _dt(rho)
    omega = add(mul(-1, _dt(rd), power(rho, -1)), mul(rep.phi, rd, power(rho, -1)),
                mul(power(rho, -4), power(E, 2)))
    theta = fn("theta", "t", 0, mul(power(rho, -2), E))
    A, B = sym("A"), sym("B")
    x = mul(rho, add(mul(A, sin(theta)), mul(B, cos(theta))))
    I = add(power(mul(X, power(rho, -1)), 2),
            power(mul(add(mul(rho, VX), mul(-1, rd, X)), power(E, -1)), 2))
    return Mu1Result(omega, theta, x, I, DynSystem.nonlinear(1, omega, rep.phi), rep)


# Lane-Emden -----------------------------------------------------------------------------

@dataclass(frozen=True)
class LaneEmdenResult:
    omega: Expr
    I: Expr
    label: str | None
    normalized: Expr
    factor: Fraction
    amplitude: Expr | None
    system: DynSystem

    def to_json(self) -> dict:
        return {"omega": to_prefix(self.omega), "I": to_prefix(self.I), "label": self.label,
                "normalized": to_prefix(self.normalized), "factor": str(self.factor)}


def lane_emden_case_label(k, mu, c1, c2, c3) -> str | None:
    """Name of the integrable case selected by a one-hot (c1, c2, c3) pattern."""
    k, mu = Fraction(k), Fraction(mu)
    hot = [i for i, c in enumerate((c1, c2, c3)) if Fraction(c) != 0]
    if len(hot) != 1:
        return None
    i = hot[0]
    if k == 1:
        return ("Case 5", "Case 6", "Case 7")[i]
    if i == 0:
        return "Case 2"
    if i == 1:
        if mu != 1 and k == (mu + 3) / (mu - 1):
            return "Case 1 (first subcase)"
        return "Case 3"
    if k == (mu + 3) / (mu + 1):
        return "Case 1 (second subcase)"
    return "Case 4"


def lane_emden(k, mu, c1, c2, c3) -> LaneEmdenResult:
    """x'' = -omega(t) x^mu - (k/t) x' with omega = t^-2k (c1 + c2 M + c3 M^2)^(-(mu+3)/2).

    ``I`` is the integral in the general normalization; ``normalized`` is it
    rescaled by ``factor`` to the customary single-case form, whose
    potential coefficient is ``amplitude``.
    """
    k = Fraction(k)
    mu = _check_mu(mu)
    cs = tuple(Fraction(c) for c in (c1, c2, c3))
    res = nonlin_qfi_general(mu, mul(-k, power(T, -1)), *cs)
    label = lane_emden_case_label(k, mu, *cs)
    factor = Fraction(1)
    amp = None
    hot = [i for i, c in enumerate(cs) if c != 0]
    if len(hot) == 1:
        i = hot[0]
        c = cs[i]
        if k == 1 or i == 0:
            factor = 1 / (2 * c)
        elif i == 1:
            factor = (1 - k) / c
        else:
            factor = (1 - k) ** 2 / (2 * c)
        if i == 0:
            amp = power(num(c), -(mu + 3) / 2)
        elif k == 1:
            amp = power(num(c), -(mu + 3) / 2)
        elif i == 1:
            amp = power(num(c / (1 - k)), -(mu + 3) / 2)
        else:
            amp = power(num((1 - k) ** 2 / c), (mu + 3) / 2)
    return LaneEmdenResult(res.omega, res.I, label, mul(factor, res.I), factor, amp, res.system)


__all__ = [
    "AuxiliaryConditionError", "Reparam", "reparameterize", "NonlinResult", "nonlin_qfi_general",
    "nonlin_qfi_mu0", "nonlin_qfi_mu1", "nonlin_qfi_mu2", "Mu1Result", "LaneEmdenResult", "lane_emden",
    "lane_emden_case_label",
]
