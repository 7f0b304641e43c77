from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qfikit.conditions import is_first_integral
from qfikit.dampxform import (
    AuxiliaryConditionError,
    lane_emden,
    lane_emden_case_label,
    nonlin_qfi_general,
    nonlin_qfi_mu0,
    nonlin_qfi_mu1,
    nonlin_qfi_mu2,
    reparameterize,
)
from qfikit.symexpr import add, differentiate, is_identically_zero, mul, num, parse, power, sym

t, s, x, vx = sym("t"), sym("s"), sym("x"), sym("vx")
PHIS = [num(0), num(2), parse("(^ (+ 1 t) -1)"), parse("(* -2 (^ t -1))"), parse("(* -1 (^ t -1))"), parse("(sin t)")]


def same(a, b):
    return is_identically_zero(add(a, mul(-1, b))).zero


@pytest.mark.parametrize("phi", PHIS, ids=lambda p: str(p))
def test_reparameterization_derivatives(phi):
    r = reparameterize(phi)
    assert same(differentiate(r.s, "t"), r.E)
    assert same(differentiate(r.int_phi, "t"), r.phi)


@given(st.fractions(min_value=-3, max_value=3, max_denominator=5).filter(bool),
       st.fractions(min_value=1, max_value=3, max_denominator=5),
       st.fractions(min_value=F(1, 5), max_value=2, max_denominator=5))
def test_reciprocal_linear_damping(c, a, b):
    phi = mul(c, power(add(a, mul(b, t)), -1))
    r = reparameterize(phi)
    assert r.form == "c/(a+bt)"
    assert same(differentiate(r.s, "t"), r.E)


@pytest.mark.parametrize("mu", [0, 1, 2, 3, F(1, 2)])
@pytest.mark.parametrize("phi", [num(0), parse("(^ (+ 1 t) -1)")], ids=["undamped", "damped"])
def test_general_family_conserved(mu, phi):
    assert nonlin_qfi_general(mu, phi, 1, 1, 0).is_conserved()


def test_general_family_with_opaque_damping():
    assert nonlin_qfi_general(3, parse("(sin t)"), 1, 1, 2).is_conserved()


def test_excluded_power():
    with pytest.raises(ValueError):
        nonlin_qfi_general(-1, 0, 1, 0, 0)
    with pytest.raises(ValueError):
        nonlin_qfi_general(2, 0, 0, 0, 0)


@pytest.mark.parametrize("phi", [num(0), parse("(^ (+ 1 t) -1)")], ids=["undamped", "damped"])
def test_mu0_constructor_matches_general(phi):
    P = add(1, s, mul(F(1, 4), s, s))
    r0 = nonlin_qfi_mu0(P, 0, power(P, F(-3, 2)), phi)
    g0 = nonlin_qfi_general(0, phi, 1, 1, F(1, 4))
    assert same(r0.I, g0.I) and same(r0.omega, g0.omega)


@pytest.mark.parametrize("phi", [num(0), parse("(^ (+ 1 t) -1)")], ids=["undamped", "damped"])
def test_mu2_constructor_matches_general(phi):
    P = add(2, mul(3, s), mul(F(1, 2), s, s))
    r2 = nonlin_qfi_mu2(P, 0, 0, phi)
    g2 = nonlin_qfi_general(2, phi, 2, 3, F(1, 2))
    assert same(r2.I, g2.I) and same(r2.omega, g2.omega)


@pytest.mark.parametrize("phi", [num(0), parse("(^ (+ 1 t) -1)")], ids=["undamped", "damped"])
def test_mu1_constructor_matches_general(phi):
    # P = (1 + s)^2 has zero discriminant, so rho = 1 + s(t)
    rep = reparameterize(phi)
    rho = add(1, rep.s)
    r1 = nonlin_qfi_mu1(rho, phi)
    g1 = nonlin_qfi_general(1, phi, 1, 2, 1)
    assert same(r1.omega, g1.omega)
    assert same(r1.I, g1.I)


def test_mu0_with_linear_term_and_bad_condition():
    assert nonlin_qfi_mu0(num(1), s, num(1), 0).is_conserved()
    with pytest.raises(AuxiliaryConditionError) as exc:
        nonlin_qfi_mu0(num(1), mul(s, s), num(1), 0)
    assert exc.value.condition == "b1'' = 2 wbar' K11 + 3 wbar K11'"


def test_mu2_nontrivial_and_bad_condition():
    assert nonlin_qfi_mu2(mul(4, power(s, F(6, 7))), F(3072, 343), 0).is_conserved()
    with pytest.raises(AuxiliaryConditionError) as exc:
        nonlin_qfi_mu2(add(1, s), 1, 0)
    assert exc.value.condition.startswith("K11'''")


def test_mu1_solution_and_integral():
    r1 = nonlin_qfi_mu1(parse("(+ 1 (* 1/2 t))"), parse("(^ (+ 1 t) -1)"))
    assert is_identically_zero(r1.solution_residual()).zero
    assert is_first_integral(r1.I, r1.system).zero


LANE_EMDEN = [
    ((1, 5, (1, 0, 0)), "Case 5"),
    ((1, 3, (0, 1, 0)), "Case 6"),
    ((1, 3, (0, 0, 1)), "Case 7"),
    ((2, 3, (1, 0, 0)), "Case 2"),
    ((2, 3, (0, 1, 0)), "Case 3"),
    ((2, 3, (0, 0, 1)), "Case 4"),
    ((3, 3, (0, 1, 0)), "Case 1 (first subcase)"),
    ((F(3, 2), 3, (0, 0, 1)), "Case 1 (second subcase)"),
]


@pytest.mark.parametrize("args,label", LANE_EMDEN)
def test_lane_emden_labels_and_conservation(args, label):
    le = lane_emden(*args[:2], *args[2])
    assert le.label == label
    assert is_first_integral(le.I, le.system).zero
    assert is_first_integral(le.normalized, le.system).zero


def test_constant_omega_specials():
    assert same(lane_emden(3, 3, 0, 1, 0).omega, num(-8))
    assert same(lane_emden(F(3, 2), 3, 0, 0, 1).omega, num(F(1, 64)))


@pytest.mark.parametrize("mu", [2, 3, 5])
@pytest.mark.parametrize("c", [1, 2, F(1, 3)])
def test_case5_normal_form(mu, c):
    le = lane_emden(1, mu, c, 0, 0)
    A = power(num(c), -F(mu + 3, 2))
    expected = add(mul(F(1, 2), t, t, vx, vx), mul(A, F(1, mu + 1), power(x, mu + 1)))
    assert same(le.normalized, expected)


def test_mixed_pattern_has_no_label():
    assert lane_emden_case_label(2, 3, 1, 1, 0) is None
