from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qfikit import catalog as C
from qfikit.catalog import FirstIntegral
from qfikit.conditions import DynSystem, QFICandidate, determining_residuals
from qfikit.symexpr import Exact, Sampled, fn, parse, sym

SAMPLE_PARAMS = {
    "H_nu": dict(nu=1, k=1),
    "L_i": dict(nu=1, omega="(^ (+ 1 t) -1)"),
    "B_ij": dict(k=-1),
    "I3a+-": dict(k=2),
    "C_i,S_i": dict(k=-2),
    "R_i": dict(k=1),
    "I1,I2": dict(k=1),
    "J_nu": dict(nu=3, b0=1, b1=1, b2=1, k=1),
    "E2,A_i": dict(b0=1, b1=F(1, 10), c11=1),
    "E3": dict(b0=1, b1=1, b2=1, k=1),
    "I_ij": dict(b0=1, b1=1, b2=1, c0=1),
    "Lambda_ij": dict(f="(+ 1 (^ t 2))", c0=8),
    "I_4i": dict(g="(+ 1 (^ t 2))"),
    "I41,I42": dict(f="(+ 1 (^ t 2))", c0=8),
    "Lewis": dict(psi="(+ 1 (* 1/10 (sin t)))", c0=2),
}


def test_every_entry_has_sample_parameters():
    assert {e.key for e in C.catalog_entries()} == set(SAMPLE_PARAMS)


@pytest.mark.parametrize("key", sorted(SAMPLE_PARAMS))
def test_entry_integrals_are_conserved(key):
    fis = C.build(key, SAMPLE_PARAMS[key])
    assert fis
    for fi in fis:
        assert fi.is_conserved(), fi.name


TABLE1 = [("H", None, None), ("L", 1, None), ("L", 3, None)]


@pytest.mark.parametrize("nu", [-2, 1, 2, F(3, 2), F(-1, 2), 3])
@pytest.mark.parametrize("name,i,j", TABLE1)
def test_constant_omega_residuals_vanish_for_any_power(nu, name, i, j):
    fi = C.constant_omega_integral(name, 2, nu, i, j)
    strategy = Exact() if F(nu).denominator == 1 else Sampled(n=32, eps=1e-9)
    rep = determining_residuals(QFICandidate.from_expr(fi.expr, 3), fi.system, strategy)
    assert rep.all_zero


@pytest.mark.parametrize("name,k,nu,i,j", [
    ("B", -1, -2, 1, 2), ("I3+", 2, -2, 1, None), ("I3-", 2, -2, 3, None), ("C", -2, -2, 2, None),
    ("S", -2, -2, 2, None), ("R", 1, 1, 1, None), ("R", 3, 1, 3, None), ("I1", 1, 2, None, None),
    ("I2", 1, 2, None, None),
])
def test_special_power_integrals_have_exact_zero_residuals(name, k, nu, i, j):
    fi = C.constant_omega_integral(name, k, nu, i, j)
    rep = determining_residuals(QFICandidate.from_expr(fi.expr, 3), fi.system, Exact())
    assert rep.all_zero and rep.method == "exact"


def test_preconditions_are_enforced():
    with pytest.raises(ValueError):
        C.constant_omega_integral("R", 1, 2, 1)
    with pytest.raises(ValueError):
        C.constant_omega_integral("H", 0, 1)
    with pytest.raises(TypeError):
        FirstIntegral("bare", sym("x"), None)


@given(st.fractions(min_value=F(1, 6), max_value=3, max_denominator=6),
       st.fractions(min_value=-1, max_value=1, max_denominator=6))
def test_time_dependent_kepler_relations_hold_for_any_parameters(b0, b1):
    rel = C.check_relations(C.kepler_relations(b0, b1, 1))
    assert all(v.zero for v in rel.values())


def test_kepler_relations_symbolic():
    b0, b1, c11 = sym("b0"), sym("b1"), sym("c11")
    for suite in (C.kepler_relations(b0, b1, c11), C.kepler_reduction_relations(b0, c11)):
        for name, v in C.check_relations(suite, Exact()).items():
            assert v.zero and v.method == "exact", name


def test_oscillator_relations_with_opaque_angle():
    spec = C.OscillatorSpec("f", fn("f"), sym("c0"))
    for name, v in C.check_relations(C.oscillator_relations(spec)).items():
        assert v.zero and v.method == "exact", name


@pytest.mark.parametrize("suite", [
    lambda: C.energy_relations(sym("b0"), sym("b1"), sym("b2"), sym("k")),
    lambda: C.polynomial_family_relations(2, 3, 5, 7, F(1, 3)),
    lambda: C.exponential_pair_relations(2),
    lambda: C.oscillator_reductions(3, -2),
])
def test_other_relation_suites(suite):
    assert all(v.zero for v in C.check_relations(suite()).values())


def test_relations_detect_a_wrong_identity():
    kt = C.kepler_time_dependent(1, F(1, 10), 1)
    wrong = {"E2 = A1": kt.E2.expr - kt.A[0].expr}
    assert not C.check_relations(wrong)["E2 = A1"].zero


def test_oscillator_degenerate_choice_rejected():
    # f = 1 + t^2 with c0 = 2 makes omega vanish identically
    spec = C.OscillatorSpec("f", parse("(+ 1 (^ t 2))"), 2)
    with pytest.raises(ValueError):
        C.oscillator_Lambda(spec)


def test_listing_is_json_friendly():
    import json

    text = json.dumps(C.listing())
    assert "E2,A_i" in text


@pytest.mark.parametrize("nu,name", [(1, "arbitrary omega"), (1, "omega_nu"), (1, "omega_2K"), (1, "omega_3K"),
                                     (-2, "Lewis-type omega"), (-2, "linear-integral omega")])
def test_reduction_branches(nu, name):
    assert C.verify_branch(nu, name)
