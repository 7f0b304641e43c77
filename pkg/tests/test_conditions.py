from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qfikit.conditions import (
    RESIDUAL_GROUPS,
    DegenerateSystem,
    DynSystem,
    QFICandidate,
    PolyOmegaData,
    determining_residuals,
    is_first_integral,
    kepler_reduction,
    point_noether_case,
    search_integral2,
    check_linear_omega_integral,
    check_poly_omega_integral,
    total_time_derivative,
)
from qfikit.coords import coords, radius, radius_squared, vels
from qfikit.symexpr import ZERO, Exact, add, cos, is_identically_zero, mul, num, parse, power, sin, sym

x, y, z = coords(3)
vx, vy, vz = vels(3)
t = sym("t")
X = sym("x")


def hamiltonian(k=1):
    return add(mul(F(1, 2), add(vx * vx, vy * vy, vz * vz)), mul(-k, power(radius(3), -1)))


def test_kepler_energy_and_angular_momentum_have_zero_residuals():
    sysK = DynSystem.kepler(1, 1)
    for I in (hamiltonian(), x * vy - y * vx):
        rep = determining_residuals(QFICandidate.from_expr(I, 3), sysK)
        assert rep.all_zero and rep.method == "exact"


def test_bad_candidate_names_failing_groups():
    rep = determining_residuals(QFICandidate.from_expr(x * vy, 3), DynSystem.kepler(1, 1))
    assert not rep.all_zero
    assert "tensor_evolution" in rep.failed()
    data = rep.to_json()
    assert set(data["conditions"]) == set(RESIDUAL_GROUPS)


@given(st.fractions(min_value=-2, max_value=2, max_denominator=5).filter(lambda c: c != 0))
def test_candidate_expression_round_trip(c):
    I = add(mul(c, vx, vy), mul(x, vz), mul(c, x, y))
    cand = QFICandidate.from_expr(I, 3)
    assert is_identically_zero(add(cand.expr(), mul(-1, I)), Exact()).zero


@given(st.integers(-3, 3), st.integers(1, 4))
def test_residuals_agree_with_total_derivative(a, b):
    # the six groups vanish iff dI/dt does: check on energy-like candidates with a wrong coefficient
    sysK = DynSystem.kepler(1, b)
    I = add(mul(F(1, 2), add(vx * vx, vy * vy, vz * vz)), mul(-a, power(radius(3), -1)))
    rep = determining_residuals(QFICandidate.from_expr(I, 3), sysK)
    assert rep.all_zero == is_first_integral(I, sysK).zero == (a == b)


def test_degenerate_and_velocity_dependent_systems_rejected():
    with pytest.raises(DegenerateSystem):
        DynSystem.kepler(1, 0)
    with pytest.raises(ValueError):
        DynSystem(3, num(1), (vx, 0, 0))


def test_system_json_round_trip():
    s = DynSystem.kepler(F(3, 2), parse("(+ 1 t)"))
    s2 = DynSystem.from_json(s.to_json())
    assert s2.Q == s.Q and s2.omega == s.omega


def test_damped_total_derivative():
    # x'' = -x + phi x' with phi = 0: the energy is conserved
    s = DynSystem.nonlinear(1, num(1))
    assert is_identically_zero(total_time_derivative(add(mul(vels(1)[0], vels(1)[0]), mul(X, X)), s)).zero


# Theorem 1 --------------------------------------------------------------------------------

def test_uniform_force_instance():
    s1 = DynSystem(1, add(2, mul(3, t)), (num(1),))
    d = PolyOmegaData(0, 1, (2, 3), (((num(0),),),), ((num(1),),), 1, ZERO)
    res = check_poly_omega_integral(d, s1)
    assert res.ok, res.failed_name
    assert is_first_integral(res.candidate.expr(), s1).zero


def _instance(ell, b, **mut):
    b = [F(v) for v in b]
    Q = mut.get("Q", power(X, -(2 * ell + 3)))
    C0 = mut.get("C0", num(-b[ell - 1] / (ell * b[ell])))
    default_G = mul(2 * b[0] * C0.value if C0.head == "num" else 0, power(X, -(2 * ell + 2)), F(-1, 2 * ell + 2))
    G = mut.get("G", default_G)
    C1 = mut.get("C1", num(-1))
    L1 = mut.get("L1", num(0))
    s = mut.get("s", 0)
    w = add(*[mul(bb, power(t, i)) for i, bb in enumerate(b)])
    sys1 = DynSystem(1, w, (Q,))
    d = PolyOmegaData(1, ell, b, (((C0,),), ((C1,),)), ((X,), (L1,)), s, G)
    return check_poly_omega_integral(d, sys1), sys1


@pytest.mark.parametrize("ell,b", [(1, (1, 2)), (2, (F(1, 4), 1, 1)), (3, (1, 3, 3, 1))])
def test_first_order_instances_pass(ell, b):
    res, s = _instance(ell, b)
    assert res.ok, res.failed_name
    assert is_first_integral(res.candidate.expr(), s).zero


@pytest.mark.parametrize("mutation,name", [
    (dict(C0=X), "C0 is a Killing tensor"),
    (dict(C1=num(-2)), "C_k equals minus the symmetrized gradient of L_(k-1)"),
    (dict(L1=X), "L_n is a Killing vector"),
    (dict(s=1), "L_n . Q equals s"),
    (dict(C0=num(0)), "C0 Q = -(b_(ell-1)/(ell b_ell)) L0_(a;b) Q^b"),
    (dict(G=ZERO), "gradient of G"),
])
def test_mutants_name_the_violated_condition(mutation, name):
    res, _ = _instance(2, (F(1, 4), 1, 1), **mutation)
    assert not res.ok
    assert res.failed_name == name


def test_wrong_potential_power_is_caught():
    res, _ = _instance(2, (F(1, 4), 1, 1), Q=power(X, -4))
    assert not res.ok and res.failed_name.startswith("grad(L0.Q)")


def test_b_relation_mutant():
    res, _ = _instance(2, (F(1, 3), 1, 1))
    assert not res.ok and res.failed_name == "b-coefficient relation"


def test_point_symmetry_case_three():
    sysO = DynSystem(3, num(1), tuple(coords(3)))
    V = mul(F(1, 2), radius_squared(3))
    data = dict(psi=1, V=V, M=sin(mul(2, t)), N=mul(F(-1, 2), cos(mul(2, t))), C=0, d2=-4, k=0)
    res = point_noether_case(3, sysO, data)
    assert res.ok
    data.update(k=1, C=mul(F(-1, 2), cos(mul(2, t))))
    bad = point_noether_case(3, sysO, data)
    assert not bad.ok and bad.failed_name == "potential balance"


def test_second_integral_conditions():
    sysI = DynSystem(3, add(1, t), tuple(coords(3)))
    assert not check_linear_omega_integral(list(coords(3)), 1, 1, 1, sysI).ok
    res = check_linear_omega_integral([mul(x, x, x), 0, 0], 1, 1, 1, sysI)
    assert not res.ok and res.failed_name == "L_(a;b) is a Killing tensor"


def test_second_integral_search_small_support():
    out = search_integral2(max_support=1, values=(1, -1))
    assert out["candidates_tried"] > 0
    assert out["nontrivial_found"] == 0


@pytest.mark.parametrize("nu", [1, 2, -2, F(1, 2)])
def test_kepler_reduction_branches_verified(nu):
    rep = kepler_reduction(nu)
    assert rep["ok"]
    assert all(b["verified"] for b in rep["branches"])


def test_kepler_reduction_special_branches_depend_on_nu():
    names1 = {b["name"] for b in kepler_reduction(1, verify=False)["branches"]}
    names3 = {b["name"] for b in kepler_reduction(3, verify=False)["branches"]}
    assert "omega_2K" in names1 and "omega_2K" not in names3
