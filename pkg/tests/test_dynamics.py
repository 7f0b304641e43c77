import csv
import io
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qfikit import catalog as C
from qfikit.conditions import DynSystem, ExplicitSystem
from qfikit.dampxform import lane_emden, nonlin_qfi_mu1
from qfikit.dynamics import (
    FamilyMismatch,
    IntegrationError,
    IntegratorConfig,
    SingularityError,
    State,
    compare_mu1,
    compare_oscillator,
    drift,
    expression_drift,
    integrate,
    kepler_orbit,
    load_manifest,
    oscillator_residual,
    oscillator_solution,
    perturbation_drifts,
    polar_reduction,
    rotation_to_z,
    run_manifest_entry,
)
from qfikit.symexpr import fn, is_identically_zero, num, parse, sym

HARMONIC = DynSystem(1, num(1), (sym("x"),))  # x'' = -x
ONE_PLUS_T2 = parse("(+ 1 (^ t 2))")

unit = st.floats(min_value=-1.5, max_value=1.5, allow_nan=False)


@given(unit, unit)
def test_harmonic_oscillator_matches_exact_solution(x0, v0):
    ts = np.linspace(0, 10, 101)
    tr = integrate(HARMONIC, State(0.0, (x0,), (v0,)), 10.0, IntegratorConfig(rtol=1e-11, atol=1e-13), t_eval=ts)
    exact = x0 * np.cos(ts) + v0 * np.sin(ts)
    assert np.max(np.abs(tr.q[:, 0] - exact)) < 1e-9


def test_error_scales_like_fifth_order():
    errs = []
    for rtol in (1e-6, 1e-8, 1e-10):
        tr = integrate(HARMONIC, State(0.0, (1.0,), (0.0,)), 20.0, IntegratorConfig(rtol=rtol, atol=rtol * 1e-2))
        errs.append(abs(tr.q[-1, 0] - math.cos(20.0)))
    assert errs[0] > errs[1] > errs[2]


def test_dense_output_agrees_with_step_output():
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12)
    steps = integrate(HARMONIC, State(0.0, (1.0,), (0.3,)), 7.0, cfg)
    dense = integrate(HARMONIC, State(0.0, (1.0,), (0.3,)), 7.0, cfg, t_eval=np.linspace(0, 7, 333))
    exact = np.cos(dense.t) + 0.3 * np.sin(dense.t)
    assert np.max(np.abs(dense.q[:, 0] - exact)) < 1e-8
    assert steps.t[-1] == 7.0 and steps.stats["steps"] == len(steps.t) - 1


def test_auxiliary_angle_tracks_its_quadrature():
    spec = C.OscillatorSpec("f", ONE_PLUS_T2, 8)
    r = compare_oscillator(spec, (1, 0.5, -0.3), (0.2, 1, 0.4), 0.0, 3.0)
    assert r["theta_quadrature_error"] <= 1e-9


def test_rule_less_opaque_node_is_rejected():
    s = DynSystem.kepler(1, fn("w"))
    with pytest.raises(IntegrationError):
        integrate(s, State(0.0, (1, 0, 0), (0, 1, 0)), 1.0)


def test_kepler_singularity_guard():
    s = DynSystem.kepler(1, num(1))
    with pytest.raises(SingularityError) as exc:
        integrate(s, State(0.0, (1, 0, 0), (0, 0, 0)), 5.0)
    assert exc.value.t is not None and exc.value.t > 0


def test_bad_inputs():
    with pytest.raises(ValueError):
        integrate(HARMONIC, State(1.0, (1.0,), (0.0,)), 0.5)
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=0)
    with pytest.raises(ValueError):
        integrate(HARMONIC, State(0.0, (1.0, 2.0), (0.0,)), 1.0)


def test_csv_export_and_evaluate():
    spec = C.OscillatorSpec("f", ONE_PLUS_T2, 8)
    lam = C.oscillator_Lambda(spec)[0][0]
    tr = integrate(lam.system, State(0.0, (1, 0, 0), (0, 1, 0)), 1.0, t_eval=[0, 0.5, 1.0],
                   extra_exprs=[spec.theta()])
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["t", "x", "y", "z", "vx", "vy", "vz", "theta"]
    assert len(rows) == 4
    assert tr.evaluate(parse("(* 2 x)"))[0] == 2.0


def test_drift_refuses_foreign_family():
    H = C.constant_omega_integral("H", 1, 1)
    tr = integrate(DynSystem.kepler(1, num(2)), State(0.0, (1, 0, 0), (0, 1, 0)), 1.0)
    with pytest.raises(FamilyMismatch):
        drift(H, tr)


def test_drift_report_fields():
    H = C.constant_omega_integral("H", 1, 1)
    tr = integrate(H.system, State(0.0, (1, 0, 0), (0, 1.1, 0)), 5.0, IntegratorConfig(rtol=1e-12, atol=1e-14))
    rep = drift(H, tr).to_json()
    assert set(rep) == {"integral", "family", "max_abs", "max_rel", "tol", "interval"}
    assert rep["max_rel"] < 1e-10


MANIFEST = load_manifest()


def test_manifest_covers_every_catalog_entry():
    assert MANIFEST["version"] >= 1
    assert {e["key"] for e in MANIFEST["entries"]} == {e.key for e in C.catalog_entries()}


@pytest.mark.parametrize("spec", MANIFEST["entries"], ids=lambda e: e["id"])
def test_manifest_drift_and_sensitivity(spec):
    res = run_manifest_entry(spec, rtol=1e-12)
    for row in res["integrals"]:
        assert row["max_rel"] <= 1e-8, row
        assert row["perturbed_min"] >= 1e-5, row


@pytest.mark.parametrize("key", ["H_nu", "E2,A_i", "Lambda_ij", "Lewis"])
def test_drift_shrinks_with_tolerance(key):
    spec = next(e for e in MANIFEST["entries"] if e["key"] == key)
    d = [max(r["max_rel"] for r in run_manifest_entry(spec, rtol=rt, check_perturbation=False)["integrals"])
         for rt in (1e-8, 1e-10, 1e-12)]
    assert d[1] <= 2 * d[0] and d[2] <= 2 * d[1]


def test_perturbed_integral_drifts():
    spec = next(e for e in MANIFEST["entries"] if e["key"] == "R_i")
    fis = C.build(spec["key"], spec["params"])
    tr = integrate(fis[0].system, State(0.0, tuple(spec["q0"]), tuple(spec["v0"])), 20.0,
                   IntegratorConfig(rtol=1e-12, atol=1e-14), t_eval=np.linspace(0, 20, 201))
    assert min(perturbation_drifts(fis[0].expr, tr)) > 1e-5


# closed forms ----------------------------------------------------------------------------

def test_oscillator_closed_form_is_a_solution():
    spec = C.OscillatorSpec("f", ONE_PLUS_T2, 8)
    q = oscillator_solution(spec, [F(1), F(-2), F(1, 3)], [F(2), F(0), F(5)])
    assert all(is_identically_zero(r).zero for r in oscillator_residual(spec, q))


def test_oscillator_closed_form_matches_integration():
    spec = C.OscillatorSpec("f", ONE_PLUS_T2, 8)
    r = compare_oscillator(spec, (1, 0.5, -0.3), (0.2, 1, 0.4), 0.0, 3.0)
    assert r["max_error"] <= 1e-6


def test_time_dependent_kepler_orbit():
    o = kepler_orbit(1, F(1, 10), 1, 1.0, 0.0, 0.0, 1.1, 0.0, 5.0)
    assert o.max_radial_error <= 1e-6
    assert o.conic_relation_residual <= 1e-10
    assert o.max_angular_momentum_error <= 1e-6
    assert o.max_time_relation_error <= 1e-6
    assert o.report()["orbit"] == "conic"


def test_circular_orbit_has_zero_eccentricity():
    o = kepler_orbit(1, 0, 1, 1.0, 0.0, 0.0, 1.0)
    assert o.alpha < 1e-12
    assert o.radius_at(0.3, 1.0) == pytest.approx(o.L3 ** 2 / 1.0)


@given(st.floats(min_value=0.85, max_value=1.3))
def test_elliptic_orbits_satisfy_conic_relation(v):
    o = kepler_orbit(1, 0, 1, 1.0, 0.0, 0.0, v, 0.0, 3.0, grid=150)
    assert o.alpha < 1
    assert o.conic_relation_residual <= 1e-10
    assert o.max_radial_error <= 1e-6


def test_orbit_preconditions():
    with pytest.raises(ValueError):
        kepler_orbit(1, 0, 1, 1.0, 0.0, 1.0, 0.0)  # radial motion
    with pytest.raises(ValueError):
        kepler_orbit(1, -1, 1, 1.0, 0.0, 0.0, 1.0, 0.0, 5.0)  # b0 + b1 t reaches zero


def test_polar_reduction_of_planar_orbit_is_identity():
    H = C.constant_omega_integral("H", 1, 1)
    tr = integrate(H.system, State(0.0, (1, 0, 0), (0, 1.1, 0)), 3.0, t_eval=np.linspace(0, 3, 31))
    p = polar_reduction(tr)
    assert np.allclose(p.rotation, np.eye(3))


def test_rotation_of_y_axis_momentum():
    R = rotation_to_z([0, 1, 0])
    assert np.allclose(R @ np.array([0, 1, 0]), [0, 0, 1])
    assert np.allclose(R @ R.T, np.eye(3))


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.9, 1.3))
def test_tilted_orbit_round_trip(a, b, speed):
    q0 = np.array([1.0, a * 0.3, b * 0.3])
    v0 = np.cross(np.array([a, b, 1.0]), q0)
    v0 = speed * v0 / np.linalg.norm(v0)
    H = C.constant_omega_integral("H", 1, 1)
    tr = integrate(H.system, State(0.0, tuple(q0), tuple(v0)), 2.0, IntegratorConfig(rtol=1e-10, atol=1e-12),
                   t_eval=np.linspace(0, 2, 41))
    p = polar_reduction(tr)
    q, v = p.to_cartesian()
    assert np.max(np.abs(q - tr.q)) < 1e-12
    assert np.max(np.abs(v - tr.v)) < 1e-12


def test_polar_reduction_needs_angular_momentum():
    H = C.constant_omega_integral("H", 1, 1)
    tr = integrate(H.system, State(0.0, (1, 0, 0), (0.1, 0, 0)), 0.5)
    with pytest.raises(ValueError):
        polar_reduction(tr)


def test_mu1_closed_solution_matches_integration():
    r1 = nonlin_qfi_mu1(parse("(+ 1 (* 1/2 t))"), parse("(^ (+ 1 t) -1)"))
    res = compare_mu1(r1, 0.7, -0.2, 0.0, 4.0)
    assert res["max_error"] <= 1e-6
    assert res["amplitude_check"] <= 1e-12


def test_lewis_pair_conserved_numerically():
    spec = next(e for e in MANIFEST["entries"] if e["key"] == "Lewis")
    res = run_manifest_entry(spec, rtol=1e-12, check_perturbation=False)
    assert res["integrals"][0]["max_rel"] <= 1e-8


def test_explicit_system_integrates():
    s = ExplicitSystem(1, (parse("(* -1 x)"),))
    tr = integrate(s, State(0.0, (1.0,), (0.0,)), math.pi)
    assert tr.q[-1, 0] == pytest.approx(-1.0, abs=1e-8)


@pytest.mark.parametrize("k,mu,c", [(2, 3, (1, 0, 0)), (1, 3, (1, 0, 0)), (3, 3, (0, -2, 0))])
def test_lane_emden_drift(k, mu, c):
    le = lane_emden(k, mu, *c)
    d = expression_drift(le.normalized, le.system, State(1.0, (0.5,), (0.1,)), 5.0)
    assert d["max_rel"] <= 1e-8


