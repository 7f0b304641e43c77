from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qfikit.geometry import (
    E2_PARAMS,
    PARAM_NAMES,
    CovariantKTData,
    KillingTensor2,
    KTParams,
    NotKT,
    covariant_to_params,
    generating_vector,
    homothetic_vector,
    identity_tensor,
    is_killing_tensor,
    is_killing_vector,
    killing_vector_basis,
    kt_from_covariant,
    kt_from_params,
    kt_from_vector,
    kt_residual,
    kt_space_dimension_check,
    symmetrized_gradient,
)
from qfikit.coords import coords
from qfikit.symexpr import Exact, add, is_identically_zero, mul

small = st.fractions(min_value=-3, max_value=3, max_denominator=4)
param_vectors = st.lists(small, min_size=20, max_size=20).map(lambda v: KTParams(tuple(v)))


@pytest.mark.parametrize("name", PARAM_NAMES)
def test_each_basis_tensor_is_killing_exactly(name):
    K = kt_from_params(KTParams.of(**{name: 1}))
    for r in kt_residual(K).values():
        assert r.is_zero() or is_identically_zero(r, Exact()).zero


def test_basis_rank():
    assert kt_space_dimension_check()["rank"] == 20
    assert kt_space_dimension_check(dim=2)["rank"] == 6


@given(param_vectors)
def test_linear_combinations_stay_killing(p):
    assert is_killing_tensor(kt_from_params(p))


@given(st.lists(small, min_size=6, max_size=6))
def test_planar_restriction_is_killing(vals):
    p = KTParams.of(**dict(zip(E2_PARAMS, vals)))
    assert is_killing_tensor(kt_from_params(p, dim=2))


def test_planar_restriction_rejects_out_of_plane_parameters():
    with pytest.raises(ValueError):
        kt_from_params(KTParams.of(a1=1), dim=2)


@given(st.lists(small, min_size=20, max_size=20))
def test_covariant_form_maps_into_parameter_family(flat):
    d = CovariantKTData.from_flat(flat)
    K = kt_from_covariant(d)
    assert is_killing_tensor(K)
    assert K.equals(kt_from_params(covariant_to_params(d)))


@given(param_vectors)
def test_generating_vector_reproduces_tensor(p):
    # drop the parameters that only enter through a Killing-vector part
    vals = list(p.values)
    for n in ("a1", "a4", "a6", "a7", "a10", "a14"):
        vals[PARAM_NAMES.index(n)] = Fraction(0)
    q = KTParams(tuple(vals))
    L = generating_vector(q)
    assert KillingTensor2(symmetrized_gradient(L)).equals(kt_from_params(q))


def test_killing_vectors_and_homothety():
    for kv in killing_vector_basis():
        assert is_killing_vector(kv.field())
    h = homothetic_vector()
    assert not is_killing_vector(h)
    assert KillingTensor2(symmetrized_gradient(h)).equals(identity_tensor())


def test_kt_from_vector_rejects_non_killing_result():
    x, y, z = coords(3)
    with pytest.raises(NotKT):
        kt_from_vector([mul(x, x, x), 0, 0])


def test_non_killing_tensor_fails_residual():
    x, y, z = coords(3)
    K = KillingTensor2(((mul(x, x), 0, 0), (0, 0, 0), (0, 0, 0)))
    assert not is_killing_tensor(K)


def test_params_json_round_trip():
    p = KTParams.of(a3=Fraction(1, 2), a17=-2)
    assert KTParams.from_json(p.to_json()) == p
    with pytest.raises(KeyError):
        KTParams.from_json({"a99": 1})
