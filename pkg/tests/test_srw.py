import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import first_contact_enum, origin_first_return, srw_contact_prob
from polypin.errors import ParameterError
from polypin.srw import (INFINITY, InterfaceSpec, bound_ratio, convolve_laws, hitting_law,
                         interface_visit_prob, k_fold_hitting, reflection_identity_check,
                         return_origin_expansions, verify_hitting_bounds)


def test_t2_single_atom():
    law = hitting_law(InterfaceSpec(2), 2)
    assert law.q[2] == 1.0
    assert law.q0[2] == 0.5
    assert law.q1[2] == 0.25


def test_t4_upper_neighbour_at_four():
    assert hitting_law(InterfaceSpec(4), 4).q1[4] == pytest.approx(1 / 16, abs=1e-15)


def test_origin_only_at_four():
    assert hitting_law(INFINITY, 4).q[4] == pytest.approx(1 / 8, abs=1e-15)


@pytest.mark.parametrize("T", [2, 4, 6, 8])
@pytest.mark.parametrize("n", [2, 4, 6, 8, 10, 12, 14])
def test_hitting_law_matches_path_enumeration(T, n):
    law = hitting_law(InterfaceSpec(T), 14)
    p0, p1 = first_contact_enum(T, n)
    assert law.q0[n] == pytest.approx(p0, abs=1e-15)
    assert law.q1[n] == pytest.approx(p1, abs=1e-15)


def test_origin_law_closed_form():
    law = hitting_law(INFINITY, 40)
    for n in range(2, 41, 2):
        assert law.q[n] == pytest.approx(origin_first_return(n), rel=1e-13)


@given(T=st.sampled_from([2, 4, 6, 10, 16, 30, 64]), half=st.integers(1, 600))
@settings(max_examples=40, deadline=None)
def test_mass_plus_tail_is_one(T, half):
    law = hitting_law(InterfaceSpec(T), 2 * half)
    assert abs(law.total() - 1.0) <= 1e-12
    assert np.all(law.q0 >= 0) and np.all(law.q1 <= 1)
    assert np.all(law.q0[1::2] == 0) and np.all(law.q1[1::2] == 0)
    assert np.all(law.q1[:T] == 0)


@given(T=st.sampled_from([4, 8, 12, 20, 50]))
@settings(max_examples=10, deadline=None)
def test_neighbour_symmetry_is_exact(T):
    law = hitting_law(InterfaceSpec(T), 4 * T * T)
    assert np.array_equal(law.q1, law.q1_lower)


@pytest.mark.parametrize("T", [4, 10, 40])
def test_coupling_with_origin_only_below_T(T):
    fin = hitting_law(InterfaceSpec(T), 2 * T)
    inf = hitting_law(INFINITY, 2 * T)
    assert np.array_equal(fin.q[:T], inf.q[:T])


def test_odd_inputs_rejected():
    with pytest.raises(ParameterError):
        InterfaceSpec(5)
    with pytest.raises(ParameterError):
        hitting_law(InterfaceSpec(4), 7)


def test_k_fold_examples():
    assert k_fold_hitting(INFINITY, 2, 4).mass[4] == pytest.approx(0.25, abs=1e-15)
    assert k_fold_hitting(InterfaceSpec(2), 3, 6).mass[6] == pytest.approx(1.0, abs=1e-15)


def test_k_fold_one_is_hitting_law():
    spec = InterfaceSpec(8)
    assert np.array_equal(k_fold_hitting(spec, 1, 200).mass, hitting_law(spec, 200).q)


def test_constrained_two_fold_double_sum():
    spec = InterfaceSpec(4)
    q = hitting_law(spec, 34).q
    cap = 16
    ref = math.fsum(q[j] * q[34 - j] for j in range(2, 33, 2) if j <= cap and 34 - j <= cap)
    got = k_fold_hitting(spec, 2, 34, constrained=True).mass[34]
    assert got == pytest.approx(ref, abs=1e-12)


@given(k1=st.integers(1, 5), k2=st.integers(1, 5), T=st.sampled_from([4, 8, 16]))
@settings(max_examples=25, deadline=None)
def test_convolution_associativity(k1, k2, T):
    spec = InterfaceSpec(T)
    a = k_fold_hitting(spec, k1, 300)
    b = k_fold_hitting(spec, k2, 300)
    c = k_fold_hitting(spec, k1 + k2, 300)
    assert np.max(np.abs(convolve_laws(a, b) - c.mass)) <= 1e-12


def test_bound_ratio_examples():
    assert bound_ratio(0.5, INFINITY, 1, 2) == pytest.approx(math.sqrt(2))
    r = bound_ratio(1.0, 2, 1, 2)
    assert 0 < r < math.inf


def test_bound_report_small_grid():
    rep = verify_hitting_bounds([8, 16], 6)
    assert 0 < rep.grid_max < math.inf
    assert set(rep.per_T) == {8, 16}
    for entry in rep.constrained.values():
        assert math.isfinite(entry["C_prime"])


def test_visit_probabilities():
    assert interface_visit_prob(InterfaceSpec(2), 10) == 1.0
    assert interface_visit_prob(InterfaceSpec(6), 2) == pytest.approx(0.5)
    assert interface_visit_prob(InterfaceSpec(4), 4) == pytest.approx(0.5)
    for T in (4, 6, 10):
        for n in (2, 8, 20, 30):
            assert interface_visit_prob(InterfaceSpec(T), n) == pytest.approx(
                srw_contact_prob(T, n), rel=1e-12)


def test_return_expansions():
    rep = return_origin_expansions([2, 6, 1000])
    assert rep.visit[0] == pytest.approx(0.5)
    assert rep.first_return[1] == pytest.approx(1 / 16)
    assert abs(rep.visit_residual[2]) <= 10 / 1000 ** 2


def test_cdf_second_order_correction_is_positive():
    ls = np.array([200, 400, 800, 1600])
    rep = return_origin_expansions(2 * ls)
    scaled = rep.cdf_residual * ls ** 1.5
    assert np.allclose(scaled, 1 / (2 * math.sqrt(math.pi)), rtol=2e-2)
    assert not rep.cdf_bound_holds.any()


def test_reflection_identity():
    law = hitting_law(InterfaceSpec(4), 4)
    assert 2 * law.q1[2] == 0.0
    assert 2 * law.q1[4] == pytest.approx(1 / 8)
    assert reflection_identity_check(4, 40) <= 1e-15
    assert reflection_identity_check(8, 10) <= 1e-12
