import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noncollocated import LinearSSM
from noncollocated.design import (PAPER_CONTROLLER_POLES, PAPER_OBSERVER_POLES,
                                  IllConditioned, NotControllable, NotObservable, PoleSet,
                                  controllable, ctrb, dual, observable, place_observer,
                                  place_state_feedback)
from noncollocated.linalg import eigvals, match_spectra

from oracles import lapack_eigs, scipy_place


def test_reference_plant_controllable_observable(plant):
    assert controllable(plant) == (True, 4)
    assert observable(plant) == (True, 4)


def test_zero_output_unobservable(plant):
    s = LinearSSM(plant.A, plant.B, np.zeros(4))
    assert observable(s) == (False, 0)
    with pytest.raises(NotObservable):
        place_observer(s, PAPER_OBSERVER_POLES)


def test_uncontrollable_rejected():
    s = LinearSSM(np.diag([-1.0, -2.0]), [1.0, 0.0], [1.0, 1.0])
    assert controllable(s) == (False, 1)
    with pytest.raises(NotControllable):
        place_state_feedback(s, [-3.0, -4.0])


def test_duality_on_symmetric_system():
    A = np.array([[-2.0, 1.0, 0.0], [1.0, -3.0, 1.0], [0.0, 1.0, -4.0]])
    b = np.array([1.0, 0.0, 0.0])
    s = LinearSSM(A, b, b)
    assert observable(s) == controllable(s)


def test_ctrb_columns(plant):
    M = ctrb(plant.A, plant.B)
    np.testing.assert_allclose(M[:, 2], plant.A @ plant.A @ plant.B)


def test_reference_controller_placement(plant):
    K = place_state_feedback(plant, PAPER_CONTROLLER_POLES)
    assert match_spectra(eigvals(plant.A - np.outer(plant.B, K)), PAPER_CONTROLLER_POLES) < 1e-6
    np.testing.assert_allclose(K, scipy_place(plant.A, plant.B, PAPER_CONTROLLER_POLES), rtol=1e-6)


def test_reference_observer_placement(plant):
    Q = place_observer(plant, PAPER_OBSERVER_POLES)
    assert match_spectra(eigvals(plant.A - np.outer(Q, plant.C)), PAPER_OBSERVER_POLES) < 1e-6
    ref = scipy_place(plant.A.T, plant.C, PAPER_OBSERVER_POLES)
    np.testing.assert_allclose(Q, ref, rtol=1e-6)


def test_observer_is_dual_placement(plant):
    Q = place_observer(plant, PAPER_OBSERVER_POLES)
    np.testing.assert_array_equal(Q, place_state_feedback(dual(plant), PAPER_OBSERVER_POLES))


def test_fixed_spectrum_placement(plant):
    # a Hurwitz plant asked for its own spectrum; the identified plant has a
    # zero eigenvalue and is not a valid target
    K0 = place_state_feedback(plant, PAPER_CONTROLLER_POLES)
    s = LinearSSM(plant.A - np.outer(plant.B, K0), plant.B, plant.C)
    ev = lapack_eigs(s.A)
    K = place_state_feedback(s, list(ev))
    assert match_spectra(eigvals(s.A - np.outer(s.B, K)), ev) < 1e-6


def test_double_integrator():
    s = LinearSSM([[0.0, 1.0], [0.0, 0.0]], [0.0, 1.0], [1.0, 0.0])
    np.testing.assert_allclose(place_state_feedback(s, [-1.0, -2.0]), [2.0, 3.0], atol=1e-12)


def test_observer_canonical_hand_computed():
    # char poly s^2 + s + 5; desired s^2 + 3 s + 2 -> Q = (2 - 5, 3 - 1)
    s = LinearSSM([[0.0, -5.0], [1.0, -1.0]], [1.0, 0.0], [0.0, 1.0])
    np.testing.assert_allclose(place_observer(s, [-1.0, -2.0]), [-3.0, 2.0], atol=1e-12)


def test_pole_ratio_convention():
    assert min(abs(p) for p in PAPER_OBSERVER_POLES) / max(abs(p) for p in PAPER_CONTROLLER_POLES) > 8


def test_pole_set_validation():
    with pytest.raises(ValueError):
        PoleSet((-1.0, 0.5))
    with pytest.raises(ValueError):
        PoleSet((-1 + 1j, -2.0))
    c = PoleSet((-1 + 2j, -1 - 2j)).char_poly()
    np.testing.assert_allclose(c, [1.0, 2.0, 5.0])


def test_wrong_pole_count(plant):
    with pytest.raises(ValueError):
        place_state_feedback(plant, [-1.0, -2.0])


def test_ill_conditioned_detected():
    # five nearly coincident modes: controllable in exact arithmetic, but the
    # controllability matrix has condition ~1e13
    A = np.diag([-1.0 - 1e-3 * i for i in range(5)])
    s = LinearSSM(A, np.ones(5), np.ones(5))
    assert controllable(s)[0]
    with pytest.raises(IllConditioned):
        place_state_feedback(s, [-5.0, -6.0, -7.0, -8.0, -9.0])


def test_repeated_poles_match_characteristic_polynomial(plant):
    # repeated roots are sqrt(eps)-sensitive, so compare coefficients instead
    want = PoleSet((-40.0, -40.0, -40.0, -40.0))
    K = place_state_feedback(plant, want)
    got = np.poly(plant.A - np.outer(plant.B, K))
    np.testing.assert_allclose(got, want.char_poly().astype(float), rtol=1e-8)


def _separated(vals, gap=1.0):
    v = sorted(vals)
    return all(b - a >= gap for a, b in zip(v, v[1:]))


poles = st.lists(st.floats(-100.0, -1.0), min_size=4, max_size=4).filter(_separated)


@settings(max_examples=60, deadline=None)
@given(poles)
def test_random_real_placements(p):
    from noncollocated import paper_plant
    s = paper_plant()
    K = place_state_feedback(s, p)
    assert match_spectra(eigvals(s.A - np.outer(s.B, K)), p) < 1e-6 * max(abs(x) for x in p)


@settings(max_examples=60, deadline=None)
@given(st.floats(-100.0, -1.0), st.floats(1.0, 60.0),
       st.lists(st.floats(-100.0, -1.0), min_size=2, max_size=2).filter(_separated))
def test_random_complex_placements(re, im, reals):
    from noncollocated import paper_plant
    s = paper_plant()
    want = [complex(re, im), complex(re, -im), *reals]
    if min(abs(w - r) for w in want[:2] for r in reals) < 1.0:
        return
    K = place_state_feedback(s, want)
    assert match_spectra(eigvals(s.A - np.outer(s.B, K)), want) < 1e-6 * max(abs(x) for x in want)
