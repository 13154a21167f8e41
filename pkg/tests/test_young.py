import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import force_triangle_angles
from triodlab import field, young
from triodlab.errors import ExtractionError, InvalidArgumentError, NoBalanceError

admissible = st.tuples(st.floats(0.05, 5.0), st.floats(0.05, 5.0), st.floats(0.05, 5.0)).filter(
    lambda s: 2 * max(s) < sum(s) * (1 - 1e-3))


def test_equal_actions_120():
    assert np.allclose(np.rad2deg(young.predict_angles(1.0, 1.0, 1.0)), 120.0, atol=1e-12)


def test_known_triple():
    # cos phi_3 = (1.2^2 - 2) / 2 for sigma_12 = 1.2, sigma_23 = sigma_31 = 1
    phi = np.rad2deg(young.predict_angles(1.2, 1.0, 1.0))
    assert phi[2] == pytest.approx(math.degrees(math.acos(-0.28)), abs=1e-10)
    assert np.allclose(phi, [126.8698976, 126.8698976, 106.2602047], atol=1e-6)


@pytest.mark.parametrize("s", [(1, 1, 2.5), (1, 1, 2), (0, 1, 1), (-1, 1, 1)])
def test_no_balance(s):
    with pytest.raises(NoBalanceError):
        young.predict_angles(*s)


@settings(max_examples=100, deadline=None)
@given(admissible)
def test_law_equivalence(s):
    phi = young.predict_angles(*s)
    assert abs(phi.sum() - 2 * math.pi) <= 1e-12
    nus = young.conormals_from_angles(phi, theta12=0.3)
    assert young.sine_spread(phi, s) <= 1e-12
    assert young.balance_residual(s, nus) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(admissible)
def test_predict_matches_force_polygon(s):
    phi_ref, nus_ref = force_triangle_angles(*s)
    phi = young.predict_angles(*s)
    assert np.allclose(phi, phi_ref, atol=1e-9)
    nus = young.conormals_from_angles(phi, theta12=0.0)
    assert np.allclose(nus[:, :2], nus_ref, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(admissible, st.floats(0.01, 100.0))
def test_scale_invariance(s, c):
    assert np.allclose(young.predict_angles(*s), young.predict_angles(*(c * np.array(s))), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(admissible)
def test_cyclic_covariance(s):
    s12, s23, s31 = s
    phi = young.predict_angles(s12, s23, s31)
    assert np.allclose(young.predict_angles(s23, s31, s12), np.roll(phi, -1), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(admissible, st.floats(0.02, 0.2))
def test_unbalanced_angles_detected(s, eps):
    phi = young.predict_angles(*s)
    assume(phi.min() > 2 * eps and phi.max() < math.pi - 2 * eps)
    bad = phi + np.array([eps, -eps, 0.0])
    nus = young.conormals_from_angles(bad)
    assert young.balance_residual(s, nus) > 1e-3
    assert young.sine_spread(bad, s) > 1e-3


def test_negative_control():
    phi = np.deg2rad([110.0, 120.0, 130.0])
    assert young.sine_spread(phi, (1, 1, 1)) > 0.01
    assert young.balance_residual((1, 1, 1), young.conormals_from_angles(phi)) > 0.01


def test_non_unit_conormal():
    with pytest.raises(InvalidArgumentError):
        young.balance_residual((1, 1, 1), 1.01 * young.conormals_from_angles(np.full(3, 2 * np.pi / 3)))
    with pytest.raises(InvalidArgumentError):
        young.sine_ratios(np.ones(3), (1, 1))


def test_verify_sine_law():
    phi = young.predict_angles(1.0, 1.1, 0.9)
    rep = young.AngleReport(young.conormals_from_angles(phi), phi, np.array([1.0, 1.1, 0.9]), phi)
    ok, spread = young.verify_sine_law(rep, 1e-10)
    assert ok and spread <= 1e-12
    assert rep.max_angle_error() == 0.0
    assert rep.to_dict()["angle_sum_deg"] == pytest.approx(360.0)


@pytest.mark.parametrize("deg", [(90.0, 210.0, 330.0), (90.0, 200.0, 345.0)])
def test_recover_synthetic_triod(eq_spec, eq_connections, deg):
    th = np.deg2rad(deg)
    f = field.init_triod(eq_spec, eq_connections, th, n=256, h=0.1)
    rep = young.measure(f, [c.action for c in eq_connections], annulus=(4.0, 12.0))
    gaps = field.ray_gaps(th)
    expected = np.array([gaps[2], gaps[0], gaps[1]])
    assert np.max(np.abs(np.rad2deg(rep.angles - expected))) <= 0.5
    assert rep.angle_sum == pytest.approx(2 * math.pi, abs=1e-9)


def test_missing_phase(eq_spec):
    def two_phase(p):
        return np.where((p[..., 0] > 0)[..., None], eq_spec.minima[0], eq_spec.minima[1])

    f = field.field_from_function(eq_spec, two_phase, 128, 0.1)
    with pytest.raises(ExtractionError):
        young.measure(f, (1, 1, 1), annulus=(2.0, 6.0))


def test_symmetric_relaxed(sym_field, eq_connections):
    sig = [c.action for c in eq_connections]
    rep = young.measure(sym_field, sig)
    assert np.max(np.abs(np.rad2deg(rep.angles) - 120.0)) <= 2.0
    assert rep.balance <= 0.02 and rep.spread <= 0.03
