import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import product_potential_symbolic
from triodlab import potential
from triodlab.errors import InvalidArgumentError

EQ = potential.equilateral_spec()
SCALENE = potential.TripleWellSpec(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 0.8, 0.0]]))
points = arrays(np.float64, 3, elements=st.floats(-10, 10, allow_nan=False))


def test_zero_at_minima():
    for a in EQ.minima:
        assert potential.eval_w(EQ, a) == 0.0


def test_centroid_value():
    c = EQ.minima.mean(axis=0)
    assert np.allclose(np.sum((EQ.minima - c) ** 2, axis=1), 1.0 / 3.0)
    assert potential.eval_w(EQ, c) == pytest.approx(1.0 / 27.0, rel=1e-14)


def test_unit_side():
    d = np.linalg.norm(EQ.minima[:, None] - EQ.minima[None], axis=-1)
    assert np.allclose(d[~np.eye(3, dtype=bool)], 1.0)


def test_gradient_vanishes_at_minima():
    for a in EQ.minima:
        assert np.allclose(potential.grad_w(EQ, a), 0.0, atol=1e-15)


def test_hessian_at_minimum_is_2I():
    assert np.allclose(potential.hess_w(EQ, EQ.minima[0]), 2.0 * np.eye(3), atol=1e-13)


def test_hessian_positive_at_a2():
    assert np.all(np.linalg.eigvalsh(potential.hess_w(SCALENE, SCALENE.minima[1])) > 0)


def test_bisector_symmetry():
    a1, a2, a3 = EQ.minima
    mid = 0.5 * (a1 + a2)
    along = a3 - mid
    perp = (a2 - a1) / np.linalg.norm(a2 - a1)
    for t in np.linspace(-2, 2, 9):
        g = potential.grad_w(EQ, mid + t * along)
        assert abs(g @ perp) < 1e-13


def test_nonfinite_rejected():
    for fn in (potential.eval_w, potential.grad_w, potential.hess_w):
        with pytest.raises(InvalidArgumentError):
            fn(EQ, np.array([np.nan, 0.0, 0.0]))


@pytest.mark.parametrize("spec", [EQ, SCALENE], ids=["equilateral", "scalene"])
def test_matches_sympy(spec):
    W, G, H = product_potential_symbolic(spec.minima)
    rng = np.random.default_rng(3)
    for u in rng.uniform(-2, 2, size=(50, 3)):
        assert potential.eval_w(spec, u) == pytest.approx(W(*u), rel=1e-12, abs=1e-14)
        assert np.allclose(potential.grad_w(spec, u), G(*u), rtol=1e-11, atol=1e-12)
        assert np.allclose(potential.hess_w(spec, u), np.array(H(*u), dtype=float), rtol=1e-11, atol=1e-11)


def test_validate_passes():
    for spec in (EQ, SCALENE):
        rep = potential.validate(spec)
        assert rep.passed, rep.failures()


def test_coincident_minima_fail_nondegeneracy():
    spec = potential.TripleWellSpec(np.array([[0.0, 0, 0], [0.0, 0, 0], [1.0, 0, 0]]))
    rep = potential.validate(spec)
    assert not rep.checks["nondegenerate_minima"].passed


@settings(max_examples=200, deadline=None)
@given(points)
def test_nonnegative(u):
    assert potential.eval_w(EQ, u) >= 0.0
    assert potential.eval_w(SCALENE, u) >= 0.0


@settings(max_examples=200, deadline=None)
@given(points)
def test_rotation_invariance(u):
    R = potential.minima_rotation()
    w0 = potential.eval_w(EQ, u)
    assert abs(w0 - potential.eval_w(EQ, R @ u)) <= 1e-12 * max(1.0, w0)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-3, 3, allow_nan=False)))
def test_gradient_central_difference(u):
    step = 1e-5
    fd = np.array([(potential.eval_w(SCALENE, u + step * e) - potential.eval_w(SCALENE, u - step * e))
                   / (2 * step) for e in np.eye(3)])
    g = potential.grad_w(SCALENE, u)
    assert np.max(np.abs(fd - g)) / max(np.max(np.abs(g)), 1.0) <= 1e-6


def test_hessian_symmetric():
    rng = np.random.default_rng(0)
    H = potential.hess_w(SCALENE, rng.normal(size=(20, 3)))
    assert np.array_equal(H, np.swapaxes(H, -1, -2))
