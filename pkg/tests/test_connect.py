import math

import numpy as np
import pytest

from oracles import SIGMA_QUARTIC, quartic_sigma_quad, tanh_profile
from triodlab import connect, potential
from triodlab.errors import InvalidArgumentError

EQ = potential.equilateral_spec()
DW = potential.double_well_spec()


def test_oracle_constant():
    assert quartic_sigma_quad() == pytest.approx(SIGMA_QUARTIC, rel=1e-12)


def test_double_well_matches_tanh(dw_path):
    err = np.max(np.linalg.norm(dw_path.values - tanh_profile(dw_path.eta), axis=1))
    assert err <= 1e-3
    assert abs(dw_path.action - SIGMA_QUARTIC) <= 1e-3
    assert dw_path.equipartition_residual <= 1e-3


def test_el_residual_meets_tol(dw_path):
    assert dw_path.el_residual <= 1e-8
    assert connect.el_residual(dw_path.values, dw_path.h, DW) == dw_path.el_residual


def test_action_history_monotone(dw_path):
    h = np.asarray(dw_path.action_history)
    assert np.all(np.diff(h) <= 1e-12)


def test_endpoints_pinned(dw_path):
    assert np.array_equal(dw_path.values[0], DW.minima[0])
    assert np.array_equal(dw_path.values[-1], DW.minima[1])


def test_symmetric_actions_equal(eq_connections):
    s = np.array([c.action for c in eq_connections])
    assert np.ptp(s) / s.mean() <= 1e-6


def test_trivial_path():
    p = connect.solve_connection(EQ, 1, 1, allow_trivial=True)
    assert p.action == 0.0
    assert connect.equipartition_residual(p) == 0.0
    assert np.all(p.values == EQ.minima[1])


def test_same_well_rejected():
    with pytest.raises(InvalidArgumentError):
        connect.solve_connection(EQ, 0, 0)


def test_analytic_action():
    p = connect.analytic_tanh_path()
    assert abs(connect.action(p) - SIGMA_QUARTIC) <= 1e-3
    assert connect.equipartition_residual(p) <= 1e-3


def test_reversal_invariance(eq_connections):
    p = eq_connections[0]
    assert connect.action(p.reversed()) == pytest.approx(connect.action(p), rel=1e-13)


def test_perturbation_detected():
    p = connect.analytic_tanh_path()
    v = p.values.copy()
    v[400, 0] += 0.1
    q = connect.ConnectionPath(eta=p.eta, values=v, endpoints=p.endpoints, spec=DW)
    assert connect.equipartition_residual(q) > 1e-2


def test_too_few_samples():
    p = connect.ConnectionPath(eta=np.array([0.0, 1.0]), values=np.zeros((2, 3)), endpoints=(0, 1), spec=DW)
    with pytest.raises(InvalidArgumentError):
        connect.action(p)


def test_sigma_gradient_identity(dw_path):
    # sigma differs from int |U'|^2 by at most 2 L times the equipartition residual
    du = np.gradient(dw_path.values, dw_path.h, axis=0, edge_order=2)
    kin = np.trapezoid(np.sum(du**2, axis=1), dw_path.eta)
    assert abs(dw_path.action - kin) <= 2 * dw_path.half_length * dw_path.equipartition_residual


def test_action_refinement_order():
    errs = []
    for N in (201, 401, 801):
        p = connect.solve_connection(DW, 0, 1, L=12.0, N=N)
        errs.append(abs(p.action - SIGMA_QUARTIC))
    orders = [math.log2(errs[k] / errs[k + 1]) for k in range(2)]
    assert min(orders) >= 1.8, orders


def test_csv_round_trip(tmp_path, dw_path):
    dest = tmp_path / "U12.csv"
    connect.write_connection_csv(dw_path, dest)
    q = connect.read_connection_csv(dest, DW)
    assert np.array_equal(q.values, dw_path.values)
    assert np.array_equal(q.eta, dw_path.eta)
    assert q.action == dw_path.action
    assert q.endpoints == (0, 1)
    assert dest.read_text().splitlines()[5] == "eta,U1,U2,U3"
