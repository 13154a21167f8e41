import time

import numpy as np
import pytest

from triodlab import connect, field, potential, young

SCALENE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 0.8, 0.0]])
SYM_ANGLES = np.deg2rad([90.0, 210.0, 330.0])

# wall-clock seconds of the expensive session fixtures, for the runtime criteria
TIMINGS = {}
# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)


def _timed(key, func, *args, **kw):
    t0 = time.perf_counter()
    out = func(*args, **kw)
    TIMINGS[key] = TIMINGS.get(key, 0.0) + time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def eq_spec():
    return potential.equilateral_spec()


@pytest.fixture(scope="session")
def eq_connections(eq_spec):
    return [_timed("eq_connections", connect.solve_connection, eq_spec, i, j) for i, j in field.PAIRS]


@pytest.fixture(scope="session")
def dw_path():
    return connect.solve_connection(potential.double_well_spec(), 0, 1, L=12.0, N=801)


@pytest.fixture(scope="session")
def sym_field(eq_spec, eq_connections):
    """Relaxed symmetric triod on the 512 x 512 grid, h = 0.1."""
    f0 = _timed("sym_field", field.init_triod, eq_spec, eq_connections, SYM_ANGLES, n=512, h=0.1)
    return _timed("sym_field", field.relax, f0, tol=1e-6, max_steps=5000)


@pytest.fixture(scope="session")
def scalene_setup():
    spec = potential.TripleWellSpec(SCALENE)
    cons = [_timed("scalene_connections", connect.solve_connection, spec, i, j) for i, j in field.PAIRS]
    sig = np.array([c.action for c in cons])
    phi = young.predict_angles(*sig)
    angles = np.pi / 2 + np.array([0.0, phi[1], phi[1] + phi[2]])
    return spec, cons, sig, angles


@pytest.fixture(scope="session")
def scalene_field(scalene_setup):
    spec, cons, sig, angles = scalene_setup
    f0 = _timed("scalene_field", field.init_triod, spec, cons, angles, n=512, h=0.1)
    return _timed("scalene_field", field.relax, f0, tol=1e-6, max_steps=5000)


@pytest.fixture(scope="session")
def sym_sampler(sym_field):
    return field.FieldSampler(sym_field)


@pytest.fixture(scope="session")
def sym_study(sym_sampler, eq_connections):
    from triodlab import flux

    sig = [c.action for c in eq_connections]
    return _timed("sym_study", flux.convergence_study, sym_sampler, flux.custom_schedule(),
                  [40.0, 80.0, 160.0], sigmas=sig)
