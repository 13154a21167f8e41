"""The seven acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line (printed in the terminal summary) with
the measured values, then asserts every sub-check.
"""
import math
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE, TIMINGS

from oracles import SIGMA_QUARTIC
from triodlab import connect, field, flux, potential, stress, young
from triodlab.errors import ScheduleViolationError


def report(num, title, checks):
    """checks: list of (label, passed, detail)."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{lab}: {det}{'' if p else ' [FAIL]'}" for lab, p, det in checks)
    line = f"criterion {num} {'PASS' if ok else 'FAIL'} | {title} | {detail}"
    ACCEPTANCE.append(line)
    print(line)
    failed = [c[0] for c in checks if not c[1]]
    assert not failed, f"criterion {num}: {failed}"



def test_criterion_1_connection_oracle():
    t0 = time.perf_counter()
    path = connect.solve_connection(potential.double_well_spec(), 0, 1, L=12.0, N=801)
    dt = time.perf_counter() - t0
    err = abs(path.action - SIGMA_QUARTIC)
    report(1, "quartic double-well connection", [
        ("|sigma - 2sqrt2/3|", err <= 1e-3, f"{err:.2e} <= 1e-3 (sigma = {path.action:.6f})"),
        ("equipartition", path.equipartition_residual <= 1e-3, f"{path.equipartition_residual:.2e} <= 1e-3"),
        ("runtime", dt <= 10.0, f"{dt:.4f} s <= 10 s"),
    ])


def test_criterion_2_symmetric_triod(sym_field, eq_connections):
    t0 = time.perf_counter()
    rep = young.measure(sym_field, [c.action for c in eq_connections])
    dt = time.perf_counter() - t0 + TIMINGS.get("sym_field", 0.0) + TIMINGS.get("eq_connections", 0.0)
    deg = np.rad2deg(rep.angles)
    dev = float(np.max(np.abs(deg - 120.0)))
    report(2, "symmetric triod 512^2, h = 0.1", [
        ("angles", dev <= 2.0, f"{np.round(deg, 3).tolist()} deg, max |phi - 120| = {dev:.3f} <= 2"),
        ("balance", rep.balance <= 0.02, f"{rep.balance:.2e} <= 0.02"),
        ("sine spread", rep.spread <= 0.03, f"{rep.spread:.2e} <= 0.03"),
        ("runtime", dt <= 600.0, f"{dt:.0f} s <= 600 s"),
    ])


def test_criterion_3_asymmetric_triod(scalene_setup, scalene_field):
    _, _, sig, _ = scalene_setup
    t0 = time.perf_counter()
    rep = young.measure(scalene_field, sig)
    dt = time.perf_counter() - t0 + TIMINGS.get("scalene_field", 0.0) + TIMINGS.get("scalene_connections", 0.0)
    pred = np.rad2deg(young.predict_angles(*sig))
    deg = np.rad2deg(rep.angles)
    err = float(np.max(np.abs(deg - pred)))
    report(3, "scalene triod vs predicted angles", [
        ("angles", err <= 3.0, f"measured {np.round(deg, 3).tolist()} vs predicted {np.round(pred, 3).tolist()}, "
                               f"max error {err:.3f} <= 3 deg"),
        ("sine spread", rep.spread <= 0.05, f"{rep.spread:.2e} <= 0.05"),
        ("runtime", dt <= 900.0, f"{dt:.0f} s <= 900 s"),
    ])


def test_criterion_4_flux_2d(sym_sampler, eq_connections):
    sig = np.array([c.action for c in eq_connections])
    circ = flux.flux_circle_2d(sym_sampler, 20.0)
    rel = float(np.linalg.norm(circ.total) / sig.sum())
    werr = []
    for w, s in zip(circ.windows, sig):
        nu = np.array([math.cos(w["azimuth"]), math.sin(w["azimuth"]), 0.0])
        werr.append(float(np.linalg.norm(w["vector"] + s * nu) / s))
    report(4, "planar flux balance at R = 20", [
        ("|total| / sum sigma", rel <= 0.02, f"{rel:.2e} <= 0.02"),
        ("windows vs -sigma nu", max(werr) <= 0.05, f"{np.round(werr, 5).tolist()} <= 0.05"),
    ])


def test_criterion_5_surgery_3d(sym_study):
    decs = sym_study["decompositions"]
    fits = sym_study["fits"]
    sig = [row["strip_relative_error"] for row in sym_study["rows"]]
    strip_err = max(sig[-1])
    imax = max(float(d.I.max()) for d in decs)
    cap_exp = fits["cap_magnitude_exponent"]
    tot = fits["total_magnitude"]
    mono = all(b < a for a, b in zip(tot[:-1], tot[1:]))
    dt = TIMINGS.get("sym_study", 0.0)
    cap_mag = [float(np.linalg.norm(d.cap)) for d in decs]
    report(5, "sphere surgery R = 40, 80, 160 (custom schedule)", [
        ("strip vs -2 sigma nu at R = 160", strip_err <= 0.05, f"{strip_err:.4f} <= 0.05"),
        ("I_j", imax <= 2.0 + 1e-3, f"max {imax:.6f} <= 2.001"),
        ("cap magnitude exponent", abs(cap_exp + 0.5) <= 0.1,
         f"{cap_exp:.3f} in [-0.6, -0.4] (|cap| = {np.array2string(np.array(cap_mag), precision=3)}; "
         f"sup|T| x cap area exponent {fits['cap_bound_exponent']:.3f})"),
        ("total decreasing", mono, f"{np.array2string(np.array(tot), precision=3)}"),
        ("runtime", dt <= 1200.0, f"{dt:.0f} s <= 1200 s"),
    ])


def test_criterion_6_plan_gate():
    try:
        flux.make_surgery_plan(100.0, "reference")
        rejected = False
    except ScheduleViolationError:
        rejected = True
    try:
        flux.make_surgery_plan(2000.0, "reference")
        accepted = True
    except ScheduleViolationError:
        accepted = False
    # strictness: the margin sign flips between consecutive floats around the threshold
    lo, hi = 1024.0, 1024.1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.sqrt(2) * math.sin(mid**-0.8) < math.sin(mid**-0.75):
            hi = mid
        else:
            lo = mid
    try:
        flux.make_surgery_plan(lo, "reference")
        strict = False
    except ScheduleViolationError:
        strict = True
    try:
        flux.make_surgery_plan(hi, "reference")
    except ScheduleViolationError:
        strict = False
    report(6, "reference schedule plan gate", [
        ("R = 100 rejected", rejected, str(rejected)),
        ("R = 2000 accepted", accepted, str(accepted)),
        ("strict inequality", strict, f"threshold {hi:.6f}"),
    ])


def _smooth(n, h):
    spec = potential.equilateral_spec()

    def func(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([0.5 * np.sin(x) * np.cos(0.7 * y), 0.3 * np.cos(0.5 * x + y),
                         0.2 * np.sin(x * y / 3)], axis=-1)

    return field.field_from_function(spec, func, n, h)


def test_criterion_7_identities(dw_path, eq_connections):
    # divergence identity under refinement
    mism = [stress.divergence_residual(stress.stress_field(_smooth(n, h))).mismatch_sup
            for n, h in ((81, 0.1), (161, 0.05), (321, 0.025))]
    order = min(math.log2(mism[k] / mism[k + 1]) for k in range(2))
    # normal stress along extruded connections
    t11 = []
    for path in [dw_path, *eq_connections]:
        smp = stress.profile_sampler(path, angle=math.pi / 2)
        pts = np.stack([-path.eta[1:-1], np.zeros(path.eta.size - 2)], axis=1)
        T = stress.stress_tensor(smp, pts)
        t11.append(float(np.max(np.abs(T[:, 0, 0])) / (2 * path.equipartition_residual)))
    # rotation law on an analytic sampler, finite-difference Jacobian
    dws = potential.double_well_spec()
    c = 1 / math.sqrt(2)

    def func(p):
        e = p[..., 0] + 0.3 * p[..., 1]
        return np.stack([np.tanh(e * c), 0 * e, 0 * e], axis=-1)

    def jac(p):
        e = p[..., 0] + 0.3 * p[..., 1]
        d = c / np.cosh(e * c) ** 2
        j = np.zeros(p.shape[:-1] + (3, p.shape[-1]))
        j[..., 0, 0], j[..., 0, 1] = d, 0.3 * d
        return j

    smp = stress.AnalyticSampler(dws, func, jac)
    th = math.radians(37.0)
    q = np.array([[math.cos(th), -math.sin(th), 0], [math.sin(th), math.cos(th), 0], [0, 0, 1]])
    pts = np.random.default_rng(7).uniform(-4, 4, size=(200, 3))
    fd = 1e-4
    rot = stress.rotate_check(smp, q, pts, fd_step=fd, jacobian="fd")
    # law equivalence over 100 admissible triples
    rng = np.random.default_rng(11)
    worst = 0.0
    count = 0
    while count < 100:
        s = rng.uniform(0.1, 3.0, 3)
        if 2 * s.max() >= s.sum():
            continue
        phi = young.predict_angles(*s)
        worst = max(worst, young.sine_spread(phi, s), young.balance_residual(s, young.conormals_from_angles(phi)))
        count += 1
    report(7, "identity suites", [
        ("div identity order", order >= 1.5, f"{order:.2f} >= 1.5"),
        ("|T_11| / (2 equipartition)", max(t11) <= 1.0, f"{max(t11):.3f} <= 1"),
        ("rotation deviation", rot <= 10 * fd**2, f"{rot:.1e} <= 10 fd^2 = {10 * fd**2:.0e}"),
        ("law equivalence, 100 triples", worst <= 1e-12, f"{worst:.1e} <= 1e-12"),
    ])
