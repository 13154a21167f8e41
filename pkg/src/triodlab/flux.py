"""Flux of the stress tensor through circles and spheres.

Planar: the line integral of T nu over |x| = R, split into one window per
interface.  Spatial: the normalised surface integral (1/R) of T nu over the
sphere of radius R centred at (0, 0, 2R) on the spine, cut into

* two polar caps of angle psi_2 around the points where the spine pierces
  the sphere,
* one azimuthal slice of half-width delta_k per interface, each split into a
  strip {|distance to the interface plane| < R sin psi_1} and the rest.

Caps and slice remainders are integrated in spherical coordinates; each
strip is integrated as the graph y_2 = sqrt(R^2 - y_1^2 - y_3^2) over
(y_1, y_3/R) in a frame where the interface is the half-plane y_1 = 0,
y_2 > 0.  All pieces use Gauss-Legendre rules; the strip's y_3 axis is
stretched by y_3/R = c sin(tau), c = sqrt(1 - (y_1/R)^2), which removes the
steep growth of the area element R/y_2 near the caps.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, InvalidArgumentError, ScheduleViolationError
from .stress import tensor_from_jacobian

__all__ = [
    "SurgeryPlan",
    "FluxDecomposition",
    "CircleFlux",
    "reference_schedule",
    "custom_schedule",
    "schedule_angles",
    "slice_half_widths",
    "make_surgery_plan",
    "flux_circle_2d",
    "flux_sphere_3d",
    "convergence_study",
    "cap_area_normalized",
    "strip_bound_integrals",
]

DEFAULT_C1 = 0.75
_CHUNK = 200_000


# schedules -------------------------------------------------------------------

def reference_schedule():
    """psi_1 = R^(-4/5), psi_2 = R^(-3/4)."""
    return {"kind": "reference", "c1": 1.0, "c2": 1.0, "p1": 0.8, "p2": 0.75}


def custom_schedule(c1=DEFAULT_C1, c2=1.0, p1=0.8, p2=0.75):
    """psi_1 = c1 R^(-p1), psi_2 = c2 R^(-p2)."""
    return {"kind": "custom", "c1": float(c1), "c2": float(c2), "p1": float(p1), "p2": float(p2)}


def schedule_angles(R, schedule):
    if isinstance(schedule, str):
        schedule = reference_schedule() if schedule == "reference" else custom_schedule()
    psi1 = schedule["c1"] * R ** (-schedule["p1"])
    psi2 = schedule["c2"] * R ** (-schedule["p2"])
    return psi1, psi2


def cap_area_normalized(R, psi2):
    """(1/R) times the area of both caps: 4 pi R (1 - cos psi_2)."""
    return 4.0 * np.pi * R * (1.0 - np.cos(psi2))


def strip_bound_integrals(R, psi1, psi2, y1):
    """Closed forms of I_1, I_2, I_3 at a given y_1 inside the strip."""
    c = np.sqrt(1.0 - (np.asarray(y1) / R) ** 2)
    tmax = np.arcsin(np.cos(psi2) / c)
    i1 = np.abs(y1) / R * 2.0 * tmax
    i2 = 2.0 * np.cos(psi2) * np.ones_like(c)
    i3 = 2.0 * (c - np.sqrt(c**2 - np.cos(psi2) ** 2))
    return i1, i2, i3


def slice_half_widths(azimuths):
    """Half-widths making slices centred on the interfaces tile the circle.

    Adjacent slices share a boundary, so delta_a + delta_b equals the gap
    between consecutive interfaces; the 3x3 system has a unique solution.
    """
    th = np.asarray(azimuths, dtype=float)
    order = np.argsort(np.mod(th, 2 * np.pi))
    ths = np.mod(th[order], 2 * np.pi)
    gaps = np.mod(np.roll(ths, -1) - ths, 2 * np.pi)
    gaps[gaps == 0] = 2 * np.pi
    m = len(ths)
    if m == 3:
        g01, g12, g20 = gaps
        d = np.array([g20 + g01 - g12, g01 + g12 - g20, g12 + g20 - g01]) / 2.0
    else:
        raise InvalidArgumentError("automatic slice widths need exactly three interfaces")
    out = np.empty(m)
    out[order] = d
    return out


@dataclass
class SurgeryPlan:
    """Sphere radius, cap and strip angles and the slice layout."""

    R: float
    psi1: float
    psi2: float
    azimuths: np.ndarray
    deltas: np.ndarray
    resolution: float = 4.0
    schedule: dict = field(default_factory=custom_schedule)

    @property
    def center(self):
        return np.array([0.0, 0.0, 2.0 * self.R])

    @property
    def strip_half_width(self):
        return self.R * math.sin(self.psi1)

    @property
    def strip_azimuth_extent(self):
        """Largest azimuthal deviation of a strip point from its interface meridian."""
        return math.asin(math.sin(self.psi1) / math.sin(self.psi2))

    def to_dict(self):
        return {
            "R": self.R, "psi1": self.psi1, "psi2": self.psi2, "center": self.center.tolist(),
            "azimuths": self.azimuths.tolist(), "deltas": self.deltas.tolist(),
            "resolution": self.resolution, "schedule": self.schedule,
            "strip_half_width": self.strip_half_width,
        }


def make_surgery_plan(R, schedule="custom", azimuths=(np.pi / 2, 7 * np.pi / 6, 11 * np.pi / 6),
                      deltas=None, resolution=4.0):
    """Validated surgery plan.

    Raises
    ------
    ScheduleViolationError
        Unless psi_1 < psi_2 and sqrt(2) sin psi_1 < sin psi_2 strictly.
    InvalidArgumentError
        R <= 0, or slices that overlap, leave gaps, or hold two interfaces.
    GeometryError
        A strip that sticks out of its slice.
    """
    if not R > 0:
        raise InvalidArgumentError("sphere radius must be positive")
    if isinstance(schedule, str):
        if schedule not in ("reference", "custom"):
            raise InvalidArgumentError(f"unknown schedule {schedule!r}")
        schedule = reference_schedule() if schedule == "reference" else custom_schedule()
    psi1, psi2 = schedule_angles(R, schedule)
    lhs, rhs = math.sqrt(2.0) * math.sin(psi1), math.sin(psi2)
    if not (psi1 < psi2 and lhs < rhs):
        raise ScheduleViolationError(
            f"R = {R:g}: strip/cap condition sqrt(2) sin(psi_1) < sin(psi_2) fails "
            f"({lhs:.6g} >= {rhs:.6g}) for psi_1 = {psi1:.6g}, psi_2 = {psi2:.6g}"
        )
    az = np.asarray(azimuths, dtype=float)
    if deltas is None:
        dl = slice_half_widths(az)
    else:
        dl = np.broadcast_to(np.asarray(deltas, dtype=float), az.shape).copy()
    if np.any(dl <= 0):
        raise InvalidArgumentError("slice half-widths must be positive")
    ths = np.mod(az, 2 * np.pi)
    order = np.argsort(ths)
    gaps = np.mod(np.roll(ths[order], -1) - ths[order], 2 * np.pi)
    pair = dl[order] + np.roll(dl[order], -1)
    if np.any(pair > gaps + 1e-12):
        raise InvalidArgumentError("slices overlap (or a slice contains two interfaces)")
    if np.any(pair < gaps - 1e-12):
        raise InvalidArgumentError("slices leave part of the sphere uncovered")
    plan = SurgeryPlan(float(R), psi1, psi2, az, dl, float(resolution), schedule)
    if plan.strip_azimuth_extent >= dl.min():
        raise GeometryError("a strip does not fit inside its slice; reduce psi_1 or widen the slices")
    return plan


# quadrature helpers ----------------------------------------------------------

_GL_CACHE = {}


def _gauss(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _composite(a, b, n_panels, order=8):
    """Nodes and weights of composite Gauss-Legendre on [a, b]."""
    x, w = _gauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    wts = (half[:, None] * w).ravel()
    return nodes, wts


def _graded(a, b, spacing, dense, growth=1.5, order=8):
    """Composite Gauss-Legendre on [a, b], dense panels near a then growing ones."""
    panel = order * spacing
    edges = [a]
    while edges[-1] < b:
        off = edges[-1] - a
        step = panel if off < dense else max(panel, (off - dense + panel) * (growth - 1.0) + panel)
        edges.append(min(b, edges[-1] + step))
    edges = np.asarray(edges)
    x, w = _gauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _panels(length, spacing, order=8, minimum=1):
    return max(minimum, int(math.ceil(length / (order * spacing))))


def _integrate(sampler, spec, pts, normals, weights, workers=1):
    """sum_k w_k T(x_k) nu_k over fixed-size chunks.

    Chunk sums are added in chunk order whatever the worker count, so the
    result is bit-identical for any ``workers``.
    """

    def chunk(s):
        sl = slice(s, s + _CHUNK)
        vals, jac = sampler(pts[sl], with_gradient=True)
        T = tensor_from_jacobian(jac, spec._w(vals))
        tn = np.einsum("kij,kj->ki", T, normals[sl])
        tsup = float(np.max(np.linalg.norm(T, axis=(-2, -1)))) if len(T) else 0.0
        return np.sum(weights[sl, None] * tn, axis=0), tsup

    starts = range(0, len(pts), _CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    total = np.zeros(3)
    tsup = 0.0
    for vec, sup in parts:
        total = total + vec
        tsup = max(tsup, sup)
    return total, tsup


def _sphere_points(R, center, th1, th2):
    y = R * np.stack([np.sin(th2) * np.cos(th1), np.sin(th2) * np.sin(th1), np.cos(th2)], axis=-1)
    return center + y, y / R


# planar flux -----------------------------------------------------------------

@dataclass
class CircleFlux:
    R: float
    total: np.ndarray
    windows: list  # per interface: dict with azimuth, range, vector
    n: int

    def to_dict(self):
        return {"R": self.R, "n": self.n, "total": self.total.tolist(),
                "windows": [{**w, "vector": np.asarray(w["vector"]).tolist()} for w in self.windows]}


def _window_edges(azimuths):
    th = np.mod(np.asarray(azimuths, dtype=float), 2 * np.pi)
    order = np.argsort(th)
    ths = th[order]
    nxt = np.roll(ths, -1)
    gaps = np.mod(nxt - ths, 2 * np.pi)
    gaps[gaps == 0] = 2 * np.pi
    hi = ths + 0.5 * gaps
    lo = np.roll(hi, 1) - np.where(np.arange(len(ths)) == 0, 2 * np.pi, 0.0)
    lo_out = np.empty_like(lo)
    hi_out = np.empty_like(hi)
    lo_out[order] = lo
    hi_out[order] = hi
    return lo_out, hi_out


def flux_circle_2d(sampler, R, n=4096, azimuths=None, spec=None):
    """Trapezoidal line integral of T nu over |x| = R in the plane x_3 = 0.

    ``azimuths`` are the polar angles where interfaces cross the circle; the
    circle is split at the bisectors between consecutive crossings, and each
    window's contribution is reported.  Defaults to the sampler's triod rays.
    """
    if not R > 0:
        raise InvalidArgumentError("circle radius must be positive")
    spec = spec if spec is not None else sampler.spec
    if azimuths is None:
        azimuths = sampler.geometry.angles
    th = 2 * np.pi * np.arange(n) / n
    nu = np.stack([np.cos(th), np.sin(th), np.zeros(n)], axis=1)
    pts = R * nu[:, :2]
    vals, jac = sampler(pts, with_gradient=True)
    T = tensor_from_jacobian(jac, spec._w(vals))
    contrib = np.einsum("kij,kj->ki", T, nu) * (R * 2 * np.pi / n)
    lo, hi = _window_edges(azimuths)
    windows = []
    for k, az in enumerate(np.asarray(azimuths, dtype=float)):
        rel = np.mod(th - lo[k], 2 * np.pi)
        m = rel < (hi[k] - lo[k])
        windows.append({"azimuth": float(az), "range": [float(lo[k]), float(hi[k])],
                        "vector": contrib[m].sum(axis=0)})
    total = np.sum([w["vector"] for w in windows], axis=0)
    return CircleFlux(float(R), total, windows, n)


# sphere surgery --------------------------------------------------------------

@dataclass
class FluxDecomposition:
    plan: SurgeryPlan
    cap: np.ndarray
    cap_sup_T: float
    offstrip: np.ndarray  # (3 slices, 3)
    offstrip_sup_T: np.ndarray
    strip: np.ndarray  # (3 slices, 3)
    I: np.ndarray  # (3 slices, 3): max over the strip of I_1, I_2, I_3
    n_nodes: int
    total_direct: np.ndarray = None

    @property
    def total(self):
        return self.cap + self.offstrip.sum(axis=0) + self.strip.sum(axis=0)

    @property
    def cap_bound(self):
        """Sup |T| on the caps times their normalised area."""
        return self.cap_sup_T * cap_area_normalized(self.plan.R, self.plan.psi2)

    @property
    def offstrip_scale(self):
        """R exp(-R sin psi_1): the decay rate of the slice remainders."""
        R = self.plan.R
        return R * math.exp(-R * math.sin(self.plan.psi1))

    def strip_errors(self, sigmas):
        """Relative error |strip_k + 2 sigma_k nu_k| / (2 sigma_k) for each slice."""
        nu = _conormals(self.plan.azimuths)
        s = np.asarray(sigmas, dtype=float)
        target = -2.0 * s[:, None] * nu
        return np.linalg.norm(self.strip - target, axis=1) / (2.0 * s)

    def slice_errors(self, sigmas):
        """Same as :meth:`strip_errors` for the whole slice minus the caps."""
        nu = _conormals(self.plan.azimuths)
        s = np.asarray(sigmas, dtype=float)
        target = -2.0 * s[:, None] * nu
        return np.linalg.norm(self.strip + self.offstrip - target, axis=1) / (2.0 * s)

    def to_dict(self, sigmas=None):
        d = {
            "plan": self.plan.to_dict(),
            "cap": self.cap.tolist(),
            "cap_magnitude": float(np.linalg.norm(self.cap)),
            "cap_sup_T": self.cap_sup_T,
            "cap_area_normalized": cap_area_normalized(self.plan.R, self.plan.psi2),
            "cap_bound": self.cap_bound,
            "offstrip": self.offstrip.tolist(),
            "offstrip_magnitude": np.linalg.norm(self.offstrip, axis=1).tolist(),
            "offstrip_scale": self.offstrip_scale,
            "strip": self.strip.tolist(),
            "I_max": self.I.tolist(),
            "total": self.total.tolist(),
            "total_magnitude": float(np.linalg.norm(self.total)),
            "n_nodes": self.n_nodes,
        }
        if self.total_direct is not None:
            d["total_direct"] = self.total_direct.tolist()
        if sigmas is not None:
            d["strip_relative_error"] = self.strip_errors(sigmas).tolist()
            d["slice_relative_error"] = self.slice_errors(sigmas).tolist()
        return d


def _conormals(azimuths):
    az = np.asarray(azimuths, dtype=float)
    return np.stack([np.cos(az), np.sin(az), np.zeros_like(az)], axis=1)


def _cap_nodes(plan):
    R, psi2, res = plan.R, plan.psi2, plan.resolution
    c = plan.center
    n2 = _panels(R * psi2, 1.0 / res, minimum=2)
    t2, w2 = _composite(0.0, psi2, n2)
    n1 = max(64, int(math.ceil(2 * np.pi * R * math.sin(psi2) * res)))
    t1 = 2 * np.pi * np.arange(n1) / n1
    w1 = np.full(n1, 2 * np.pi / n1)
    pts, nus, wts = [], [], []
    for t2s in (t2, np.pi - t2):
        T1, T2 = np.meshgrid(t1, t2s, indexing="ij")
        p, nu = _sphere_points(R, c, T1.ravel(), T2.ravel())
        # (1/R) dS = R sin(theta_2) dtheta_2 dtheta_1
        w = (w1[:, None] * (R * np.sin(t2s) * w2)[None, :]).ravel()
        pts.append(p)
        nus.append(nu)
        wts.append(w)
    return np.concatenate(pts), np.concatenate(nus), np.concatenate(wts)


def _offstrip_nodes(plan, k, dense=16.0):
    """Slice k minus caps minus strip, in spherical coordinates."""
    R, psi1, psi2, res = plan.R, plan.psi1, plan.psi2, plan.resolution
    c = plan.center
    az, dl = plan.azimuths[k], plan.deltas[k]
    n2 = _panels(R * (np.pi - 2 * psi2), 1.0 / res, minimum=4)
    t2, w2 = _composite(psi2, np.pi - psi2, n2)
    pts, nus, wts = [], [], []
    for th2, wt2 in zip(t2, w2):
        st = math.sin(th2)
        alpha = math.asin(min(1.0, math.sin(psi1) / st))
        rho = R * st
        # azimuth offset measured as arc length rho * dtheta from the strip edge
        ell, wl = _graded(0.0, rho * (dl - alpha), 1.0 / res, dense)
        off = alpha + ell / rho
        for sign in (1.0, -1.0):
            th1 = az + sign * off
            p, nu = _sphere_points(R, c, th1, np.full_like(th1, th2))
            pts.append(p)
            nus.append(nu)
            # (1/R) dS = R sin(theta_2) dtheta_2 dtheta_1 and dtheta_1 = d ell / rho
            wts.append(wl / rho * R * st * wt2)
    return np.concatenate(pts), np.concatenate(nus), np.concatenate(wts)


def _strip_nodes(plan, k):
    """Graph parametrisation of strip k; returns nodes, normals, weights and I_j maxima."""
    R, psi1, psi2, res = plan.R, plan.psi1, plan.psi2, plan.resolution
    c0 = plan.center
    a = R * math.sin(psi1)
    n1 = _panels(2 * a, 1.0 / res, minimum=2)
    y1, w1 = _composite(-a, a, n1)
    rot = plan.azimuths[k] - np.pi / 2
    q = np.array([[math.cos(rot), -math.sin(rot), 0.0], [math.sin(rot), math.cos(rot), 0.0], [0.0, 0.0, 1.0]])
    pts, nus, wts = [], [], []
    imax = np.zeros(3)
    for y1s, w1s in zip(y1, w1):
        cc = math.sqrt(1.0 - (y1s / R) ** 2)
        cos2 = math.cos(psi2)
        if cos2 >= cc:
            raise GeometryError("strip parametrisation leaves the sphere (y_2^2 <= 0)")
        tmax = math.asin(cos2 / cc)
        nt = _panels(2 * R * cc * tmax, 1.0 / res, minimum=4)
        tau, wt = _composite(-tmax, tmax, nt)
        y3t = cc * np.sin(tau)  # y_3 / R
        y2 = R * cc * np.cos(tau)
        if np.any(y2 <= 0):
            raise GeometryError("strip parametrisation leaves the sphere (y_2^2 <= 0)")
        y = np.stack([np.full_like(tau, y1s), y2, R * y3t], axis=1)
        # d(y_3/R) = c cos(tau) dtau; integrand T y / y_2 d(y_3/R) dy_1
        dy3t = wt * cc * np.cos(tau)
        ij = np.array([np.sum(np.abs(y[:, j]) / y2 * dy3t) for j in range(3)])
        imax = np.maximum(imax, ij)
        yg = y @ q.T
        pts.append(c0 + yg)
        nus.append(yg / R)
        wts.append(w1s * dy3t * R / y2)  # (y / y_2) = nu * R / y_2
    return np.concatenate(pts), np.concatenate(nus), np.concatenate(wts), imax


def _full_sphere_nodes(plan):
    R, res = plan.R, plan.resolution
    n2 = _panels(np.pi * R, 1.0 / res, minimum=8)
    t2, w2 = _composite(0.0, np.pi, n2)
    n1 = max(128, int(math.ceil(2 * np.pi * R * res)))
    t1 = 2 * np.pi * np.arange(n1) / n1
    T1, T2 = np.meshgrid(t1, t2, indexing="ij")
    p, nu = _sphere_points(R, plan.center, T1.ravel(), T2.ravel())
    w = ((2 * np.pi / n1) * (R * np.sin(t2) * w2)[None, :] * np.ones((n1, 1))).ravel()
    return p, nu, w


def flux_sphere_3d(sampler, plan, spec=None, direct=False, workers=1):
    """Normalised flux (1/R) of T nu through the sphere, piece by piece.

    With ``direct=True`` the whole sphere is additionally integrated on a
    plain spherical product rule, independent of the partition, and stored
    as ``total_direct``.
    """
    spec = spec if spec is not None else sampler.spec
    n_nodes = 0
    p, nu, w = _cap_nodes(plan)
    cap, cap_sup = _integrate(sampler, spec, p, nu, w, workers)
    n_nodes += len(w)
    off = np.zeros((3, 3))
    off_sup = np.zeros(3)
    strip = np.zeros((3, 3))
    imax = np.zeros((3, 3))
    for k in range(len(plan.azimuths)):
        p, nu, w = _offstrip_nodes(plan, k)
        off[k], off_sup[k] = _integrate(sampler, spec, p, nu, w, workers)
        n_nodes += len(w)
        p, nu, w, imax[k] = _strip_nodes(plan, k)
        strip[k], _ = _integrate(sampler, spec, p, nu, w, workers)
        n_nodes += len(w)
    dec = FluxDecomposition(plan, cap, cap_sup, off, off_sup, strip, imax, n_nodes)
    if direct:
        p, nu, w = _full_sphere_nodes(plan)
        dec.total_direct, _ = _integrate(sampler, spec, p, nu, w, workers)
    return dec


def _fit(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    m = np.isfinite(x) & np.isfinite(y)
    if m.sum() < 2:
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(x[m], y[m], 1)
    return float(slope), float(icpt)


def convergence_study(sampler, schedule, radii, azimuths=None, deltas=None, resolution=4.0,
                      sigmas=None, spec=None, workers=1):
    """Flux decompositions for increasing R with fitted decay rates.

    Returns a dict with one row per radius and the fits: log-log slope of the
    cap bound and of the measured cap magnitude against R, slope of the log
    of the slice-remainder magnitude against R sin psi_1, and the successive
    differences of the strip vectors.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])):
        raise InvalidArgumentError("radii must increase")
    if azimuths is None:
        azimuths = sampler.geometry.angles
    rows, decs = [], []
    for R in radii:
        plan = make_surgery_plan(R, schedule, azimuths, deltas, resolution)
        dec = flux_sphere_3d(sampler, plan, spec, workers=workers)
        decs.append(dec)
        rows.append(dec.to_dict(sigmas))
    R = np.array(radii)
    cap_b = np.array([d.cap_bound for d in decs])
    cap_m = np.array([np.linalg.norm(d.cap) for d in decs])
    off_m = np.array([np.linalg.norm(d.offstrip, axis=1).max() for d in decs])
    rs1 = np.array([d.plan.strip_half_width for d in decs])
    strip_diff = [float(np.linalg.norm(decs[i + 1].strip - decs[i].strip)) for i in range(len(decs) - 1)]
    with np.errstate(divide="ignore"):
        fits = {
            "cap_bound_exponent": _fit(np.log(R), np.log(cap_b))[0],
            "cap_magnitude_exponent": _fit(np.log(R), np.log(cap_m))[0],
            "offstrip_log_slope_vs_R_sin_psi1": _fit(rs1, np.log(off_m))[0],
            "strip_successive_differences": strip_diff,
            "total_magnitude": [float(np.linalg.norm(d.total)) for d in decs],
        }
    return {"radii": radii, "rows": rows, "fits": fits, "decompositions": decs}


def write_report(obj, dest):
    with open(dest, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o)}")
