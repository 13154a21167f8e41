"""Contact angles at the junction and the two equivalent forms of Young's law.

Region angle phi_i is the opening of C_i between its two bounding interface
rays and pairs with the action of the opposite interface:

    sin phi_1 / sigma_23 = sin phi_2 / sigma_31 = sin phi_3 / sigma_12,

equivalently sigma_12 nu_12 + sigma_23 nu_23 + sigma_31 nu_31 = 0 for the
unit conormals nu_ij (ray directions, pointing away from the junction).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExtractionError, InvalidArgumentError, NoBalanceError
from .field import PAIRS, phase_map, ray_gaps

__all__ = [
    "InterfaceFit",
    "AngleReport",
    "extract_interfaces",
    "predict_angles",
    "conormals_from_angles",
    "sine_ratios",
    "sine_spread",
    "verify_sine_law",
    "balance_residual",
    "measure",
]


@dataclass
class InterfaceFit:
    pair: tuple
    conormal: np.ndarray  # unit 3-vector in the plane normal to the spine
    angle: float
    rms: float
    n_points: int


def _fit_ray(pts):
    """Total least squares line through the origin, oriented along the data."""
    m = pts.T @ pts
    _, vecs = np.linalg.eigh(m)
    v = vecs[:, -1]
    if pts.mean(axis=0) @ v < 0:
        v = -v
    perp = np.array([-v[1], v[0]])
    rms = float(np.sqrt(np.mean((pts @ perp) ** 2)))
    return v, rms


def extract_interfaces(f, pm=None, annulus=(5.0, 20.0), min_points=10):
    """Fit one ray per interface to the equidistance points inside an annulus.

    Returns fits for Gamma_12, Gamma_23, Gamma_31 in that order.

    Raises
    ------
    ExtractionError
        Fewer than ``min_points`` interface points for some pair.
    """
    pm = pm if pm is not None else phase_map(f)
    r0, r1 = annulus
    fits = []
    for i, j in PAIRS:
        key = (min(i, j), max(i, j))
        pts = pm.interfaces.get(key, np.zeros((0, 2)))
        r = np.linalg.norm(pts, axis=1)
        pts = pts[(r >= r0) & (r <= r1)]
        if len(pts) < min_points:
            raise ExtractionError(
                f"interface Gamma_{i + 1}{j + 1}: only {len(pts)} points in annulus {annulus}"
            )
        v, rms = _fit_ray(pts)
        fits.append(InterfaceFit((i, j), np.array([v[0], v[1], 0.0]),
                                 float(np.arctan2(v[1], v[0])), rms, len(pts)))
    return fits


def _check_sigmas(sigmas):
    s = np.asarray(sigmas, dtype=float)
    if s.shape != (3,):
        raise InvalidArgumentError("need three actions (sigma_12, sigma_23, sigma_31)")
    return s


def predict_angles(s12, s23, s31):
    """Region angles (phi_1, phi_2, phi_3) closing the force triangle.

    Raises
    ------
    NoBalanceError
        A non-positive action or a violated strict triangle inequality.
    """
    s = np.array([s12, s23, s31], dtype=float)
    if np.any(s <= 0):
        raise NoBalanceError("actions must be positive")
    if 2 * s.max() >= s.sum():
        raise NoBalanceError(
            f"actions {s.tolist()} violate the strict triangle inequality; no junction balances them"
        )
    c1 = (s23**2 - s12**2 - s31**2) / (2 * s12 * s31)
    c2 = (s31**2 - s12**2 - s23**2) / (2 * s12 * s23)
    c3 = (s12**2 - s23**2 - s31**2) / (2 * s23 * s31)
    return np.arccos(np.clip([c1, c2, c3], -1.0, 1.0))


def conormals_from_angles(phi, theta12=np.pi / 2):
    """Unit conormals nu_12, nu_23, nu_31 for region angles phi with Gamma_12 at theta12."""
    phi1, phi2, phi3 = phi
    th = np.array([theta12, theta12 + phi2, theta12 + phi2 + phi3])
    return np.stack([np.cos(th), np.sin(th), np.zeros(3)], axis=1)


def sine_ratios(phi, sigmas):
    s12, s23, s31 = _check_sigmas(sigmas)
    return np.array([np.sin(phi[0]) / s23, np.sin(phi[1]) / s31, np.sin(phi[2]) / s12])


def sine_spread(phi, sigmas):
    """Relative spread (max - min) / mean of the three sine ratios."""
    r = sine_ratios(phi, sigmas)
    return float((r.max() - r.min()) / abs(r.mean()))


def balance_residual(sigmas, conormals):
    """|sum sigma_ij nu_ij| / sum sigma_ij.

    Raises
    ------
    InvalidArgumentError
        A conormal whose length differs from 1 by more than 1e-6.
    """
    s = _check_sigmas(sigmas)
    nu = np.asarray(conormals, dtype=float)
    if np.any(np.abs(1 - np.linalg.norm(nu, axis=1)) > 1e-6):
        raise InvalidArgumentError("conormals must be unit vectors")
    return float(np.linalg.norm(s @ nu) / s.sum())


@dataclass
class AngleReport:
    conormals: np.ndarray  # rows nu_12, nu_23, nu_31
    angles: np.ndarray  # phi_1, phi_2, phi_3 (radians)
    sigmas: np.ndarray  # sigma_12, sigma_23, sigma_31
    predicted: np.ndarray = None
    fit_rms: list = field(default_factory=list)
    annulus: tuple = None

    @property
    def ratios(self):
        return sine_ratios(self.angles, self.sigmas)

    @property
    def spread(self):
        return sine_spread(self.angles, self.sigmas)

    @property
    def balance(self):
        return balance_residual(self.sigmas, self.conormals)

    @property
    def angle_sum(self):
        return float(np.sum(self.angles))

    def max_angle_error(self):
        if self.predicted is None:
            return float("nan")
        return float(np.max(np.abs(self.angles - self.predicted)))

    def to_dict(self):
        d = {
            "conormals": self.conormals.tolist(),
            "angles_deg": np.rad2deg(self.angles).tolist(),
            "angle_sum_deg": float(np.rad2deg(self.angle_sum)),
            "sigmas": {"12": self.sigmas[0], "23": self.sigmas[1], "31": self.sigmas[2]},
            "sine_ratios": self.ratios.tolist(),
            "sine_spread": self.spread,
            "balance_residual": self.balance,
            "fit_rms": list(self.fit_rms),
            "annulus": list(self.annulus) if self.annulus is not None else None,
        }
        if self.predicted is not None:
            d["predicted_deg"] = np.rad2deg(self.predicted).tolist()
            d["max_angle_error_deg"] = float(np.rad2deg(self.max_angle_error()))
        return d


def verify_sine_law(report, tolerance):
    """(passed, spread) for the relative spread of the sine ratios."""
    s = report.spread
    return s <= tolerance, s


def measure(f, sigmas, annulus=(5.0, 20.0), pm=None):
    """Extract conormals from a relaxed field and assemble the angle report."""
    fits = extract_interfaces(f, pm, annulus)
    th = np.array([fit.angle for fit in fits])
    gaps = ray_gaps(th)
    if abs(gaps.sum() - 2 * np.pi) > 1e-6:
        raise ExtractionError("fitted interfaces are not ordered counterclockwise")
    phi = np.array([gaps[2], gaps[0], gaps[1]])
    sig = _check_sigmas(sigmas)
    try:
        pred = predict_angles(*sig)
    except NoBalanceError:
        pred = None
    return AngleReport(np.stack([fit.conormal for fit in fits]), phi, sig, pred,
                       [fit.rms for fit in fits], tuple(annulus))
