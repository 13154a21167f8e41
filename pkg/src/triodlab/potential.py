"""Multi-well potentials W: R^3 -> R and numerical checks of their assumptions.

Two families are provided:

* ``product``: W(u) = prod_i |u - a_i|^2 for three minima a_1, a_2, a_3.
  ``equilateral`` is the same formula with the minima at the vertices of a
  unit equilateral triangle in the plane u_3 = 0.
* ``double-well``: the embedded scalar quartic
  W(u) = (1 - u_1^2)^2 / 4 + u_2^2 + u_3^2 with minima (+-1, 0, 0), whose
  heteroclinic connection is known in closed form.  Used as an oracle.

All evaluators are vectorised over leading axes: ``u`` has shape (..., 3).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "TripleWellSpec",
    "equilateral_minima",
    "equilateral_spec",
    "double_well_spec",
    "eval_w",
    "grad_w",
    "hess_w",
    "validate",
    "CheckResult",
    "ValidationReport",
    "minima_rotation",
]

FAMILIES = ("product", "equilateral", "double-well")


def equilateral_minima(side=1.0):
    """Vertices of an equilateral triangle of the given side, centred at 0 in u_3 = 0."""
    rho = side / np.sqrt(3.0)
    k = np.arange(3)
    ang = 2.0 * np.pi * k / 3.0
    return np.stack([rho * np.cos(ang), rho * np.sin(ang), np.zeros(3)], axis=1)


def minima_rotation():
    """Order-3 rotation about u_3 mapping a_1 -> a_2 -> a_3 for equilateral minima."""
    c, s = np.cos(2 * np.pi / 3), np.sin(2 * np.pi / 3)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class TripleWellSpec:
    """A potential together with the location of its global minima.

    Parameters
    ----------
    minima : array_like, shape (k, 3)
        Positions of the wells; k = 3 for the product families, k = 2 for
        the double-well oracle.
    family : str
        One of ``"product"``, ``"equilateral"``, ``"double-well"``.
    """

    minima: np.ndarray
    family: str = "product"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown potential family {self.family!r}")
        a = np.array(self.minima, dtype=float)
        expected = 2 if self.family == "double-well" else 3
        if a.shape != (expected, 3):
            raise InvalidArgumentError(
                f"family {self.family!r} needs minima of shape ({expected}, 3), got {a.shape}"
            )
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("minima must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "minima", a)

    @property
    def n_wells(self):
        return self.minima.shape[0]

    @property
    def tag(self):
        return self.family

    # Raw evaluators: no input checking, used in inner loops.

    def _w(self, u):
        if self.family == "double-well":
            return 0.25 * (1.0 - u[..., 0] ** 2) ** 2 + u[..., 1] ** 2 + u[..., 2] ** 2
        d = u[..., None, :] - self.minima
        q = np.einsum("...ij,...ij->...i", d, d)
        return q[..., 0] * q[..., 1] * q[..., 2]

    def _grad(self, u):
        if self.family == "double-well":
            g = np.empty_like(u, dtype=float)
            g[..., 0] = -u[..., 0] * (1.0 - u[..., 0] ** 2)
            g[..., 1] = 2.0 * u[..., 1]
            g[..., 2] = 2.0 * u[..., 2]
            return g
        d = u[..., None, :] - self.minima
        q = np.einsum("...ij,...ij->...i", d, d)
        q0, q1, q2 = q[..., 0:1], q[..., 1:2], q[..., 2:3]
        return 2.0 * (d[..., 0, :] * q1 * q2 + d[..., 1, :] * q0 * q2 + d[..., 2, :] * q0 * q1)

    def _hess(self, u):
        u = np.asarray(u, dtype=float)
        eye = np.eye(3)
        if self.family == "double-well":
            h = np.zeros(u.shape[:-1] + (3, 3))
            h[..., 0, 0] = 3.0 * u[..., 0] ** 2 - 1.0
            h[..., 1, 1] = 2.0
            h[..., 2, 2] = 2.0
            return h
        d = u[..., None, :] - self.minima
        q = np.einsum("...ij,...ij->...i", d, d)
        q0, q1, q2 = (q[..., k, None, None] for k in range(3))
        h = 2.0 * (q1 * q2 + q0 * q2 + q0 * q1) * eye

        def sym(a, b):
            o = a[..., :, None] * b[..., None, :]
            return o + np.swapaxes(o, -1, -2)

        h = h + 4.0 * (
            q2 * sym(d[..., 0, :], d[..., 1, :])
            + q1 * sym(d[..., 0, :], d[..., 2, :])
            + q0 * sym(d[..., 1, :], d[..., 2, :])
        )
        return h


def equilateral_spec(side=1.0):
    return TripleWellSpec(equilateral_minima(side), family="equilateral", name="equilateral")


def double_well_spec():
    return TripleWellSpec(
        np.array([[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), family="double-well", name="double-well"
    )


def _checked(u):
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (3,):
        raise InvalidArgumentError(f"points must have a trailing axis of length 3, got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise InvalidArgumentError("non-finite input to potential evaluator")
    return u


def eval_w(spec, u):
    """Potential value W(u); zero exactly at the wells, positive elsewhere."""
    return spec._w(_checked(u))


def grad_w(spec, u):
    """Analytic gradient of W with respect to the order parameter."""
    return spec._grad(_checked(u))


def hess_w(spec, u):
    """Analytic 3x3 Hessian of W; symmetric by construction."""
    return spec._hess(_checked(u))


@dataclass
class CheckResult:
    passed: bool
    value: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: dict

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def failures(self):
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": {
                k: {"passed": bool(c.passed), "value": float(c.value), "detail": c.detail}
                for k, c in self.checks.items()
            },
        }


def _fd_gradient(f, u, step):
    g = np.empty_like(u)
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        g[..., k] = (f(u + e) - f(u - e)) / (2.0 * step)
    return g


def _fd_hessian(grad, u, step):
    h = np.empty(u.shape[:-1] + (3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        h[..., :, k] = (grad(u + e) - grad(u - e)) / (2.0 * step)
    return h


def validate(spec, n_samples=1000, radius=10.0, coercivity_radii=(5.0, 10.0, 20.0),
             fd_step=1e-5, fd_tol=1e-5, eig_tol=1e-8, seed=0):
    """Check the structural assumptions on W numerically.

    Failures are reported, never raised.  The coercivity check samples W on
    spheres about the centroid of the minima and records the smallest value
    found; it is evidence, not a proof.
    """
    rng = np.random.default_rng(seed)
    a = spec.minima
    checks = {}

    w_min = np.abs(spec._w(a))
    scale = max(1.0, float(np.max(np.abs(a))) ** (2 * spec.n_wells))
    checks["zero_at_minima"] = CheckResult(
        bool(np.all(w_min <= 1e-14 * scale)), float(w_min.max()), "max |W(a_i)|"
    )

    eigs = np.linalg.eigvalsh(spec._hess(a))
    lam = float(eigs.min())
    checks["nondegenerate_minima"] = CheckResult(
        lam > eig_tol, lam, "smallest Hessian eigenvalue over the minima"
    )

    # cloud: uniform in the ball of the given radius, plus points near each well
    v = rng.normal(size=(n_samples, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    cloud = v * radius * rng.random((n_samples, 1)) ** (1.0 / 3.0)
    near = (a[rng.integers(0, spec.n_wells, 200)] + 0.05 * rng.normal(size=(200, 3)))
    cloud = np.concatenate([cloud, near])
    w = spec._w(cloud)
    checks["nonnegative"] = CheckResult(bool(np.all(w >= 0.0)), float(w.min()), "min W on cloud")

    centroid = a.mean(axis=0)
    lows = []
    for rho in coercivity_radii:
        s = rng.normal(size=(2000, 3))
        s /= np.linalg.norm(s, axis=1, keepdims=True)
        lows.append(float(spec._w(centroid + rho * s).min()))
    checks["coercivity"] = CheckResult(
        min(lows) > 0.0, min(lows),
        "sampled lower bound of W on spheres of radii " + ", ".join(f"{r:g}" for r in coercivity_radii),
    )

    g = spec._grad(cloud)
    g_fd = _fd_gradient(spec._w, cloud, fd_step)
    err = np.linalg.norm(g - g_fd, axis=-1) / np.maximum(np.linalg.norm(g, axis=-1), 1.0)
    checks["gradient_fd"] = CheckResult(bool(err.max() <= fd_tol), float(err.max()),
                                        "max relative error vs central differences")

    h = spec._hess(cloud)
    h_fd = _fd_hessian(spec._grad, cloud, fd_step)
    herr = np.linalg.norm(h - h_fd, axis=(-2, -1)) / np.maximum(np.linalg.norm(h, axis=(-2, -1)), 1.0)
    checks["hessian_fd"] = CheckResult(bool(herr.max() <= fd_tol), float(herr.max()),
                                       "max relative error vs central differences of the gradient")
    return ValidationReport(checks)
