"""Stress tensor T_ij = u_,i . u_,j - delta_ij (|grad u|^2 / 2 + W(u)) and its checks.

Planar fields are always embedded as x_3-extrusions, so every tensor here is
3x3 with u_,3 = 0 for grid data.  On solutions of Delta u = grad W(u) the
tensor is divergence free; in general div T = (grad u)^T (Delta u - grad W).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidArgumentError

__all__ = [
    "tensor_from_jacobian",
    "stress_tensor",
    "StressTensorField",
    "stress_field",
    "divergence_residual",
    "rotate_check",
    "AnalyticSampler",
    "profile_sampler",
    "frobenius_bound_holds",
    "write_tensor_csv",
]


def _embed3(jac):
    if jac.shape[-1] == 3:
        return jac
    pad = np.zeros(jac.shape[:-1] + (3 - jac.shape[-1],))
    return np.concatenate([jac, pad], axis=-1)


def tensor_from_jacobian(jac, w):
    """T from the Jacobian J[..., a, i] = du_a/dx_i and the potential values W."""
    jac = _embed3(np.asarray(jac, dtype=float))
    gram = np.einsum("...ai,...aj->...ij", jac, jac)
    dens = 0.5 * np.einsum("...ai,...ai->...", jac, jac) + w
    return gram - dens[..., None, None] * np.eye(3)


def stress_tensor(sampler, pts, spec=None):
    """T at the given points for any sampler returning values and Jacobians."""
    spec = spec if spec is not None else sampler.spec
    vals, jac = sampler(np.asarray(pts, dtype=float), with_gradient=True)
    return tensor_from_jacobian(jac, spec._w(vals))


class AnalyticSampler:
    """Sampler from closed-form u(x) and its Jacobian, for x in R^2 or R^3.

    ``func`` and ``jac`` take points of shape (..., d).  If ``domain`` is
    given it is a predicate on points; evaluations outside raise DomainError.
    """

    def __init__(self, spec, func, jac, domain=None):
        self.spec = spec
        self.func = func
        self.jac = jac
        self.domain = domain

    def __call__(self, pts, with_gradient=False):
        pts = np.asarray(pts, dtype=float)
        if self.domain is not None and not np.all(self.domain(pts)):
            raise DomainError("sample point outside the sampler's domain")
        v = self.func(pts)
        if not with_gradient:
            return v
        return v, _embed3(self.jac(pts)) if pts.shape[-1] == 3 else self.jac(pts)


def profile_sampler(connection, angle=np.pi / 2, spec=None):
    """Extrusion of a single connection across the line through 0 with direction ``angle``.

    u(x) = U(x . n) with n the direction rotated by +90 degrees, so the
    profile reaches a_j on the counterclockwise side of the line.
    """
    spec = spec if spec is not None else connection.spec
    nrm = np.array([np.cos(angle + np.pi / 2), np.sin(angle + np.pi / 2)])

    def func(p):
        return connection(p[..., :2] @ nrm)

    def jac(p):
        du = connection.derivative(p[..., :2] @ nrm)
        j2 = du[..., :, None] * nrm
        return _embed3(j2) if p.shape[-1] == 3 else j2

    return AnalyticSampler(spec, func, jac)


@dataclass
class StressTensorField:
    """Per-node tensors of a grid field and their divergence diagnostics."""

    T: np.ndarray  # (n, n, 3, 3)
    h: float
    field: object
    div: np.ndarray = None  # (n - 4, n - 4, 3), nodes two or more steps inside
    rhs: np.ndarray = None
    div_sup: float = float("nan")
    mismatch_sup: float = float("nan")


def stress_field(f):
    """T at every node, gradients by second-order finite differences."""
    jac = f.gradient()
    return StressTensorField(tensor_from_jacobian(jac, f.spec._w(f.values)), f.h, f)


def divergence_residual(tf):
    """Central-difference divergence of T on nodes two or more steps inside.

    Nodes adjacent to the boundary are skipped: their stencil reaches T on
    the boundary, whose Jacobian is one-sided, which would cost an order.
    Also returns the right-hand side (grad u)^T (Delta_h u - grad W(u)) on the
    same nodes so the identity can be checked directly.  Fills ``tf.div``,
    ``tf.rhs``, ``tf.div_sup`` and ``tf.mismatch_sup`` and returns ``tf``.
    """
    T = tf.T
    h = tf.h
    if T.shape[0] < 5:
        raise InvalidArgumentError("need at least 5x5 nodes for a divergence")
    d1 = (T[3:-1, 2:-2, :, 0] - T[1:-3, 2:-2, :, 0]) / (2 * h)
    d2 = (T[2:-2, 3:-1, :, 1] - T[2:-2, 1:-3, :, 1]) / (2 * h)
    div = d1 + d2  # x_3 derivatives vanish for extruded fields
    f = tf.field
    v = f.values
    c = v[2:-2, 2:-2]
    lap = (v[3:-1, 2:-2] + v[1:-3, 2:-2] + v[2:-2, 3:-1] + v[2:-2, 1:-3] - 4 * c) / h**2
    res = lap - f.spec._grad(c)
    jac = _embed3(f.gradient()[2:-2, 2:-2])
    rhs = np.einsum("...ai,...a->...i", jac, res)
    tf.div, tf.rhs = div, rhs
    tf.div_sup = float(np.max(np.linalg.norm(div, axis=-1)))
    tf.mismatch_sup = float(np.max(np.linalg.norm(div - rhs, axis=-1)))
    return tf


def rotate_check(sampler, q, pts, fd_step=1e-3, spec=None, jacobian="chain"):
    """Max componentwise deviation between Q T Q^T and T computed in rotated axes.

    The rotated field is u'(x') = u(Q^T x') and T' is assembled from its
    Jacobian at x' = Q x.  With ``jacobian="chain"`` that Jacobian is the
    sampler's own, J(Q^T x') Q^T; with ``jacobian="fd"`` it is taken by
    central differences of the rotated sampler along the x' axes,
    independently of the sampler's Jacobian.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (3, 3) or np.max(np.abs(q.T @ q - np.eye(3))) > 1e-12:
        raise InvalidArgumentError("Q must be a 3x3 orthogonal matrix")
    if jacobian not in ("chain", "fd"):
        raise InvalidArgumentError(f"unknown jacobian mode {jacobian!r}")
    spec = spec if spec is not None else sampler.spec
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[-1] == 2:
        pts = np.concatenate([pts, np.zeros(pts.shape[:-1] + (1,))], axis=-1)
    T = stress_tensor(sampler, pts, spec)
    lhs = np.einsum("ij,...jk,lk->...il", q, T, q)

    xp = pts @ q.T

    def rotated(y):
        return sampler(y @ q)  # u'(y) = u(Q^T y)

    if jacobian == "chain":
        vals, jac0 = sampler(xp @ q, with_gradient=True)
        jac = _embed3(jac0) @ q.T
    else:
        vals = rotated(xp)
        jac = np.empty(pts.shape[:-1] + (3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = fd_step
            jac[..., :, k] = (rotated(xp + e) - rotated(xp - e)) / (2 * fd_step)
    Tp = tensor_from_jacobian(jac, spec._w(vals))
    return float(np.max(np.abs(lhs - Tp)))


def frobenius_bound_holds(T, jac, w):
    """|T|_F <= 2 (|grad u|^2 / 2 + W) + |grad u|^2 at every point."""
    g2 = np.einsum("...ai,...ai->...", jac, jac)
    lhs = np.linalg.norm(T, axis=(-2, -1))
    return bool(np.all(lhs <= 2 * (0.5 * g2 + w) + g2 + 1e-12))


def write_tensor_csv(tf, dest, stride=1):
    """Node coordinates and the six independent components, one row per node."""
    f = tf.field
    x = f.x[::stride]
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    T = tf.T[::stride, ::stride]
    cols = [X1.ravel(), X2.ravel()] + [T[..., i, j].ravel() for i, j in
                                        ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))]
    np.savetxt(dest, np.column_stack(cols), delimiter=",", fmt="%.12g",
               header="x1,x2,T11,T12,T13,T22,T23,T33", comments="")
