"""Compiled inner loops for the explicit relaxation of the built-in potentials."""
from __future__ import annotations

import numba
import numpy as np

PRODUCT, DOUBLE_WELL = 0, 1


@numba.njit(cache=True, inline="always")
def _grad_product(u0, u1, u2, a):
    d00 = u0 - a[0, 0]
    d01 = u1 - a[0, 1]
    d02 = u2 - a[0, 2]
    d10 = u0 - a[1, 0]
    d11 = u1 - a[1, 1]
    d12 = u2 - a[1, 2]
    d20 = u0 - a[2, 0]
    d21 = u1 - a[2, 1]
    d22 = u2 - a[2, 2]
    q0 = d00 * d00 + d01 * d01 + d02 * d02
    q1 = d10 * d10 + d11 * d11 + d12 * d12
    q2 = d20 * d20 + d21 * d21 + d22 * d22
    c0 = 2.0 * q1 * q2
    c1 = 2.0 * q0 * q2
    c2 = 2.0 * q0 * q1
    return (c0 * d00 + c1 * d10 + c2 * d20,
            c0 * d01 + c1 * d11 + c2 * d21,
            c0 * d02 + c1 * d12 + c2 * d22)


@numba.njit(cache=True, inline="always")
def _grad_double_well(u0, u1, u2):
    return -u0 * (1.0 - u0 * u0), 2.0 * u1, 2.0 * u2


@numba.njit(cache=True)
def residual(v, h, a, family, r):
    """Fill r with Delta_h u - grad W(u) on interior nodes; return the sup norm."""
    n0, n1 = v.shape[0], v.shape[1]
    inv = 1.0 / (h * h)
    best = 0.0
    for i in range(1, n0 - 1):
        for j in range(1, n1 - 1):
            u0 = v[i, j, 0]
            u1 = v[i, j, 1]
            u2 = v[i, j, 2]
            if family == PRODUCT:
                g0, g1, g2 = _grad_product(u0, u1, u2, a)
            else:
                g0, g1, g2 = _grad_double_well(u0, u1, u2)
            l0 = (v[i + 1, j, 0] + v[i - 1, j, 0] + v[i, j + 1, 0] + v[i, j - 1, 0] - 4.0 * u0) * inv
            l1 = (v[i + 1, j, 1] + v[i - 1, j, 1] + v[i, j + 1, 1] + v[i, j - 1, 1] - 4.0 * u1) * inv
            l2 = (v[i + 1, j, 2] + v[i - 1, j, 2] + v[i, j + 1, 2] + v[i, j - 1, 2] - 4.0 * u2) * inv
            r0 = l0 - g0
            r1 = l1 - g1
            r2 = l2 - g2
            r[i - 1, j - 1, 0] = r0
            r[i - 1, j - 1, 1] = r1
            r[i - 1, j - 1, 2] = r2
            m = r0 * r0 + r1 * r1 + r2 * r2
            if m > best:
                best = m
    return np.sqrt(best)


@numba.njit(cache=True)
def advance(v, r, tau):
    n0, n1 = v.shape[0], v.shape[1]
    for i in range(1, n0 - 1):
        for j in range(1, n1 - 1):
            for k in range(3):
                v[i, j, k] += tau * r[i - 1, j - 1, k]


def family_code(spec):
    if spec.family in ("product", "equilateral"):
        return PRODUCT
    if spec.family == "double-well":
        return DOUBLE_WELL
    return -1
