"""Exact geometric predicates and circumsphere computation.

Orientation and in-circumsphere decisions are exact: each predicate is first
evaluated in floating point with a conservative static error bound, and falls
back to rational arithmetic (`fractions.Fraction`, to which floats convert
exactly) whenever the float result is not certifiably correct.  Continuous
outputs (circumcenters, radii) are ordinary floating point.
"""

from __future__ import annotations

import enum
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import GeometryError, ValidationError

Point = tuple  # d floats, d in (2, 3)

# Machine epsilon for the static filters (2^-53, half of float64 ulp(1)).
_EPS = 2.0 ** -53
# Shewchuk's stage-A bounds, inflated 2x for slack against formula variants.
_ORIENT2D_BOUND = 2.0 * (3.0 + 16.0 * _EPS) * _EPS
_ORIENT3D_BOUND = 2.0 * (7.0 + 56.0 * _EPS) * _EPS
_INCIRCLE_BOUND = 2.0 * (10.0 + 96.0 * _EPS) * _EPS
_INSPHERE_BOUND = 2.0 * (16.0 + 224.0 * _EPS) * _EPS


class Sign(enum.IntEnum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1


def _check_finite(pts) -> None:
    for p in pts:
        for x in p:
            if not math.isfinite(x):
                raise ValidationError("non-finite coordinate in %r" % (p,))


def _sign(x) -> Sign:
    if x > 0:
        return Sign.POSITIVE
    if x < 0:
        return Sign.NEGATIVE
    return Sign.ZERO


# ---------------------------------------------------------------------------
# orientation


def _orient2d_exact(a, b, c) -> Sign:
    ax, ay = map(Fraction, a)
    bx, by = map(Fraction, b)
    cx, cy = map(Fraction, c)
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return _sign(det)


def orient2d(a, b, c) -> Sign:
    t1 = (b[0] - a[0]) * (c[1] - a[1])
    t2 = (b[1] - a[1]) * (c[0] - a[0])
    det = t1 - t2
    bound = _ORIENT2D_BOUND * (abs(t1) + abs(t2))
    if det > bound:
        return Sign.POSITIVE
    if -det > bound:
        return Sign.NEGATIVE
    return _orient2d_exact(a, b, c)


def _orient3d_exact(a, b, c, d) -> Sign:
    ax, ay, az = map(Fraction, a)
    bx, by, bz = map(Fraction, b)
    cx, cy, cz = map(Fraction, c)
    dx, dy, dz = map(Fraction, d)
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    wx, wy, wz = dx - ax, dy - ay, dz - az
    det = (ux * (vy * wz - vz * wy)
           - uy * (vx * wz - vz * wx)
           + uz * (vx * wy - vy * wx))
    return _sign(det)


def orient3d(a, b, c, d) -> Sign:
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    wx, wy, wz = d[0] - a[0], d[1] - a[1], d[2] - a[2]
    p1, q1 = vy * wz, vz * wy
    p2, q2 = vx * wz, vz * wx
    p3, q3 = vx * wy, vy * wx
    det = ux * (p1 - q1) - uy * (p2 - q2) + uz * (p3 - q3)
    perm = (abs(ux) * (abs(p1) + abs(q1))
            + abs(uy) * (abs(p2) + abs(q2))
            + abs(uz) * (abs(p3) + abs(q3)))
    bound = _ORIENT3D_BOUND * perm
    if det > bound:
        return Sign.POSITIVE
    if -det > bound:
        return Sign.NEGATIVE
    return _orient3d_exact(a, b, c, d)


def orient(points: Sequence[Point]) -> Sign:
    """Orientation of a d-simplex given as d+1 points (3 in 2D, 4 in 3D)."""
    _check_finite(points)
    if len(points) == 3:
        return orient2d(*points)
    if len(points) == 4:
        return orient3d(*points)
    raise ValidationError("orient expects 3 or 4 points, got %d" % len(points))


# ---------------------------------------------------------------------------
# in-circumsphere


def _incircle_raw(a, b, c, q):
    """Positive when q is inside the circle through ccw (a, b, c)."""
    u1x, u1y = a[0] - q[0], a[1] - q[1]
    u2x, u2y = b[0] - q[0], b[1] - q[1]
    u3x, u3y = c[0] - q[0], c[1] - q[1]
    w1 = u1x * u1x + u1y * u1y
    w2 = u2x * u2x + u2y * u2y
    w3 = u3x * u3x + u3y * u3y
    m23 = u2x * u3y - u3x * u2y
    m13 = u1x * u3y - u3x * u1y
    m12 = u1x * u2y - u2x * u1y
    det = w1 * m23 - w2 * m13 + w3 * m12
    perm = (w1 * (abs(u2x * u3y) + abs(u3x * u2y))
            + w2 * (abs(u1x * u3y) + abs(u3x * u1y))
            + w3 * (abs(u1x * u2y) + abs(u2x * u1y)))
    return det, _INCIRCLE_BOUND * perm


def _incircle_exact(a, b, c, q):
    pts = [tuple(map(Fraction, p)) for p in (a, b, c)]
    qx, qy = map(Fraction, q)
    u = [(px - qx, py - qy) for px, py in pts]
    w = [ux * ux + uy * uy for ux, uy in u]
    m23 = u[1][0] * u[2][1] - u[2][0] * u[1][1]
    m13 = u[0][0] * u[2][1] - u[2][0] * u[0][1]
    m12 = u[0][0] * u[1][1] - u[1][0] * u[0][1]
    return _sign(w[0] * m23 - w[1] * m13 + w[2] * m12)


def _insphere_raw(a, b, c, d, q):
    """Negative when q is inside the sphere through positively oriented (a..d)."""
    rows = []
    for p in (a, b, c, d):
        ux, uy, uz = p[0] - q[0], p[1] - q[1], p[2] - q[2]
        rows.append((ux, uy, uz, ux * ux + uy * uy + uz * uz))

    def minor(i, j, k):
        (x1, y1, z1, _), (x2, y2, z2, _), (x3, y3, z3, _) = rows[i], rows[j], rows[k]
        return (x1 * (y2 * z3 - z2 * y3)
                - y1 * (x2 * z3 - z2 * x3)
                + z1 * (x2 * y3 - y2 * x3))

    def minor_abs(i, j, k):
        (x1, y1, z1, _), (x2, y2, z2, _), (x3, y3, z3, _) = rows[i], rows[j], rows[k]
        return (abs(x1) * (abs(y2 * z3) + abs(z2 * y3))
                + abs(y1) * (abs(x2 * z3) + abs(z2 * x3))
                + abs(z1) * (abs(x2 * y3) + abs(y2 * x3)))

    det = (-rows[0][3] * minor(1, 2, 3) + rows[1][3] * minor(0, 2, 3)
           - rows[2][3] * minor(0, 1, 3) + rows[3][3] * minor(0, 1, 2))
    perm = (rows[0][3] * minor_abs(1, 2, 3) + rows[1][3] * minor_abs(0, 2, 3)
            + rows[2][3] * minor_abs(0, 1, 3) + rows[3][3] * minor_abs(0, 1, 2))
    return det, _INSPHERE_BOUND * perm


def _insphere_exact(a, b, c, d, q):
    qf = tuple(map(Fraction, q))
    rows = []
    for p in (a, b, c, d):
        u = tuple(Fraction(p[i]) - qf[i] for i in range(3))
        rows.append(u + (u[0] * u[0] + u[1] * u[1] + u[2] * u[2],))

    def minor(i, j, k):
        (x1, y1, z1, _), (x2, y2, z2, _), (x3, y3, z3, _) = rows[i], rows[j], rows[k]
        return (x1 * (y2 * z3 - z2 * y3)
                - y1 * (x2 * z3 - z2 * x3)
                + z1 * (x2 * y3 - y2 * x3))

    det = (-rows[0][3] * minor(1, 2, 3) + rows[1][3] * minor(0, 2, 3)
           - rows[2][3] * minor(0, 1, 3) + rows[3][3] * minor(0, 1, 2))
    return _sign(det)


def in_circumsphere(simplex: Sequence[Point], q: Point) -> Sign:
    """POSITIVE if q lies strictly inside the circumsphere of the simplex.

    The answer does not depend on the simplex's vertex order.  Raises
    GeometryError for a degenerate simplex (no circumsphere).
    """
    _check_finite(simplex)
    _check_finite([q])
    if len(simplex) == 3:
        o = orient2d(*simplex)
        if o is Sign.ZERO:
            raise GeometryError("degenerate triangle has no circumcircle")
        det, bound = _incircle_raw(*simplex, q)
        if abs(det) > bound:
            s = _sign(det)
        else:
            s = _incircle_exact(*simplex, q)
        return _sign(int(s) * int(o))
    if len(simplex) == 4:
        o = orient3d(*simplex)
        if o is Sign.ZERO:
            raise GeometryError("degenerate tetrahedron has no circumsphere")
        det, bound = _insphere_raw(*simplex, q)
        if abs(det) > bound:
            s = _sign(det)
        else:
            s = _insphere_exact(*simplex, q)
        return _sign(-int(s) * int(o))
    raise ValidationError("in_circumsphere expects 3 or 4 simplex points")


# ---------------------------------------------------------------------------
# circumsphere (floating point)


def circumsphere(points: Sequence[Point]) -> tuple[Point, float]:
    """Center and radius of the smallest sphere through k+1 affinely
    independent points (k <= d): segment midpoint, triangle circumcircle
    center (in 3D a point of the triangle's plane), tetrahedron circumcenter.
    """
    _check_finite(points)
    pts = np.asarray(points, dtype=float)
    k = len(pts) - 1
    if k < 1 or k > pts.shape[1]:
        raise ValidationError("circumsphere expects 2..d+1 points")
    p0 = pts[0]
    v = pts[1:] - p0
    gram = v @ v.T
    rhs = 0.5 * np.einsum("ij,ij->i", v, v)
    try:
        t = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        raise GeometryError("degenerate point set has no circumsphere")
    center = p0 + t @ v
    dists = np.linalg.norm(pts - center, axis=1)
    radius = float(dists[0])
    if radius == 0.0 or not np.isfinite(radius):
        raise GeometryError("degenerate point set has no circumsphere")
    if np.max(np.abs(dists - radius)) > 1e-6 * radius:
        raise GeometryError("near-degenerate point set: circumsphere unreliable")
    return tuple(float(x) for x in center), radius


# ---------------------------------------------------------------------------
# small float helpers (inexact, shared across the package)


def dist(a: Point, b: Point) -> float:
    return math.dist(a, b)


def simplex_volume(points: Sequence[Point]) -> float:
    """Unsigned area (2D) or volume (3D) of a simplex, in floating point."""
    pts = np.asarray(points, dtype=float)
    v = pts[1:] - pts[0]
    det = float(np.linalg.det(v))
    k = len(points) - 1
    return abs(det) / math.factorial(k)
