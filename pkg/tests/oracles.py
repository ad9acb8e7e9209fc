"""Independent exact-arithmetic oracles used to pin expected values.

Everything here is written against the math directly (rational linear solves,
homogeneous determinants) rather than against the package's formulations, so
test expectations do not inherit implementation bugs.
"""

from fractions import Fraction


def det_frac(m):
    """Determinant of a small square matrix of Fractions, cofactor expansion."""
    n = len(m)
    if n == 1:
        return m[0][0]
    total = Fraction(0)
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * det_frac(minor)
        total += term if j % 2 == 0 else -term
    return total


def orient_sign_exact(points):
    """Exact sign of det[p1-p0; ...; pd-p0], via the homogeneous determinant.

    Row-reducing the homogeneous form gives det_hom = (-1)^(n+1) * det_diff
    for n points, hence the parity factor.
    """
    n = len(points)
    rows = [[Fraction(x) for x in p] + [Fraction(1)] for p in points]
    d = det_frac(rows) * (-1 if n % 2 == 0 else 1)
    return (d > 0) - (d < 0)


def circumcenter_exact(simplex):
    """Exact circumcenter of a full-dimensional simplex as Fractions.

    Returns None when the simplex is degenerate.
    """
    pts = [tuple(Fraction(x) for x in p) for p in simplex]
    d = len(pts[0])
    p0 = pts[0]
    rows = [[2 * (p[i] - p0[i]) for i in range(d)] for p in pts[1:]]
    rhs = [sum(p[i] * p[i] - p0[i] * p0[i] for i in range(d)) for p in pts[1:]]
    det = det_frac(rows)
    if det == 0:
        return None
    center = []
    for j in range(d):
        mj = [row[:] for row in rows]
        for i in range(d):
            mj[i][j] = rhs[i]
        center.append(det_frac(mj) / det)
    return tuple(center)


def in_circumsphere_sign_exact(simplex, q):
    """+1 strictly inside, 0 on, -1 strictly outside; None if degenerate."""
    c = circumcenter_exact(simplex)
    if c is None:
        return None
    qf = tuple(Fraction(x) for x in q)
    p0 = tuple(Fraction(x) for x in simplex[0])
    r2 = sum((p0[i] - c[i]) ** 2 for i in range(len(c)))
    d2 = sum((qf[i] - c[i]) ** 2 for i in range(len(c)))
    return (r2 > d2) - (r2 < d2)
