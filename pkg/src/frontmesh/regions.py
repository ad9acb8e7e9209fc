"""Geometric constraint regions for Steiner vertex placement.

Regions are conjunctions of primitive constraints (balls, slabs, spindle
tori).  Forbidden regions are the hourglass-shaped sliver loci: a point in
one would form, with the base triangle, a tetrahedron that is flat (slab
condition) yet has an acceptable radius-edge ratio (circumradius cap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FeasibleRegionEmpty, GeometryError, ValidationError
from .predicates import circumsphere, dist

__all__ = [
    "InsideSphere", "OutsideSphere", "Halfspace", "Slab", "SpindleTorus",
    "Region", "ForbiddenRegion", "picking_region", "petal", "snow_globe",
    "forbidden_region", "enumerate_forbidden", "encroaches", "spindle_torus",
]


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise GeometryError("zero direction vector")
    return v / n


@dataclass(frozen=True)
class InsideSphere:
    center: tuple
    radius: float
    kind = "inside_sphere"

    def margin(self, p) -> float:
        return dist(p, self.center) - self.radius

    def margin_batch(self, pts):
        return np.linalg.norm(pts - np.asarray(self.center), axis=1) - self.radius


@dataclass(frozen=True)
class OutsideSphere:
    center: tuple
    radius: float
    kind = "outside_sphere"

    def margin(self, p) -> float:
        return self.radius - dist(p, self.center)

    def margin_batch(self, pts):
        return self.radius - np.linalg.norm(pts - np.asarray(self.center), axis=1)


@dataclass(frozen=True)
class Halfspace:
    """Feasible side: dot(normal, p) <= offset."""

    normal: tuple
    offset: float
    kind = "halfspace"

    def __post_init__(self):
        n = _unit(self.normal)
        object.__setattr__(self, "normal", tuple(float(x) for x in n))

    def margin(self, p) -> float:
        return float(np.dot(self.normal, p)) - self.offset

    def margin_batch(self, pts):
        return pts @ np.asarray(self.normal) - self.offset


@dataclass(frozen=True)
class Slab:
    """|dot(normal, p - origin)| <= half_width."""

    origin: tuple
    normal: tuple
    half_width: float
    kind = "slab"

    def __post_init__(self):
        n = _unit(self.normal)
        object.__setattr__(self, "normal", tuple(float(x) for x in n))

    def margin(self, p) -> float:
        t = float(np.dot(self.normal, np.asarray(p) - np.asarray(self.origin)))
        return abs(t) - self.half_width

    def margin_batch(self, pts):
        t = (pts - np.asarray(self.origin)) @ np.asarray(self.normal)
        return np.abs(t) - self.half_width


@dataclass(frozen=True)
class SpindleTorus:
    """Solid of revolution of a petal disk about the edge through a, b."""

    a: tuple
    b: tuple
    rho: float
    kind = "inside_spindle_torus"

    def __post_init__(self):
        if self.rho < math.sqrt(2) - 1e-12:
            raise ValidationError("spindle torus needs rho >= sqrt(2)")

    @property
    def edge_length(self) -> float:
        return dist(self.a, self.b)

    def _cyl(self, p):
        a = np.asarray(self.a)
        axis = _unit(np.asarray(self.b) - a)
        w = np.asarray(p, dtype=float) - a
        t = float(np.dot(w, axis))
        s = float(np.linalg.norm(w - t * axis))
        return t, s

    def margin(self, p) -> float:
        l = self.edge_length
        q = math.sqrt((self.rho * l) ** 2 - (l / 2) ** 2)
        t, s = self._cyl(p)
        return math.hypot(t - l / 2, s - q) - self.rho * l

    def margin_batch(self, pts):
        a = np.asarray(self.a)
        axis = _unit(np.asarray(self.b) - a)
        l = self.edge_length
        q = math.sqrt((self.rho * l) ** 2 - (l / 2) ** 2)
        w = pts - a
        t = w @ axis
        s = np.linalg.norm(w - t[:, None] * axis, axis=1)
        return np.hypot(t - l / 2, s - q) - self.rho * l


@dataclass(frozen=True)
class Region:
    """Conjunction of primitive constraints."""

    constraints: tuple

    def contains(self, p, slack: float = 0.0) -> bool:
        return all(c.margin(p) <= slack for c in self.constraints)

    def contains_batch(self, pts, slack: float = 0.0):
        ok = np.ones(len(pts), dtype=bool)
        for c in self.constraints:
            ok &= c.margin_batch(pts) <= slack
        return ok

    def bounding_sphere(self) -> tuple[tuple, float]:
        """Center/radius of the smallest inside-sphere constraint."""
        best = None
        for c in self.constraints:
            if isinstance(c, InsideSphere):
                if best is None or c.radius < best.radius:
                    best = c
        if best is None:
            raise GeometryError("region has no bounding sphere constraint")
        return best.center, best.radius

    def bounding_box(self):
        c, r = self.bounding_sphere()
        c = np.asarray(c)
        return c - r, c + r


@dataclass(frozen=True)
class ForbiddenRegion:
    """Hourglass locus of fourth vertices forming a sliver with the base.

    A point belongs exactly when the tetrahedron it would form with the base
    is a sliver: radius-edge ratio at most rho_star and volume-edge ratio
    below sigma_star, both taken over that tetrahedron's own shortest edge.
    The stored slab and sphere pair use the base's shortest side and bound
    the region from outside; they double as optimizer generator surfaces.
    """

    base_ids: tuple | None
    base_points: tuple
    circumcenter: tuple       # of the base triangle, in its plane
    circumradius: float
    normal: tuple             # unit normal of the base plane
    base_shortest: float
    area: float
    rho_star: float
    sigma_star: float
    slab_half_height: float
    cap_radius: float
    sphere_pair: tuple | None  # ((c+, r), (c-, r)) or None when empty

    @property
    def empty(self) -> bool:
        return self.sphere_pair is None

    def extent(self) -> tuple[tuple, float]:
        """A ball certainly containing the region."""
        if self.empty:
            return self.circumcenter, 0.0
        h = math.sqrt(max(self.cap_radius ** 2 - self.circumradius ** 2, 0.0))
        return self.circumcenter, self.cap_radius + h

    def contains(self, p, slack: float = 0.0) -> bool:
        if self.empty:
            return False
        w = np.asarray(p, dtype=float) - np.asarray(self.circumcenter)
        t = float(np.dot(w, self.normal))
        if t == 0.0:
            return False
        l_eff = min(self.base_shortest,
                    min(dist(p, b) for b in self.base_points))
        if abs(t) >= 3.0 * self.sigma_star * l_eff ** 3 / self.area + slack:
            return False
        u2 = max(float(np.dot(w, w)) - t * t, 0.0)
        h = (t * t + u2 - self.circumradius ** 2) / (2.0 * t)
        r = math.hypot(self.circumradius, h)
        return r <= self.rho_star * l_eff + slack

    def contains_batch(self, pts, slack: float = 0.0):
        if self.empty:
            return np.zeros(len(pts), dtype=bool)
        # every member sits on a sphere through the base circle whose
        # radius and center offset are both at most cap + slack
        w = pts - np.asarray(self.circumcenter)
        d2 = np.einsum("ij,ij->i", w, w)
        gate = 2.0 * (self.cap_radius + max(slack, 0.0))
        out = np.zeros(len(pts), dtype=bool)
        idx = np.flatnonzero(d2 <= gate * gate)
        if len(idx) == 0:
            return out
        pts, w, d2 = pts[idx], w[idx], d2[idx]
        t = w @ np.asarray(self.normal)
        u2 = np.maximum(d2 - t * t, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = (t * t + u2 - self.circumradius ** 2) / (2.0 * t)
            r = np.hypot(self.circumradius, h)
        l_eff = np.full(len(pts), self.base_shortest)
        for b in self.base_points:
            l_eff = np.minimum(l_eff, np.linalg.norm(pts - np.asarray(b), axis=1))
        ok = np.abs(t) < 3.0 * self.sigma_star * l_eff ** 3 / self.area + slack
        ok &= t != 0.0
        ok &= r <= self.rho_star * l_eff + slack
        out[idx] = ok
        return out

    def surfaces(self):
        """Boundary surfaces usable as optimizer generators."""
        if self.empty:
            return []
        out = []
        (c1, r1), (c2, r2) = self.sphere_pair
        out.append(("sphere", c1, r1))
        out.append(("sphere", c2, r2))
        cc = np.asarray(self.circumcenter)
        n = np.asarray(self.normal)
        for s in (1.0, -1.0):
            out.append(("plane", tuple(cc + s * self.slab_half_height * n), self.normal))
        return out


# ---------------------------------------------------------------------------
# constructors


def picking_region(element_points, config, measures=None) -> InsideSphere:
    """Ball around the circumcenter where insertion creates edges >= alpha*l."""
    from .quality import measure as _measure
    m = measures if measures is not None else _measure(element_points)
    if not m.rho > config.alpha:
        raise FeasibleRegionEmpty(
            "picking region undefined: rho %.6g <= alpha %.6g"
            % (m.rho, config.alpha))
    return InsideSphere(m.circumcenter, (m.rho - config.alpha) * m.shortest_edge)


def petal(edge, rho_star: float, far_side_hint) -> InsideSphere:
    """2D disk of radius rho_star*l through both edge endpoints, on the
    hint's side of the edge."""
    a, b = (np.asarray(p, dtype=float) for p in edge)
    if len(a) != 2:
        raise ValidationError("petal is 2D only")
    l = float(np.linalg.norm(b - a))
    if l == 0.0:
        raise GeometryError("petal edge has zero length")
    if rho_star < 0.5:
        raise ValidationError("no circle of radius %.3g*l through both "
                              "endpoints" % rho_star)
    mid = (a + b) / 2
    t = (b - a) / l
    n = np.array([-t[1], t[0]])
    hint = np.asarray(far_side_hint, dtype=float)
    side = float(np.dot(hint - mid, n))
    if side == 0.0:
        raise GeometryError("petal side hint lies on the edge line")
    if side < 0:
        n = -n
    offset = math.sqrt((rho_star * l) ** 2 - (l / 2) ** 2)
    center = mid + offset * n
    return InsideSphere(tuple(float(x) for x in center), rho_star * l)


def snow_globe(facet_points, fourth_vertex, rho_star: float) -> InsideSphere | None:
    """Sphere of radius rho_star*l_t through the facet's circumcircle, offset
    toward the fourth vertex; None when the facet itself is too badly shaped
    (Y_t/l_t > rho_star)."""
    pts = [np.asarray(p, dtype=float) for p in facet_points]
    if len(pts) != 3 or len(pts[0]) != 3:
        raise ValidationError("snow globe needs a 3D triangular facet")
    cc, y = circumsphere(facet_points)
    l_t = min(dist(facet_points[i], facet_points[j])
              for i in range(3) for j in range(i + 1, 3))
    if y / l_t > rho_star:
        return None
    n = _unit(np.cross(pts[1] - pts[0], pts[2] - pts[0]))
    side = float(np.dot(np.asarray(fourth_vertex, dtype=float) - np.asarray(cc), n))
    if side < 0:
        n = -n
    offset = math.sqrt(max((rho_star * l_t) ** 2 - y ** 2, 0.0))
    center = np.asarray(cc) + offset * n
    return InsideSphere(tuple(float(x) for x in center), rho_star * l_t)


def forbidden_region(base_points, rho_star: float, sigma_star: float,
                     base_ids=None) -> ForbiddenRegion:
    pts = [np.asarray(p, dtype=float) for p in base_points]
    if len(pts) != 3 or len(pts[0]) != 3:
        raise ValidationError("forbidden region needs a 3D base triangle")
    cross = np.cross(pts[1] - pts[0], pts[2] - pts[0])
    area = float(np.linalg.norm(cross)) / 2.0
    if area == 0.0:
        raise GeometryError("degenerate base triangle")
    n = cross / (2.0 * area)
    cc, y = circumsphere(base_points)
    l = min(dist(base_points[i], base_points[j])
            for i in range(3) for j in range(i + 1, 3))
    half = 3.0 * sigma_star * l ** 3 / area
    cap = rho_star * l
    if cap < y:
        pair = None
    else:
        h = math.sqrt(cap ** 2 - y ** 2)
        c1 = tuple(float(x) for x in (np.asarray(cc) + h * n))
        c2 = tuple(float(x) for x in (np.asarray(cc) - h * n))
        pair = ((c1, cap), (c2, cap))
    return ForbiddenRegion(
        base_ids=tuple(base_ids) if base_ids is not None else None,
        base_points=tuple(tuple(map(float, p)) for p in base_points),
        circumcenter=cc, circumradius=y,
        normal=tuple(float(x) for x in n),
        base_shortest=l, area=area, rho_star=rho_star, sigma_star=sigma_star,
        slab_half_height=half, cap_radius=cap, sphere_pair=pair)


def enumerate_forbidden(mesh, locale: Region, config, driving_l_min: float,
                        driving_circumradius: float) -> list[ForbiddenRegion]:
    """Forbidden regions of nearby vertex triples that could trap a sliver.

    A base triangle qualifies when its own shortest side is below
    rho_star * driving_l_min and its region intersects the locale's bounding
    sphere.  Deterministic order: sorted base vertex ids.
    """
    center, loc_r = locale.bounding_sphere()
    gather_r = 2.0 * config.rho_star * driving_circumradius
    ids = mesh.vertices_near(center, gather_r)
    if len(ids) < 3:
        return []
    pts = np.asarray([mesh.verts[v].point for v in ids])
    thr = config.rho_star * driving_l_min
    # a nonempty region needs base circumradius <= rho_star * shortest side,
    # so base vertices sit within 2*rho_star*thr of each other and within
    # 3*rho_star*thr + loc_r of the locale whenever the extent test below
    # keeps the triple; skipping farther ones cannot change the output
    span = 2.0 * config.rho_star * thr
    reach = (np.linalg.norm(pts - np.asarray(center), axis=1)
             <= 1.5 * span + loc_r)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    iu, ju = np.triu_indices(len(ids), k=1)
    close = [(i, j) for i, j in zip(iu, ju)
             if d[i, j] < thr and reach[i] and reach[j]]
    triples = set()
    for i, j in close:
        third = np.flatnonzero(reach & (d[i] <= span) & (d[j] <= span))
        for k in third:
            if k == i or k == j:
                continue
            triples.add(tuple(sorted((ids[i], ids[j], ids[k]))))
    out = []
    for tri in sorted(triples):
        base = [mesh.verts[v].point for v in tri]
        try:
            fr = forbidden_region(base, config.rho_star, config.sigma_star,
                                  base_ids=tri)
        except GeometryError:
            continue
        if fr.empty:
            continue
        ec, er = fr.extent()
        if dist(ec, center) > er + loc_r:
            continue
        t = abs(float(np.dot(np.asarray(center) - np.asarray(fr.circumcenter),
                             np.asarray(fr.normal))))
        if t - loc_r >= fr.slab_half_height:
            continue
        out.append(fr)
    return out


def encroaches(point, feature_points) -> bool:
    """Strictly inside the diametral ball of a segment or the equatorial
    sphere of a triangular subfacet."""
    if len(feature_points) == 2:
        a, b = (np.asarray(p, dtype=float) for p in feature_points)
        center = (a + b) / 2
        radius = float(np.linalg.norm(b - a)) / 2
    elif len(feature_points) == 3:
        center, radius = circumsphere(feature_points)
    else:
        raise ValidationError("feature must be a segment or a triangle")
    return dist(point, tuple(center)) < radius


def spindle_torus(facet_points, rho: float) -> SpindleTorus:
    """Spindle torus on the facet's shortest edge (Lemma 7 needs rho >= sqrt 2)."""
    k = len(facet_points)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    lengths = {e: dist(facet_points[e[0]], facet_points[e[1]]) for e in pairs}
    i, j = min(lengths, key=lambda e: (lengths[e], e))
    return SpindleTorus(tuple(map(float, facet_points[i])),
                        tuple(map(float, facet_points[j])), rho)
