"""Piecewise linear complex: the input domain description.

A PLC is a set of vertices plus boundary features: segments (2D) or polygonal
facets (3D, with their boundary edges acting as segments), and hole seed
points.  Validation enforces the structural rules the refiner depends on:
features meet only at shared lower-dimensional features, facets are planar,
and no two features meet at an angle below 60 degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .predicates import Sign, orient2d

_ANGLE_FLOOR_DEG = 60.0
_ANGLE_SLACK_DEG = 1e-7


@dataclass(frozen=True)
class Facet:
    """A planar polygonal boundary facet (3D).

    `loop` lists the polygon corner vertex ids in boundary order;
    `interior_points` are extra vertices lying on the facet (from
    preprocessing) that the mesh must conform to.
    """

    loop: tuple[int, ...]
    interior_points: tuple[int, ...] = ()


@dataclass
class PLC:
    dim: int
    vertices: list[tuple]
    segments: list[tuple[int, int]] = field(default_factory=list)
    facets: list[Facet] = field(default_factory=list)
    holes: list[tuple] = field(default_factory=list)

    def __post_init__(self):
        self.segments = [tuple(s) for s in self.segments]
        self.vertices = [tuple(float(x) for x in v) for v in self.vertices]
        self.holes = [tuple(float(x) for x in h) for h in self.holes]

    # -- basic geometry ----------------------------------------------------

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(self.vertices, dtype=float)
        return pts.min(axis=0), pts.max(axis=0)

    def scale(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def all_segments(self) -> list[tuple[int, int]]:
        """Explicit segments plus, in 3D, every facet boundary edge."""
        seen = {}
        for a, b in self.segments:
            seen[(min(a, b), max(a, b))] = None
        for f in self.facets:
            n = len(f.loop)
            for i in range(n):
                a, b = f.loop[i], f.loop[(i + 1) % n]
                seen[(min(a, b), max(a, b))] = None
        return sorted(seen)

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        if self.dim not in (2, 3):
            raise ValidationError("dim must be 2 or 3")
        if len(self.vertices) < self.dim + 1:
            raise ValidationError("need at least dim+1 vertices")
        for v in self.vertices:
            if len(v) != self.dim:
                raise ValidationError("vertex %r has wrong dimension" % (v,))
            if not all(math.isfinite(x) for x in v):
                raise ValidationError("non-finite vertex %r" % (v,))
        for h in self.holes:
            if len(h) != self.dim or not all(math.isfinite(x) for x in h):
                raise ValidationError("bad hole point %r" % (h,))
        scale = self.scale()
        if scale == 0.0:
            raise ValidationError("all vertices coincide")
        self._check_duplicate_vertices(scale)
        nv = len(self.vertices)
        for a, b in self.segments:
            if not (0 <= a < nv and 0 <= b < nv):
                raise ValidationError("segment (%d,%d) out of range" % (a, b))
            if a == b:
                raise ValidationError("segment with identical endpoints %d" % a)
        segs = self.all_segments()
        if len(set(segs)) != len(segs):
            raise ValidationError("duplicate segment")
        if self.dim == 2:
            if self.facets:
                raise ValidationError("facets are 3D only")
            self._validate_2d(scale)
        else:
            self._validate_3d(scale)

    def _check_duplicate_vertices(self, scale: float) -> None:
        pts = np.asarray(self.vertices, dtype=float)
        order = np.lexsort(pts.T[::-1])
        tol = 1e-12 * scale
        for i, j in zip(order[:-1], order[1:]):
            if np.linalg.norm(pts[i] - pts[j]) <= tol:
                raise ValidationError(
                    "vertices %d and %d coincide" % (min(i, j), max(i, j)))

    def _validate_2d(self, scale: float) -> None:
        pts = self.vertices
        segs = self.segments
        # Pairwise crossings and interior touches, exact orientation tests.
        for i in range(len(segs)):
            a, b = segs[i]
            for j in range(i + 1, len(segs)):
                c, d = segs[j]
                if len({a, b, c, d}) == 4:
                    if _segments_cross(pts[a], pts[b], pts[c], pts[d]):
                        raise ValidationError(
                            "segments %d and %d intersect" % (i, j))
                # Sharing one endpoint is fine; overlap is caught by the
                # on-segment check below.
        for vi, v in enumerate(pts):
            for si, (a, b) in enumerate(segs):
                if vi in (a, b):
                    continue
                if _on_segment(pts[a], pts[b], v):
                    raise ValidationError(
                        "vertex %d lies on segment %d" % (vi, si))
        self._check_2d_angles()
        deg = {}
        for a, b in segs:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        for v, d in sorted(deg.items()):
            if d == 1:
                raise ValidationError(
                    "segment endpoint %d is dangling (boundary not closed)" % v)

    def _check_2d_angles(self) -> None:
        incident: dict[int, list[int]] = {}
        for a, b in self.segments:
            incident.setdefault(a, []).append(b)
            incident.setdefault(b, []).append(a)
        for v, others in sorted(incident.items()):
            p = np.asarray(self.vertices[v])
            for i in range(len(others)):
                for j in range(i + 1, len(others)):
                    u = np.asarray(self.vertices[others[i]]) - p
                    w = np.asarray(self.vertices[others[j]]) - p
                    ang = _angle_deg(u, w)
                    if ang < _ANGLE_FLOOR_DEG - _ANGLE_SLACK_DEG:
                        raise ValidationError(
                            "feature angle %.3f deg at vertex %d is below 60"
                            % (ang, v))

    def _validate_3d(self, scale: float) -> None:
        if not self.facets:
            raise ValidationError("3D PLC needs at least one facet")
        nv = len(self.vertices)
        for fi, f in enumerate(self.facets):
            if len(f.loop) < 3:
                raise ValidationError("facet %d has fewer than 3 corners" % fi)
            ids = list(f.loop) + list(f.interior_points)
            for v in ids:
                if not (0 <= v < nv):
                    raise ValidationError("facet %d references vertex %d" % (fi, v))
            if len(set(f.loop)) != len(f.loop):
                raise ValidationError("facet %d repeats a corner" % fi)
            frame = facet_frame([self.vertices[v] for v in f.loop])
            if frame is None:
                raise ValidationError("facet %d is degenerate" % fi)
            origin, axes, normal = frame
            for v in ids:
                off = abs(np.dot(np.asarray(self.vertices[v]) - origin, normal))
                if off > 1e-8 * scale:
                    raise ValidationError(
                        "facet %d is not planar (vertex %d off by %.2e)"
                        % (fi, v, off))
            uv = project_to_frame([self.vertices[v] for v in f.loop], frame)
            if _polygon_self_intersects(uv):
                raise ValidationError("facet %d polygon self-intersects" % fi)
            for k, v in enumerate(f.interior_points):
                q = project_to_frame([self.vertices[v]], frame)[0]
                if polygon_contains(uv, q) != 1:
                    raise ValidationError(
                        "facet %d interior point %d not strictly inside" % (fi, v))
            self._check_polygon_angles(fi, uv)
        self._check_dihedral_angles()

    def _check_polygon_angles(self, fi: int, uv: list[tuple]) -> None:
        n = len(uv)
        for i in range(n):
            p = np.asarray(uv[i])
            u = np.asarray(uv[(i - 1) % n]) - p
            w = np.asarray(uv[(i + 1) % n]) - p
            ang = _angle_deg(u, w)
            if ang < _ANGLE_FLOOR_DEG - _ANGLE_SLACK_DEG:
                raise ValidationError(
                    "facet %d corner angle %.3f deg is below 60" % (fi, ang))

    def _check_dihedral_angles(self) -> None:
        edge_facets: dict[tuple[int, int], list[int]] = {}
        for fi, f in enumerate(self.facets):
            n = len(f.loop)
            for i in range(n):
                a, b = f.loop[i], f.loop[(i + 1) % n]
                edge_facets.setdefault((min(a, b), max(a, b)), []).append(fi)
        for (a, b), fis in sorted(edge_facets.items()):
            if len(fis) < 2:
                continue
            pa = np.asarray(self.vertices[a])
            e = np.asarray(self.vertices[b]) - pa
            e = e / np.linalg.norm(e)
            for i in range(len(fis)):
                for j in range(i + 1, len(fis)):
                    w1 = self._inward_wedge(fis[i], a, b, pa, e)
                    w2 = self._inward_wedge(fis[j], a, b, pa, e)
                    ang = _angle_deg(w1, w2)
                    if ang < _ANGLE_FLOOR_DEG - _ANGLE_SLACK_DEG:
                        raise ValidationError(
                            "dihedral angle %.3f deg between facets %d and %d "
                            "is below 60" % (ang, fis[i], fis[j]))

    def _inward_wedge(self, fi, a, b, pa, e):
        """Direction from edge (a,b) into facet fi, perpendicular to the edge."""
        f = self.facets[fi]
        pts = np.asarray([self.vertices[v] for v in f.loop])
        c = pts.mean(axis=0)
        w = c - pa
        w = w - np.dot(w, e) * e
        n = np.linalg.norm(w)
        if n == 0:
            raise ValidationError("facet %d centroid on edge (%d,%d)" % (fi, a, b))
        return w / n


# ---------------------------------------------------------------------------
# 2D polygon helpers (shared with facet handling in the refiner)


def _angle_deg(u, w) -> float:
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    if nu == 0 or nw == 0:
        return 0.0
    c = float(np.clip(np.dot(u, w) / (nu * nw), -1.0, 1.0))
    return math.degrees(math.acos(c))


def _segments_cross(a, b, c, d) -> bool:
    """True when open segments ab and cd share a point (no shared endpoints)."""
    o1, o2 = orient2d(a, b, c), orient2d(a, b, d)
    o3, o4 = orient2d(c, d, a), orient2d(c, d, b)
    if o1 is not o2 and o3 is not o4 and \
       Sign.ZERO not in (o1, o2) and Sign.ZERO not in (o3, o4):
        return True
    # Collinear overlap or endpoint-in-interior cases.
    for p, (u, v) in ((c, (a, b)), (d, (a, b)), (a, (c, d)), (b, (c, d))):
        if _on_segment(u, v, p):
            return True
    return False


def _on_segment(a, b, p) -> bool:
    """True when p lies strictly inside segment ab (exact collinearity test)."""
    if orient2d(a, b, p) is not Sign.ZERO:
        return False
    lo = (min(a[0], b[0]), min(a[1], b[1]))
    hi = (max(a[0], b[0]), max(a[1], b[1]))
    inside = all(lo[i] <= p[i] <= hi[i] for i in (0, 1))
    return inside and tuple(p) != tuple(a) and tuple(p) != tuple(b)


def polygon_contains(poly: list[tuple], q: tuple) -> int:
    """1 strictly inside, 0 on the boundary, -1 strictly outside.

    Crossing-number walk with exact orientation tests at the boundary.
    """
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if tuple(q) == tuple(a) or _on_segment(a, b, q):
            return 0
    crossings = 0
    qx, qy = q
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        ay, by = a[1], b[1]
        if (ay > qy) == (by > qy):
            continue
        o = orient2d(a, b, q)
        if (by > ay and o is Sign.POSITIVE) or (by < ay and o is Sign.NEGATIVE):
            crossings += 1
    return 1 if crossings % 2 == 1 else -1


def _polygon_self_intersects(poly: list[tuple]) -> bool:
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            c, d = poly[j], poly[(j + 1) % n]
            shared = {i, (i + 1) % n} & {j, (j + 1) % n}
            if shared:
                continue
            if _segments_cross(a, b, c, d):
                return True
    return False


def facet_frame(points):
    """Orthonormal in-plane frame (origin, (u, v) axes, unit normal) of a
    near-planar point loop, or None when the loop is degenerate."""
    pts = np.asarray(points, dtype=float)
    origin = pts[0]
    u = None
    for p in pts[1:]:
        w = p - origin
        if np.linalg.norm(w) > 0:
            u = w / np.linalg.norm(w)
            break
    if u is None:
        return None
    normal = None
    for p in pts[2:]:
        w = p - origin
        n = np.cross(u, w)
        if np.linalg.norm(n) > 1e-14 * max(1.0, np.linalg.norm(w)):
            normal = n / np.linalg.norm(n)
            break
    if normal is None:
        return None
    v = np.cross(normal, u)
    return origin, (u, v), normal


def project_to_frame(points, frame) -> list[tuple]:
    origin, (u, v), _ = frame
    out = []
    for p in points:
        w = np.asarray(p, dtype=float) - origin
        out.append((float(np.dot(w, u)), float(np.dot(w, v))))
    return out


def lift_from_frame(uv, frame) -> tuple:
    origin, (u, v), _ = frame
    p = origin + uv[0] * u + uv[1] * v
    return tuple(float(x) for x in p)
