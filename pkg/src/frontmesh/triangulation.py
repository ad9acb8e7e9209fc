"""Incremental Delaunay triangulation in 2D and 3D.

The mesh always covers a large bounding-box scaffold so that every point of
interest is strictly inside the triangulated region.  Insertion is
Bowyer-Watson (strict-conflict cavity, so exactly-cospherical configurations
are left alone), deletion retriangulates the star by a side-matched search
over link simplices whose circumball strictly contains the deleted vertex.
All topological decisions go through the exact predicates.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ValidationError
from .plc import PLC
from .predicates import Sign, dist, in_circumsphere, orient, simplex_volume

REGION_UNKNOWN = -1
REGION_OUTSIDE = 0
REGION_INSIDE = 1

_SCAFFOLD_MARGIN = 8.0


class Provenance(enum.Enum):
    INPUT = "input"
    FREE_STEINER = "free_steiner"
    BOUNDARY_STEINER = "boundary_steiner"


@dataclass
class VertexRecord:
    point: tuple
    provenance: Provenance
    # ("segment", plc index) or ("facet", plc index) for boundary Steiners.
    feature: tuple | None = None


@dataclass
class InsertResult:
    vid: int
    created: list[int]
    removed: list[tuple[int, tuple]]


@dataclass
class DeleteResult:
    vid: int
    point: tuple
    created: list[int]
    removed: list[tuple[int, tuple]]


class _Grid:
    """Uniform spatial hash over vertex positions."""

    def __init__(self, origin, cell: float):
        self.origin = tuple(origin)
        self.cell = cell
        self.table: dict[tuple, list[int]] = {}

    def key(self, p):
        return tuple(int(math.floor((p[i] - self.origin[i]) / self.cell))
                     for i in range(len(self.origin)))

    def add(self, vid: int, p) -> None:
        self.table.setdefault(self.key(p), []).append(vid)

    def remove(self, vid: int, p) -> None:
        k = self.key(p)
        cell = self.table.get(k)
        if cell is not None and vid in cell:
            cell.remove(vid)
            if not cell:
                del self.table[k]

    def near(self, p, radius: float) -> list[int]:
        lo = self.key(tuple(x - radius for x in p))
        hi = self.key(tuple(x + radius for x in p))
        ncells = 1
        for i in range(len(p)):
            ncells *= hi[i] - lo[i] + 1
        out: list[int] = []
        if ncells > 4 * len(self.table) + 16:
            # Query box covers more cells than are occupied: scan the table.
            for k, ids in self.table.items():
                if all(lo[i] <= k[i] <= hi[i] for i in range(len(p))):
                    out.extend(ids)
        else:
            for k in itertools.product(*(range(lo[i], hi[i] + 1)
                                         for i in range(len(p)))):
                out.extend(self.table.get(k, ()))
        out.sort()
        return out


class Mesh:
    """A d-dimensional Delaunay triangulation with vertex provenance."""

    def __init__(self, dim: int):
        self.dim = dim
        self.verts: dict[int, VertexRecord] = {}
        self.simplices: dict[int, tuple] = {}
        self.neighbors: dict[int, list[int]] = {}
        self.region: dict[int, int] = {}
        self.scaffold_ids: set[int] = set()
        self.input_vids: list[int] = []
        self.stamp = 0
        self.domain_diag = 1.0
        self.coincidence_tol = 1e-12
        self._grid: _Grid | None = None
        self._v2s: dict[int, int] = {}
        self._next_vid = 0
        self._next_sid = 0
        self._last_sid: int | None = None

    # -- bookkeeping ---------------------------------------------------------

    def new_vertex(self, point, provenance, feature=None) -> int:
        vid = self._next_vid
        self._next_vid += 1
        self.verts[vid] = VertexRecord(tuple(map(float, point)), provenance, feature)
        if self._grid is not None:
            self._grid.add(vid, point)
        return vid

    def _add_simplex(self, vids: tuple, region: int) -> int:
        sid = self._next_sid
        self._next_sid += 1
        self.simplices[sid] = vids
        self.neighbors[sid] = [-1] * (self.dim + 1)
        self.region[sid] = region
        for v in vids:
            self._v2s[v] = sid
        return sid

    def _drop_simplex(self, sid: int) -> None:
        del self.simplices[sid]
        del self.neighbors[sid]
        del self.region[sid]

    def point(self, vid: int) -> tuple:
        return self.verts[vid].point

    def points_of(self, sid: int) -> tuple:
        return tuple(self.verts[v].point for v in self.simplices[sid])

    def star(self, vid: int) -> list[int]:
        """Simplex ids containing vid, in sorted order."""
        seed = self._v2s.get(vid)
        if seed is None or seed not in self.simplices or \
                vid not in self.simplices[seed]:
            seed = None
            for sid in self.simplices:
                if vid in self.simplices[sid]:
                    seed = sid
                    break
            if seed is None:
                return []
            self._v2s[vid] = seed
        out = {seed}
        queue = [seed]
        while queue:
            sid = queue.pop()
            for nb in self.neighbors[sid]:
                if nb != -1 and nb not in out and vid in self.simplices[nb]:
                    out.add(nb)
                    queue.append(nb)
        return sorted(out)

    def edge_exists(self, a: int, b: int) -> bool:
        return any(b in self.simplices[sid] for sid in self.star(a))

    def face_exists(self, vids) -> bool:
        need = set(vids)
        a = min(need)
        return any(need <= set(self.simplices[sid]) for sid in self.star(a))

    def vertices_near(self, point, radius: float) -> list[int]:
        ids = self._grid.near(point, radius)
        return [v for v in ids if dist(self.verts[v].point, point) <= radius]

    def nearest_vertex(self, point, exclude=()) -> tuple[int, float] | None:
        if not self.verts:
            return None
        r = self._grid.cell
        limit = _SCAFFOLD_MARGIN * 4 * self.domain_diag
        while True:
            best = None
            for v in self._grid.near(point, r):
                if v in exclude:
                    continue
                d = dist(self.verts[v].point, point)
                if best is None or d < best[1]:
                    best = (v, d)
            if best is not None and best[1] <= r:
                return best
            if r > limit:
                if best is not None:
                    return best
                cand = [(dist(rec.point, point), v)
                        for v, rec in sorted(self.verts.items())
                        if v not in exclude]
                if not cand:
                    return None
                d, v = min(cand)
                return (v, d)
            r *= 2.0

    def domain_simplices(self) -> list[int]:
        return sorted(s for s, r in self.region.items() if r == REGION_INSIDE)

    def steiner_count(self) -> int:
        return sum(1 for rec in self.verts.values()
                   if rec.provenance is not Provenance.INPUT)


# ---------------------------------------------------------------------------
# location


def _orient_with(mesh: Mesh, vids: tuple, pos: int, point) -> Sign:
    pts = [mesh.verts[v].point for v in vids]
    pts[pos] = point
    return orient(pts)


def _contains(mesh: Mesh, sid: int, point) -> bool:
    vids = mesh.simplices[sid]
    return all(_orient_with(mesh, vids, i, point) is not Sign.NEGATIVE
               for i in range(len(vids)))


def locate(mesh: Mesh, point, hint: int | None = None) -> int | None:
    """Simplex containing the point, or None when outside the triangulation.

    When the point lies on a shared facet the lowest simplex id wins.
    """
    if not mesh.simplices:
        return None
    sid = hint if hint in mesh.simplices else mesh._last_sid
    if sid not in mesh.simplices:
        sid = next(iter(mesh.simplices))
    prev = -1
    steps_left = 4 * len(mesh.simplices) + 16
    while steps_left > 0:
        steps_left -= 1
        vids = mesh.simplices[sid]
        move = None
        fallback_move = None
        inside = True
        for i in range(len(vids)):
            s = _orient_with(mesh, vids, i, point)
            if s is Sign.NEGATIVE:
                inside = False
                nb = mesh.neighbors[sid][i]
                if nb == -1:
                    return None
                if nb != prev:
                    move = nb
                    break
                fallback_move = nb
        if inside:
            return _lowest_containing(mesh, sid, point)
        if move is None:
            move = fallback_move
        prev, sid = sid, move
    # Pathological walk: deterministic exhaustive scan.
    containing = [s for s in sorted(mesh.simplices) if _contains(mesh, s, point)]
    return containing[0] if containing else None


def _lowest_containing(mesh: Mesh, seed: int, point) -> int:
    found = {seed}
    queue = [seed]
    while queue:
        sid = queue.pop()
        vids = mesh.simplices[sid]
        for i in range(len(vids)):
            nb = mesh.neighbors[sid][i]
            if nb == -1 or nb in found:
                continue
            if _orient_with(mesh, vids, i, point) is Sign.ZERO and \
                    _contains(mesh, nb, point):
                found.add(nb)
                queue.append(nb)
    return min(found)


# ---------------------------------------------------------------------------
# insertion


def insert_vertex(mesh: Mesh, point, provenance=Provenance.FREE_STEINER,
                  feature=None, hint: int | None = None) -> InsertResult:
    """Bowyer-Watson insertion.  The point must be strictly inside the
    triangulated scaffold and not coincide with an existing vertex."""
    point = tuple(map(float, point))
    if len(point) != mesh.dim or not all(math.isfinite(x) for x in point):
        raise ValidationError("bad point %r" % (point,))
    near = mesh.nearest_vertex(point)
    if near is not None and near[1] <= mesh.coincidence_tol:
        raise ValidationError(
            "point %r coincides with vertex %d" % (point, near[0]))
    start = locate(mesh, point, hint)
    if start is None:
        raise GeometryError("point %r outside the triangulated domain" % (point,))

    conflict = {start}
    queue = [start]
    while queue:
        sid = queue.pop()
        for nb in mesh.neighbors[sid]:
            if nb == -1 or nb in conflict:
                continue
            if in_circumsphere(mesh.points_of(nb), point) is Sign.POSITIVE:
                conflict.add(nb)
                queue.append(nb)

    # Cavity boundary: facets whose outer side survives.
    boundary = []  # (facet vids tuple, outer sid, owner region)
    for sid in sorted(conflict):
        vids = mesh.simplices[sid]
        for i in range(len(vids)):
            nb = mesh.neighbors[sid][i]
            if nb in conflict:
                continue
            facet = vids[:i] + vids[i + 1:]
            boundary.append((facet, nb, mesh.region[sid]))

    removed = [(sid, mesh.simplices[sid]) for sid in sorted(conflict)]
    for sid in conflict:
        mesh._drop_simplex(sid)

    vid = mesh.new_vertex(point, provenance, feature)
    created = []
    facet_map: dict[tuple, tuple[int, int]] = {}
    for facet, outer, region in boundary:
        vids = facet + (vid,)
        o = orient([mesh.verts[v].point for v in vids])
        if o is Sign.ZERO:
            raise GeometryError("degenerate fan simplex at %r" % (point,))
        if o is Sign.NEGATIVE:
            vids = (vids[1], vids[0]) + vids[2:]
        sid = mesh._add_simplex(vids, region)
        created.append(sid)
        # Outer wiring.
        pos_new = vids.index(vid)
        mesh.neighbors[sid][pos_new] = outer
        if outer != -1:
            fset = set(facet)
            for j, w in enumerate(mesh.simplices[outer]):
                if w not in fset:
                    mesh.neighbors[outer][j] = sid
                    break
        # Inner wiring among the fan.
        for j, w in enumerate(vids):
            if w == vid:
                continue
            key = tuple(sorted(set(vids) - {w}))
            other = facet_map.pop(key, None)
            if other is None:
                facet_map[key] = (sid, j)
            else:
                osid, oj = other
                mesh.neighbors[sid][j] = osid
                mesh.neighbors[osid][oj] = sid
    mesh.stamp += 1
    mesh._last_sid = created[-1]
    return InsertResult(vid=vid, created=created, removed=removed)


# ---------------------------------------------------------------------------
# deletion


def delete_vertex(mesh: Mesh, vid: int) -> DeleteResult:
    """Remove a Steiner vertex and retriangulate its star Delaunay-wise."""
    rec = mesh.verts.get(vid)
    if rec is None:
        raise ValidationError("no vertex %d" % vid)
    if rec.provenance is Provenance.INPUT or vid in mesh.scaffold_ids:
        raise ValidationError("vertex %d is protected input" % vid)
    star = mesh.star(vid)
    if not star:
        raise GeometryError("vertex %d has no incident simplices" % vid)
    v_point = rec.point

    link_ids = sorted({w for sid in star for w in mesh.simplices[sid]} - {vid})
    link_facets: dict[tuple, int] = {}  # facet key -> outer sid (-1 hull)
    required: dict[tuple, Sign] = {}
    for sid in star:
        vids = mesh.simplices[sid]
        i = vids.index(vid)
        facet = tuple(sorted(vids[:i] + vids[i + 1:]))
        link_facets[facet] = mesh.neighbors[sid][i]
        side = orient([mesh.verts[w].point for w in facet] + [v_point])
        if side is Sign.ZERO:
            raise GeometryError("degenerate star simplex at vertex %d" % vid)
        required[facet] = side

    pts = {w: mesh.verts[w].point for w in link_ids}

    def candidate_ok(combo: tuple, allow_zero: bool) -> bool:
        cpts = [pts[w] for w in combo]
        if orient(cpts) is Sign.ZERO:
            return False
        s = in_circumsphere(cpts, v_point)
        if s is Sign.NEGATIVE or (s is Sign.ZERO and not allow_zero):
            return False
        for q in link_ids:
            if q in combo:
                continue
            if in_circumsphere(cpts, pts[q]) is Sign.POSITIVE:
                return False
        return True

    def side_of(facet: tuple, w: int) -> Sign:
        return orient([pts[f] for f in facet] + [pts[w]])

    def solve(allow_zero: bool):
        memo: dict[tuple, bool] = {}

        def ok(combo):
            r = memo.get(combo)
            if r is None:
                r = memo[combo] = candidate_ok(combo, allow_zero)
            return r

        def dfs(unmatched: dict, consumed: frozenset, depth: int):
            if not unmatched:
                return []
            if depth > 4 * len(link_ids) + 16:
                return None
            facet = min(unmatched)
            need = unmatched[facet]
            fset = set(facet)
            for w in link_ids:
                if w in fset:
                    continue
                if side_of(facet, w) is not need:
                    continue
                combo = tuple(sorted(fset | {w}))
                if not ok(combo):
                    continue
                nxt = dict(unmatched)
                done = set()
                conflict_found = False
                for out in combo:
                    g = tuple(sorted(set(combo) - {out}))
                    s_g = side_of(g, out)
                    if s_g is Sign.ZERO or g in consumed:
                        conflict_found = True
                        break
                    have = nxt.get(g)
                    if have is None:
                        nxt[g] = Sign(-int(s_g))
                    elif have is s_g:
                        del nxt[g]
                        done.add(g)
                    else:
                        conflict_found = True
                        break
                if conflict_found:
                    continue
                rest = dfs(nxt, consumed | done, depth + 1)
                if rest is not None:
                    return [combo] + rest
            return None

        return dfs(dict(required), frozenset(), 0)

    fill = solve(allow_zero=False)
    if fill is None:
        fill = solve(allow_zero=True)
    if fill is None:
        raise GeometryError("could not retriangulate around vertex %d" % vid)

    old_volume = sum(simplex_volume(mesh.points_of(sid)) for sid in star)
    new_volume = sum(simplex_volume([pts[w] for w in combo]) for combo in fill)
    if abs(new_volume - old_volume) > 1e-6 * max(old_volume, 1e-300):
        raise GeometryError("cavity retriangulation volume mismatch at %d" % vid)

    regions = {mesh.region[sid] for sid in star}
    new_region = regions.pop() if len(regions) == 1 else REGION_UNKNOWN

    removed = [(sid, mesh.simplices[sid]) for sid in star]
    for sid in star:
        mesh._drop_simplex(sid)
    mesh._grid.remove(vid, rec.point)
    del mesh.verts[vid]
    mesh._v2s.pop(vid, None)

    created = []
    facet_map: dict[tuple, tuple[int, int]] = {}
    for combo in fill:
        vids = combo
        if orient([pts[w] for w in vids]) is Sign.NEGATIVE:
            vids = (vids[1], vids[0]) + vids[2:]
        sid = mesh._add_simplex(vids, new_region)
        created.append(sid)
        for j, w in enumerate(vids):
            key = tuple(sorted(set(vids) - {w}))
            outer = link_facets.get(key)
            if outer is not None:
                mesh.neighbors[sid][j] = outer
                if outer != -1:
                    kset = set(key)
                    for m, u in enumerate(mesh.simplices[outer]):
                        if u not in kset:
                            mesh.neighbors[outer][m] = sid
                            break
            else:
                other = facet_map.pop(key, None)
                if other is None:
                    facet_map[key] = (sid, j)
                else:
                    osid, oj = other
                    mesh.neighbors[sid][j] = osid
                    mesh.neighbors[osid][oj] = sid
    mesh.stamp += 1
    mesh._last_sid = created[-1]
    return DeleteResult(vid=vid, point=v_point, created=created, removed=removed)


# ---------------------------------------------------------------------------
# bootstrap


def _box_corners(lo, hi, dim):
    if dim == 2:
        return [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
    out = []
    for i in (0, 1):
        for j in (0, 1):
            for k in (0, 1):
                out.append((hi[0] if i else lo[0],
                            hi[1] if j else lo[1],
                            hi[2] if k else lo[2]))
    return out


def bootstrap(plc: PLC) -> Mesh:
    """Scaffold box triangulation plus all PLC vertices, inserted in order."""
    plc.validate()
    mesh = Mesh(plc.dim)
    lo, hi = plc.bbox()
    diag = plc.scale()
    mesh.domain_diag = diag
    mesh.coincidence_tol = 1e-12 * diag
    center = (np.asarray(lo) + np.asarray(hi)) / 2
    half = _SCAFFOLD_MARGIN * diag
    blo = tuple(float(c - half) for c in center)
    bhi = tuple(float(c + half) for c in center)
    mesh._grid = _Grid(blo, diag / 32.0)

    corners = _box_corners(blo, bhi, plc.dim)
    cids = [mesh.new_vertex(p, Provenance.INPUT) for p in corners]
    mesh.scaffold_ids = set(cids)

    if plc.dim == 2:
        tris = [(cids[0], cids[1], cids[2]), (cids[0], cids[2], cids[3])]
        for t in tris:
            if orient([mesh.verts[v].point for v in t]) is Sign.NEGATIVE:
                t = (t[1], t[0], t[2])
            mesh._add_simplex(t, REGION_UNKNOWN)
    else:
        # Kuhn subdivision: six tetrahedra around the main diagonal 000-111.
        # Corner index is 4i + 2j + k for (i, j, k) in {0,1}^3.
        for perm in sorted(itertools.permutations((4, 2, 1))):
            path = [0]
            for step in perm:
                path.append(path[-1] + step)
            t = tuple(cids[p] for p in path)
            if orient([mesh.verts[v].point for v in t]) is Sign.NEGATIVE:
                t = (t[1], t[0]) + t[2:]
            mesh._add_simplex(t, REGION_UNKNOWN)
    _rebuild_adjacency(mesh)
    mesh._last_sid = next(iter(mesh.simplices))

    for p in plc.vertices:
        res = insert_vertex(mesh, p, Provenance.INPUT)
        mesh.input_vids.append(res.vid)
    return mesh


def _rebuild_adjacency(mesh: Mesh) -> None:
    facet_map: dict[tuple, tuple[int, int]] = {}
    for sid in sorted(mesh.simplices):
        vids = mesh.simplices[sid]
        mesh.neighbors[sid] = [-1] * len(vids)
        for j, w in enumerate(vids):
            key = tuple(sorted(set(vids) - {w}))
            other = facet_map.pop(key, None)
            if other is None:
                facet_map[key] = (sid, j)
            else:
                osid, oj = other
                mesh.neighbors[sid][j] = osid
                mesh.neighbors[osid][oj] = sid


# ---------------------------------------------------------------------------
# structural audit (test support; brute force, small meshes only)


def audit_structure(mesh: Mesh, delaunay: bool = True) -> list[str]:
    problems = []
    for sid, vids in sorted(mesh.simplices.items()):
        if len(set(vids)) != mesh.dim + 1:
            problems.append("simplex %d repeats a vertex" % sid)
            continue
        if any(v not in mesh.verts for v in vids):
            problems.append("simplex %d references a missing vertex" % sid)
            continue
        if orient(mesh.points_of(sid)) is not Sign.POSITIVE:
            problems.append("simplex %d is not positively oriented" % sid)
    facet_count: dict[tuple, list[int]] = {}
    for sid, vids in sorted(mesh.simplices.items()):
        for j, w in enumerate(vids):
            key = tuple(sorted(set(vids) - {w}))
            facet_count.setdefault(key, []).append(sid)
            nb = mesh.neighbors[sid][j]
            if nb != -1:
                if nb not in mesh.simplices:
                    problems.append("simplex %d neighbor %d missing" % (sid, nb))
                elif sid not in mesh.neighbors[nb]:
                    problems.append(
                        "asymmetric adjacency %d -> %d" % (sid, nb))
    for key, sids in sorted(facet_count.items()):
        if len(sids) > 2:
            problems.append("facet %r shared by %d simplices" % (key, len(sids)))
    total = sum(simplex_volume(mesh.points_of(s)) for s in mesh.simplices)
    corners = [mesh.verts[v].point for v in sorted(mesh.scaffold_ids)]
    if corners:
        lo = [min(p[i] for p in corners) for i in range(mesh.dim)]
        hi = [max(p[i] for p in corners) for i in range(mesh.dim)]
        box = float(np.prod(np.asarray(hi) - np.asarray(lo)))
        if abs(total - box) > 1e-9 * box:
            problems.append("volume %.17g != box volume %.17g" % (total, box))
    if delaunay:
        items = sorted(mesh.verts.items())
        for sid in sorted(mesh.simplices):
            spts = mesh.points_of(sid)
            svids = set(mesh.simplices[sid])
            for v, rec in items:
                if v in svids:
                    continue
                if in_circumsphere(spts, rec.point) is Sign.POSITIVE:
                    problems.append(
                        "vertex %d strictly inside circumball of %d" % (v, sid))
    return problems
