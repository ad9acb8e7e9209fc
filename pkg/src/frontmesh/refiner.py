"""Advancing-front Delaunay refinement driver.

refine() pulls poor elements off a priority queue and places Steiner
vertices with the combinatorial optimizer, constrained to the element's
picking region intersected with a petal (2D) or snow globe / spindle torus
(3D), while steering clear of forbidden sliver regions.  Candidates that
would encroach a boundary feature are diverted to an encroachment handler
that advances the boundary front instead.  preprocess_plc() protects input
vertices from feature diametral balls before any mesh exists, and replay()
re-executes a recorded event log against a fresh bootstrap.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
from bisect import insort
from dataclasses import dataclass, field

import numpy as np

from . import optimizer as op
from . import regions as rg
from .errors import (FeasibleRegionEmpty, GeometryError, InsertionCapExceeded,
                     ValidationError)
from .plc import (PLC, Facet, facet_frame, lift_from_frame, polygon_contains,
                  project_to_frame)
from .predicates import Sign, circumsphere, dist, in_circumsphere, orient2d
from .quality import (ElementClass, InsertionMode, Ordering, PlacementMode,
                      RefinementConfig, classify_measures, measure, queue_key,
                      smallest_facet)
from .triangulation import (REGION_INSIDE, REGION_OUTSIDE, REGION_UNKNOWN,
                            Mesh, Provenance, bootstrap, delete_vertex,
                            insert_vertex, locate)

__all__ = [
    "EventKind", "InsertionEvent", "EventLog", "refine", "preprocess_plc",
    "replay",
]


class EventKind(str, enum.Enum):
    STEINER = "STEINER"
    BOUNDARY_MIDPOINT = "BOUNDARY_MIDPOINT"
    BOUNDARY_FRONT = "BOUNDARY_FRONT"
    DELETE = "DELETE"
    FALLBACK_SLIVER = "FALLBACK_SLIVER"
    SPINDLE = "SPINDLE"


@dataclass(frozen=True)
class InsertionEvent:
    """One mesh mutation.  DELETE events carry only vid and point; the rest
    record the driving scales used by the audit suite."""

    kind: EventKind
    point: tuple
    vid: int
    driving_l_min: float | None = None
    key: float | None = None
    min_dist: float | None = None
    edge_dist: float | None = None
    edge: tuple | None = None
    regions: tuple = ()
    feature: tuple | None = None

    def to_record(self) -> dict:
        rec: dict = {"type": "event", "kind": self.kind.value,
                     "vid": self.vid, "point": list(self.point)}
        if self.driving_l_min is not None:
            rec["driving_l_min"] = self.driving_l_min
        if self.key is not None:
            rec["key"] = self.key
        if self.min_dist is not None:
            rec["min_dist"] = self.min_dist
        if self.edge_dist is not None:
            rec["edge_dist"] = self.edge_dist
        if self.edge is not None:
            rec["edge"] = list(self.edge)
        if self.regions:
            rec["regions"] = list(self.regions)
        if self.feature is not None:
            rec["feature"] = list(self.feature)
        return rec

    @staticmethod
    def from_record(rec: dict) -> "InsertionEvent":
        return InsertionEvent(
            kind=EventKind(rec["kind"]),
            point=tuple(rec["point"]),
            vid=int(rec["vid"]),
            driving_l_min=rec.get("driving_l_min"),
            key=rec.get("key"),
            min_dist=rec.get("min_dist"),
            edge_dist=rec.get("edge_dist"),
            edge=tuple(rec["edge"]) if "edge" in rec else None,
            regions=tuple(rec.get("regions", ())),
            feature=tuple(rec["feature"]) if "feature" in rec else None,
        )


@dataclass
class EventLog:
    dim: int
    config: dict
    l0: float | None = None
    preprocess: list = field(default_factory=list)
    events: list = field(default_factory=list)
    rounds: list = field(default_factory=list)

    def append(self, event: InsertionEvent) -> None:
        self.events.append(event)

    def insertions(self) -> list:
        return [e for e in self.events if e.kind is not EventKind.DELETE]

    def count(self, kind: EventKind) -> int:
        return sum(1 for e in self.events if e.kind is kind)

    def to_jsonl(self) -> str:
        head = {"type": "header", "dim": self.dim, "config": self.config,
                "l0": self.l0, "preprocess": self.preprocess}
        lines = [json.dumps(head, sort_keys=True)]
        lines.extend(json.dumps(e.to_record(), sort_keys=True)
                     for e in self.events)
        lines.extend(json.dumps({"type": "round", **r}, sort_keys=True)
                     for r in self.rounds)
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "EventLog":
        log = None
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["type"] == "header":
                log = EventLog(dim=rec["dim"], config=rec["config"],
                               l0=rec["l0"], preprocess=rec["preprocess"])
            elif rec["type"] == "event":
                if log is None:
                    raise ValidationError("event line before header")
                log.events.append(InsertionEvent.from_record(rec))
            elif rec["type"] == "round":
                rec = dict(rec)
                rec.pop("type")
                log.rounds.append(rec)
            else:
                raise ValidationError("unknown record type %r" % rec["type"])
        if log is None:
            raise ValidationError("empty event log")
        return log


def _config_echo(config: RefinementConfig) -> dict:
    return {
        "rho_star": config.rho_star,
        "sigma_star": config.sigma_star,
        "alpha": config.alpha,
        "gamma": config.gamma_eff,
        "placement": config.placement.value,
        "insertion": config.insertion.value,
        "ordering": config.ordering.value,
        "preprocess": config.preprocess,
        "classic_boundary": config.classic_boundary,
        "max_insertions": config.max_insertions,
        "multi_batch": config.multi_batch,
    }


# ---------------------------------------------------------------------------
# boundary feature stores


class _RootSegment:
    """One input segment with its accumulated split points, ordered by the
    arc-length parameter t in [0, length]."""

    __slots__ = ("index", "pa", "u", "length", "splits")

    def __init__(self, index: int, pa, pb, va: int, vb: int):
        self.index = index
        a = np.asarray(pa, dtype=float)
        b = np.asarray(pb, dtype=float)
        self.pa = a
        self.length = float(np.linalg.norm(b - a))
        if self.length == 0.0:
            raise GeometryError("zero-length segment")
        self.u = (b - a) / self.length
        self.splits: list[tuple[float, int]] = [(0.0, va), (self.length, vb)]

    def param(self, p) -> float:
        return float(np.dot(np.asarray(p, dtype=float) - self.pa, self.u))

    def point_at(self, t: float) -> tuple:
        return tuple(float(x) for x in self.pa + t * self.u)

    def line_dist(self, p) -> float:
        q = np.asarray(p, dtype=float) - self.pa
        return float(np.linalg.norm(q - np.dot(q, self.u) * self.u))

    def nsubs(self) -> int:
        return len(self.splits) - 1

    def sub(self, i: int) -> tuple[float, float, int, int]:
        t0, va = self.splits[i]
        t1, vb = self.splits[i + 1]
        return t0, t1, va, vb

    def locate(self, t: float) -> int | None:
        """Index of the subsegment whose open interval contains t."""
        for i in range(self.nsubs()):
            if self.splits[i][0] < t < self.splits[i + 1][0]:
                return i
        return None

    def insert(self, t: float, vid: int) -> None:
        insort(self.splits, (t, vid))

    def ball(self) -> tuple[tuple, float]:
        mid = self.pa + (self.length / 2.0) * self.u
        return tuple(float(x) for x in mid), self.length / 2.0


class _FlatTri:
    """Incremental 2D Delaunay triangulation over four far sentinel corners,
    used as the per-facet sheet.  Exact predicates, deterministic ids."""

    def __init__(self, lo, hi):
        cx = (lo[0] + hi[0]) / 2.0
        cy = (lo[1] + hi[1]) / 2.0
        half = 8.0 * max(hi[0] - lo[0], hi[1] - lo[1], 1e-12)
        self.pts: list[tuple] = [
            (cx - half, cy - half), (cx + half, cy - half),
            (cx + half, cy + half), (cx - half, cy + half)]
        self.vids: list[int | None] = [None, None, None, None]
        self.local_of: dict[int, int] = {}
        self.tris: dict[int, tuple] = {0: (0, 1, 2), 1: (0, 2, 3)}
        self._next = 2

    def insert(self, uv, vid: int) -> list[int]:
        if vid in self.local_of:
            return []
        self.pts.append((float(uv[0]), float(uv[1])))
        self.vids.append(vid)
        li = len(self.pts) - 1
        self.local_of[vid] = li
        conflict = [tid for tid in sorted(self.tris)
                    if in_circumsphere([self.pts[k] for k in self.tris[tid]],
                                       uv) is Sign.POSITIVE]
        if not conflict:
            raise GeometryError("sheet point conflicts with no triangle")
        dead = set(conflict)
        edges = []
        for tid in conflict:
            a, b, c = self.tris[tid]
            edges.extend(((a, b), (b, c), (c, a)))
        present = set(edges)
        boundary = sorted(e for e in edges if (e[1], e[0]) not in present)
        for tid in conflict:
            del self.tris[tid]
        created = []
        for a, b in boundary:
            tid = self._next
            self._next += 1
            self.tris[tid] = (a, b, li)
            created.append(tid)
        return created

    def locate(self, uv) -> int | None:
        for tid in sorted(self.tris):
            a, b, c = self.tris[tid]
            pa, pb, pc = self.pts[a], self.pts[b], self.pts[c]
            if (orient2d(pa, pb, uv) is not Sign.NEGATIVE
                    and orient2d(pb, pc, uv) is not Sign.NEGATIVE
                    and orient2d(pc, pa, uv) is not Sign.NEGATIVE):
                return tid
        return None

    def is_real(self, tid: int) -> bool:
        return all(self.vids[k] is not None for k in self.tris[tid])

    def tri_vids(self, tid: int) -> tuple:
        return tuple(self.vids[k] for k in self.tris[tid])

    def tri_uvs(self, tid: int) -> tuple:
        return tuple(self.pts[k] for k in self.tris[tid])


class _Sheet:
    """One input facet: a frame, the polygon loop in frame coordinates, and a
    flat triangulation of every mesh vertex lying on the facet."""

    def __init__(self, index: int, loop_pts, loop_vids):
        self.index = index
        frame = facet_frame(loop_pts)
        if frame is None:
            raise GeometryError("facet has no frame")
        self.origin, self.axes, self.normal = frame
        self.frame = frame
        self.loop_uv = [tuple(q) for q in project_to_frame(loop_pts, frame)]
        xs = [q[0] for q in self.loop_uv]
        ys = [q[1] for q in self.loop_uv]
        self.tri = _FlatTri((min(xs), min(ys)), (max(xs), max(ys)))
        self.point_of: dict[int, tuple] = {}
        self._cache_key = -1
        self._subs: list[tuple] = []
        self._max_r = 0.0
        for p, v in zip(loop_pts, loop_vids):
            self.add(v, p)

    def project(self, p) -> tuple[tuple, float]:
        q = np.asarray(p, dtype=float) - np.asarray(self.origin)
        u, v = (np.asarray(ax, dtype=float) for ax in self.axes)
        h = float(np.dot(q, np.asarray(self.normal, dtype=float)))
        return (float(np.dot(q, u)), float(np.dot(q, v))), h

    def add(self, vid: int, point) -> list[int]:
        uv, _ = self.project(point)
        self.point_of[vid] = tuple(float(x) for x in point)
        return self.tri.insert(uv, vid)

    def _refresh(self) -> None:
        if self._cache_key == len(self.tri.pts):
            return
        subs = []
        max_r = 0.0
        for tid in sorted(self.tri.tris):
            if not self.tri.is_real(tid):
                continue
            uvs = self.tri.tri_uvs(tid)
            cx = (uvs[0][0] + uvs[1][0] + uvs[2][0]) / 3.0
            cy = (uvs[0][1] + uvs[1][1] + uvs[2][1]) / 3.0
            if polygon_contains(self.loop_uv, (cx, cy)) != 1:
                continue
            vids = self.tri.tri_vids(tid)
            pts = [self.point_of[v] for v in vids]
            try:
                center, radius = circumsphere(pts)
            except GeometryError:
                continue
            subs.append((tid, vids, center, radius))
            max_r = max(max_r, radius)
        self._subs = subs
        self._max_r = max_r
        self._cache_key = len(self.tri.pts)

    def subfacets(self) -> list[tuple]:
        self._refresh()
        return self._subs

    def max_radius(self) -> float:
        self._refresh()
        return self._max_r

    def subfacet_of(self, tid: int) -> tuple | None:
        for entry in self.subfacets():
            if entry[0] == tid:
                return entry
        return None

    def encroached_subfacet(self, p) -> tuple | None:
        """Subfacet whose equatorial ball strictly contains p, or None.

        Only the subfacet under p's in-plane projection can be encroached;
        when the projection lands outside the covered region every subfacet
        is checked directly.
        """
        self._refresh()
        if not self._subs:
            return None
        uv, h = self.project(p)
        if abs(h) >= self._max_r:
            return None
        tid = self.tri.locate(uv)
        if tid is not None and self.tri.is_real(tid):
            entry = self.subfacet_of(tid)
            if entry is not None:
                _, vids, center, radius = entry
                if dist(p, center) < radius:
                    return entry
                return None
        for entry in self._subs:
            _, vids, center, radius = entry
            if dist(p, center) < radius:
                return entry
        return None


# ---------------------------------------------------------------------------
# work queue


@dataclass
class _WorkItem:
    sid: int
    l_min: float
    key: float
    token: tuple
    measures: object
    edge: tuple


class _Refiner:
    def __init__(self, plc: PLC, config: RefinementConfig, log: EventLog):
        self.plc = plc
        self.config = config
        self.log = log
        self.mesh: Mesh = bootstrap(plc)
        self.dim = plc.dim
        self.roots: list[_RootSegment] = []
        self.sheets: list[_Sheet] = []
        self.sheets_of_root: dict[int, list[int]] = {}
        self.heap: list[tuple] = []
        self.items: dict[int, _WorkItem] = {}
        self.seq = 0
        self.in_quality = False
        self.regions_valid = False
        self.n_insertions = 0
        self.dirty_roots: set[int] = set()
        self.dirty_sheets: set[int] = set()
        self._init_boundary()

    # -- feature stores ----------------------------------------------------

    def _init_boundary(self) -> None:
        mesh = self.mesh
        vid_of = mesh.input_vids
        if self.dim == 2:
            seg_list = list(self.plc.segments)
        else:
            seg_list = list(self.plc.all_segments())
        for ri, (ia, ib) in enumerate(seg_list):
            self.roots.append(_RootSegment(
                ri, self.plc.vertices[ia], self.plc.vertices[ib],
                vid_of[ia], vid_of[ib]))
        if self.dim == 3:
            edge_root = {}
            for ri, (ia, ib) in enumerate(seg_list):
                edge_root[(ia, ib)] = ri
            for fi, facet in enumerate(self.plc.facets):
                loop = list(facet.loop)
                loop_pts = [self.plc.vertices[i] for i in loop]
                sheet = _Sheet(fi, loop_pts, [vid_of[i] for i in loop])
                for i in facet.interior_points:
                    sheet.add(vid_of[i], self.plc.vertices[i])
                self.sheets.append(sheet)
                n = len(loop)
                for k in range(n):
                    e = tuple(sorted((loop[k], loop[(k + 1) % n])))
                    ri = edge_root[e]
                    self.sheets_of_root.setdefault(ri, []).append(fi)

    def _membership(self) -> dict:
        """vid -> set of feature tags the vertex lies on."""
        member: dict[int, set] = {}
        if self.dim == 2:
            for ri, root in enumerate(self.roots):
                for _, vid in root.splits:
                    member.setdefault(vid, set()).add(("segment", ri))
        else:
            for fi, sheet in enumerate(self.sheets):
                for vid in sheet.point_of:
                    member.setdefault(vid, set()).add(("facet", fi))
        return member

    def _face_features(self, face, member) -> set:
        """Feature tags whose surface carries this mesh face.

        A 2D edge lies on a segment when both endpoints do (collinear
        in-between vertices make skipping edges impossible).  A 3D triangle
        lies on a facet when all corners do and its centroid falls strictly
        inside the polygon, which tolerates cocircular diagonal ties between
        the sheet triangulation and the mesh."""
        tags = member.get(face[0])
        if not tags:
            return set()
        common = set(tags)
        for v in face[1:]:
            t = member.get(v)
            if not t:
                return set()
            common &= t
            if not common:
                return set()
        if self.dim == 2:
            return common
        out = set()
        pts = [self.mesh.point(v) for v in face]
        cx = tuple(sum(q[k] for q in pts) / 3.0 for k in range(3))
        for tag in common:
            sheet = self.sheets[tag[1]]
            uv, _ = sheet.project(cx)
            if polygon_contains(sheet.loop_uv, uv) == 1:
                out.add(tag)
        return out

    # -- region labels -----------------------------------------------------

    def _classify_regions(self) -> None:
        mesh = self.mesh
        member = self._membership()
        outside = set()
        stack = []
        for sid, vids in mesh.simplices.items():
            if any(v in mesh.scaffold_ids for v in vids):
                outside.add(sid)
                stack.append(sid)
        for hole in self.plc.holes:
            sid = locate(mesh, hole)
            if sid is not None and sid not in outside:
                outside.add(sid)
                stack.append(sid)
        while stack:
            sid = stack.pop()
            vids = mesh.simplices[sid]
            for i, nb in enumerate(mesh.neighbors[sid]):
                if nb < 0 or nb in outside:
                    continue
                face = vids[:i] + vids[i + 1:]
                if self._face_features(face, member):
                    continue
                outside.add(nb)
                stack.append(nb)
        for sid in mesh.simplices:
            mesh.region[sid] = (REGION_OUTSIDE if sid in outside
                                else REGION_INSIDE)
        self.regions_valid = True

    def _ensure_regions(self) -> None:
        if self.regions_valid:
            return
        self._classify_regions()
        if self.in_quality:
            for sid in self.mesh.domain_simplices():
                self._enqueue_sid(sid)

    # -- encroachment queries ------------------------------------------------

    def _segment_hit(self, p, ri: int):
        root = self.roots[ri]
        mid, half = root.ball()
        if dist(p, mid) >= half:
            return None
        t = root.param(p)
        i = root.locate(t)
        if i is None:
            return None
        t0, t1, va, vb = root.sub(i)
        a = root.point_at(t0)
        b = root.point_at(t1)
        if rg.encroaches(p, (a, b)):
            return ("segment", ri, i, (t1 - t0) / 2.0)
        return None

    def _feature_encroachments(self, p) -> list[tuple]:
        out = []
        for ri in range(len(self.roots)):
            hit = self._segment_hit(p, ri)
            if hit is not None:
                out.append(hit)
        for fi, sheet in enumerate(self.sheets):
            entry = sheet.encroached_subfacet(p)
            if entry is not None:
                out.append(("facet", fi, entry[0], entry[3]))
        return out

    def _mark_encroached_by(self, p) -> None:
        for kind, idx, _, _ in self._feature_encroachments(p):
            if kind == "segment":
                self.dirty_roots.add(idx)
            else:
                self.dirty_sheets.add(idx)

    def _subseg_encroacher(self, ri: int, i: int) -> int | None:
        root = self.roots[ri]
        t0, t1, va, vb = root.sub(i)
        a = root.point_at(t0)
        b = root.point_at(t1)
        mid = tuple((x + y) / 2.0 for x, y in zip(a, b))
        r = (t1 - t0) / 2.0
        for vid in self.mesh.vertices_near(mid, r * (1.0 + 1e-12)):
            if vid == va or vid == vb:
                continue
            if rg.encroaches(self.mesh.point(vid), (a, b)):
                return vid
        return None

    def _subfacet_encroacher(self, fi: int, entry) -> int | None:
        _, vids, center, radius = entry
        for vid in self.mesh.vertices_near(center, radius * (1.0 + 1e-12)):
            if vid in vids:
                continue
            if dist(self.mesh.point(vid), center) < radius:
                return vid
        return None

    # -- conformity drain ----------------------------------------------------

    def _scan_root(self, ri: int) -> bool:
        root = self.roots[ri]
        for i in range(root.nsubs()):
            if self._subseg_encroacher(ri, i) is not None:
                t0, t1, _, _ = root.sub(i)
                self._split_segment(ri, i, (t1 - t0) / 2.0 / self.config.alpha)
                return True
        return False

    def _scan_sheet(self, fi: int) -> bool:
        sheet = self.sheets[fi]
        for entry in sheet.subfacets():
            if self._subfacet_encroacher(fi, entry) is not None:
                self._split_facet(fi, entry, entry[3] / self.config.alpha)
                return True
        return False

    def _drain(self) -> None:
        while True:
            if self.dirty_roots:
                ri = min(self.dirty_roots)
                if not self._scan_root(ri):
                    self.dirty_roots.discard(ri)
                continue
            if self.dirty_sheets:
                fi = min(self.dirty_sheets)
                if not self._scan_sheet(fi):
                    self.dirty_sheets.discard(fi)
                continue
            break

    def _mark_all_dirty(self) -> None:
        self.dirty_roots.update(range(len(self.roots)))
        self.dirty_sheets.update(range(len(self.sheets)))

    # -- mutation helpers ----------------------------------------------------

    def _note_insertion(self) -> None:
        self.n_insertions += 1
        if self.n_insertions > self.config.max_insertions:
            err = InsertionCapExceeded(
                "insertion cap %d exceeded" % self.config.max_insertions)
            err.event_log = self.log
            raise err

    def _engulfed(self, removed, benign: set) -> bool:
        """True when the cavity swallowed a face of a feature other than the
        one being split; inherited region labels are then unreliable."""
        member = self._membership()
        seen: dict[tuple, int] = {}
        for _, vids in removed:
            k = len(vids)
            for i in range(k):
                face = tuple(sorted(vids[:i] + vids[i + 1:]))
                tags = self._face_features(face, member)
                if not tags or tags <= benign:
                    continue
                seen[face] = seen.get(face, 0) + 1
                if seen[face] >= 2:
                    return True
        return False

    def _delete_ball(self, center, radius: float) -> None:
        mesh = self.mesh
        while True:
            victim = None
            for vid in mesh.vertices_near(center, radius * (1.0 + 1e-12)):
                rec = mesh.verts[vid]
                if rec.provenance is not Provenance.FREE_STEINER:
                    continue
                if dist(rec.point, center) < radius:
                    victim = vid
                    break
            if victim is None:
                return
            point = mesh.point(victim)
            self.log.append(InsertionEvent(
                kind=EventKind.DELETE, point=point, vid=victim))
            res = delete_vertex(mesh, victim)
            if any(mesh.region[sid] == REGION_UNKNOWN for sid in res.created):
                self.regions_valid = False
            if self.in_quality:
                for sid in res.created:
                    self._enqueue_sid(sid)

    def _min_link_dist(self, vid: int) -> float:
        mesh = self.mesh
        best = math.inf
        p = mesh.point(vid)
        for sid in mesh.star(vid):
            for w in mesh.simplices[sid]:
                if w != vid:
                    best = min(best, dist(p, mesh.point(w)))
        return best

    def _front_endpoint(self, va: int, vb: int) -> int:
        ra = self._min_link_dist(va)
        rb = self._min_link_dist(vb)
        if ra < rb or (ra == rb and va < vb):
            return va
        return vb

    def _boundary_insert(self, point, feature, l_eff, del_center, del_radius,
                         kind, edge_vids, edge_pts, benign: set) -> int:
        self._delete_ball(del_center, del_radius)
        mesh = self.mesh
        near = mesh.nearest_vertex(point)
        min_dist = near[1] if near is not None else None
        edge_dist = min(dist(point, q) for q in edge_pts)
        self._note_insertion()
        res = insert_vertex(mesh, point, provenance=Provenance.BOUNDARY_STEINER,
                            feature=feature)
        if self._engulfed(res.removed, benign):
            self.regions_valid = False
        self.log.append(InsertionEvent(
            kind=kind, point=tuple(point), vid=res.vid, driving_l_min=l_eff,
            key=l_eff, min_dist=min_dist, edge_dist=edge_dist,
            edge=tuple(sorted(edge_vids)), feature=feature))
        if self.in_quality:
            for sid in res.created:
                self._enqueue_sid(sid)
        return res.vid

    def _split_segment(self, ri: int, i: int, l_eff: float) -> None:
        root = self.roots[ri]
        t0, t1, va, vb = root.sub(i)
        half = (t1 - t0) / 2.0
        if self.config.classic_boundary:
            d = half
            tm = (t0 + t1) / 2.0
            kind = EventKind.BOUNDARY_MIDPOINT
        else:
            v = self._front_endpoint(va, vb)
            d = min(self.config.gamma_eff * l_eff, half)
            tm = (t0 + d) if v == va else (t1 - d)
            kind = EventKind.BOUNDARY_FRONT
        m = root.point_at(tm)
        a = root.point_at(t0)
        b = root.point_at(t1)
        if self.dim == 2:
            benign = {("segment", ri)}
        else:
            benign = {("facet", fi) for fi in self.sheets_of_root.get(ri, ())}
        vid = self._boundary_insert(
            m, ("segment", ri), l_eff, m, d, kind, (va, vb), (a, b), benign)
        root.insert(tm, vid)
        self.dirty_roots.add(ri)
        for fi in self.sheets_of_root.get(ri, ()):
            self.sheets[fi].add(vid, m)
            self.dirty_sheets.add(fi)
        self._mark_encroached_by(m)

    def _crossed_boundary_sub(self, sheet: _Sheet, uv_from, uv_to):
        """First polygon-boundary subsegment crossed walking uv_from -> uv_to,
        as a (root index, sub index) pair."""
        fx, fy = uv_from
        tx, ty = uv_to
        best = None
        for ri in self._sheet_roots(sheet.index):
            root = self.roots[ri]
            a3 = root.point_at(0.0)
            b3 = root.point_at(root.length)
            (ax, ay), _ = sheet.project(a3)
            (bx, by), _ = sheet.project(b3)
            d = ((tx - fx) * (by - ay) - (ty - fy) * (bx - ax))
            if d == 0.0:
                continue
            s = ((ax - fx) * (by - ay) - (ay - fy) * (bx - ax)) / d
            r = ((ax - fx) * (ty - fy) - (ay - fy) * (tx - fx)) / -d
            if not (0.0 < s <= 1.0 and 0.0 <= r <= 1.0):
                continue
            t_hit = r * root.length
            i = root.locate(t_hit)
            if i is None:
                i = min(max(0, root.nsubs() - 1),
                        max(0, len([1 for q, _ in root.splits[1:-1]
                                    if q < t_hit])))
            if best is None or s < best[0]:
                best = (s, ri, i)
        if best is None:
            raise GeometryError("no boundary subsegment crossed")
        return best[1], best[2]

    def _sheet_roots(self, fi: int) -> list[int]:
        return sorted(ri for ri, fis in self.sheets_of_root.items()
                      if fi in fis)

    def _split_facet(self, fi: int, entry, l_eff: float) -> None:
        sheet = self.sheets[fi]
        _, vids, center, radius = entry
        uv_c, _ = sheet.project(center)
        if polygon_contains(sheet.loop_uv, uv_c) != 1:
            for kind, ri, i, l_mid in self._feature_encroachments(center):
                if kind == "segment" and ri in self._sheet_roots(fi):
                    self._split_segment(ri, i, min(l_eff, l_mid / self.config.alpha))
                    return
            pts = [sheet.point_of[v] for v in vids]
            cx = tuple(sum(q[k] for q in pts) / 3.0 for k in range(3))
            uv_cx, _ = sheet.project(cx)
            ri, i = self._crossed_boundary_sub(sheet, uv_cx, uv_c)
            root = self.roots[ri]
            t0, t1, _, _ = root.sub(i)
            self._split_facet_seg_guard(ri, i, min(l_eff, (t1 - t0) / 2.0 / self.config.alpha))
            return
        if self.config.classic_boundary:
            m = center
            d = radius
            kind = EventKind.BOUNDARY_MIDPOINT
        else:
            order = sorted(vids, key=lambda v: (self._min_link_dist(v), v))
            v = order[0]
            pv = np.asarray(sheet.point_of[v], dtype=float)
            cc = np.asarray(center, dtype=float)
            reach = float(np.linalg.norm(cc - pv))
            d = min(self.config.gamma_eff * l_eff, reach)
            m = tuple(float(x) for x in pv + (cc - pv) * (d / reach))
            uv_m, _ = sheet.project(m)
            kind = EventKind.BOUNDARY_FRONT
            if polygon_contains(sheet.loop_uv, uv_m) != 1:
                m = center
                d = radius
                kind = EventKind.BOUNDARY_MIDPOINT
        pts = [sheet.point_of[w] for w in vids]
        vid = self._boundary_insert(
            m, ("facet", fi), l_eff, m, d, kind, vids, pts,
            {("facet", fi)})
        sheet.add(vid, m)
        self.dirty_sheets.add(fi)
        self._mark_encroached_by(m)

    def _split_facet_seg_guard(self, ri: int, i: int, l_eff: float) -> None:
        self._split_segment(ri, i, l_eff)

    # -- quality queue -------------------------------------------------------

    def _enqueue_sid(self, sid: int) -> None:
        mesh = self.mesh
        if sid not in mesh.simplices:
            return
        if mesh.region.get(sid) != REGION_INSIDE:
            return
        vids = mesh.simplices[sid]
        try:
            m = measure(mesh.points_of(sid))
        except GeometryError:
            return
        if classify_measures(m, self.config) is ElementClass.GOOD:
            return
        l_mids = [hit[3] for hit in self._feature_encroachments(m.circumcenter)]
        key = queue_key(m.shortest_edge, self.config.alpha, l_mids)
        i, j = m.shortest_pair
        edge = tuple(sorted((vids[i], vids[j])))
        if self.config.ordering is Ordering.SHORTEST_FIRST:
            token = (key, sid)
        else:
            token = (float(self.seq), sid)
            self.seq += 1
        self.items[sid] = _WorkItem(sid=sid, l_min=m.shortest_edge, key=key,
                                    token=token, measures=m, edge=edge)
        heapq.heappush(self.heap, token)

    def _pop(self) -> _WorkItem | None:
        mesh = self.mesh
        while self.heap:
            token = heapq.heappop(self.heap)
            sid = token[1]
            item = self.items.get(sid)
            if item is None or item.token != token:
                continue
            if sid not in mesh.simplices:
                del self.items[sid]
                continue
            self._ensure_regions()
            if mesh.region.get(sid) != REGION_INSIDE:
                del self.items[sid]
                continue
            del self.items[sid]
            return item
        return None

    # -- Steiner placement ---------------------------------------------------

    def _build_problem(self, item: _WorkItem, co=()):
        """Placement problem for one poor element, plus event descriptors."""
        cfg = self.config
        mesh = self.mesh
        pts = mesh.points_of(item.sid)
        m = item.measures
        pick = rg.picking_region(pts, cfg, measures=m)
        spindle = False
        if self.dim == 2:
            i, j = m.shortest_pair
            k = 3 - i - j
            cap = rg.petal((pts[i], pts[j]), cfg.rho_star, pts[k])
            desc = ("picking", "petal")
        else:
            fpos = smallest_facet(pts)
            fourth = ({0, 1, 2, 3} - set(fpos)).pop()
            fpts = [pts[q] for q in fpos]
            cap = rg.snow_globe(fpts, pts[fourth], cfg.rho_star)
            if cap is None:
                cap = rg.spindle_torus(fpts, m.rho)
                spindle = True
                desc = ("picking", "spindle")
            else:
                desc = ("picking", "globe")
        feasible = rg.Region((pick, cap))
        if self.dim == 3:
            avoid = tuple(rg.enumerate_forbidden(
                mesh, feasible, cfg, m.shortest_edge, m.circumradius))
        else:
            avoid = ()
        center, reach = feasible.bounding_sphere()
        near = mesh.nearest_vertex(center)
        d_near = near[1] if near is not None else 0.0
        ids = mesh.vertices_near(center, d_near + 2.0 * reach + 1e-12)
        sites = tuple(mesh.point(v) for v in ids)
        weighted = (cfg.placement is PlacementMode.ANGLE and bool(avoid))
        if weighted:
            planes = tuple(((fr.circumcenter, fr.normal), fr.area)
                           for fr in avoid)
            prob = op.PlacementProblem(
                sites=sites, feasible=feasible, avoid=avoid,
                objective=op.Objective.WEIGHTED_PLANE_DISTANCE,
                weight_planes=planes, co_sites=tuple(co))
        else:
            prob = op.PlacementProblem(sites=sites, feasible=feasible,
                                       avoid=avoid, co_sites=tuple(co))
        return prob, desc, spindle, weighted

    def _solve_item(self, item: _WorkItem, co=()):
        prob, desc, spindle, weighted = self._build_problem(item, co)
        cand = op.solve_weighted(prob) if weighted else op.solve(prob)
        return cand, prob, desc, spindle

    def _insert_free(self, point, item: _WorkItem, desc, fallback: bool,
                     spindle: bool) -> None:
        mesh = self.mesh
        if fallback:
            kind = EventKind.FALLBACK_SLIVER
            desc = desc + ("fallback",)
        elif spindle:
            kind = EventKind.SPINDLE
        else:
            kind = EventKind.STEINER
        near = mesh.nearest_vertex(point)
        min_dist = near[1] if near is not None else None
        edge_pts = [mesh.point(v) for v in item.edge]
        edge_dist = min(dist(point, q) for q in edge_pts)
        self._note_insertion()
        res = insert_vertex(mesh, point, provenance=Provenance.FREE_STEINER)
        if self._engulfed(res.removed, set()):
            self.regions_valid = False
        self.log.append(InsertionEvent(
            kind=kind, point=tuple(point), vid=res.vid,
            driving_l_min=item.l_min, key=item.key, min_dist=min_dist,
            edge_dist=edge_dist, edge=item.edge, regions=desc))
        for sid in res.created:
            self._enqueue_sid(sid)

    def _insert_circumcenter(self, item: _WorkItem) -> None:
        point = item.measures.circumcenter
        enc = self._feature_encroachments(point)
        if enc:
            self._divert_to_boundary(item, enc)
            return
        self._insert_free(point, item, ("circumcenter",), False, False)

    def _divert_to_boundary(self, item: _WorkItem, enc) -> None:
        l_eff = min([item.l_min]
                    + [l_mid / self.config.alpha for _, _, _, l_mid in enc])
        self._handle_entry(enc[0], l_eff)
        self._drain()
        if item.sid in self.mesh.simplices:
            self._enqueue_sid(item.sid)

    def _handle_entry(self, entry, l_eff: float) -> None:
        kind, idx, sub, _ = entry
        if kind == "segment":
            root = self.roots[idx]
            if sub >= root.nsubs():
                sub = root.nsubs() - 1
            self._split_segment(idx, sub, l_eff)
        else:
            sheet = self.sheets[idx]
            entry2 = sheet.subfacet_of(sub)
            if entry2 is None:
                subs = sheet.subfacets()
                if not subs:
                    return
                entry2 = subs[0]
            self._split_facet(idx, entry2, l_eff)

    def process_single(self, item: _WorkItem) -> None:
        cfg = self.config
        if cfg.placement is PlacementMode.CIRCUMCENTER:
            self._insert_circumcenter(item)
            return
        try:
            cand, prob, desc, spindle = self._solve_item(item)
        except FeasibleRegionEmpty:
            self._insert_circumcenter(item)
            return
        enc = self._feature_encroachments(cand.point)
        if enc:
            self._divert_to_boundary(item, enc)
            return
        self._insert_free(cand.point, item, desc, cand.fallback, spindle)

    # -- multi-vertex rounds ---------------------------------------------------

    def multi_insert_round(self, round_idx: int) -> bool:
        cfg = self.config
        batch: list[dict] = []
        deferred: list[_WorkItem] = []
        seq: list[float] = []
        while len(batch) < cfg.multi_batch:
            item = self._pop()
            if item is None:
                break
            co = tuple(e["cand"].point for e in batch)
            try:
                cand, prob, desc, spindle = self._solve_item(item, co)
            except FeasibleRegionEmpty:
                deferred.append(item)
                continue
            if batch and cand.value < cfg.alpha * item.l_min:
                self.items[item.sid] = item
                heapq.heappush(self.heap, item.token)
                break
            batch.append({"cand": cand, "prob": prob, "item": item,
                          "desc": desc, "spindle": spindle})
            pairs = [(e["cand"], e["prob"]) for e in batch]
            moved = op.relocate_round(pairs)
            for e, c in zip(batch, moved):
                e["cand"] = c
            seq.append(min(c.value for c in moved))
        if seq:
            self.log.rounds.append(
                {"round": round_idx, "min_sequence": seq})
        progressed = False
        handled = False
        for e in batch:
            cand = e["cand"]
            item = e["item"]
            enc = self._feature_encroachments(cand.point)
            if enc and not handled:
                l_eff = min([item.l_min]
                            + [l / self.config.alpha for _, _, _, l in enc])
                self._handle_entry(enc[0], l_eff)
                self._drain()
                handled = True
                progressed = True
                if item.sid in self.mesh.simplices:
                    self._enqueue_sid(item.sid)
                continue
            if enc:
                cand2 = self._reroute(e, enc)
                if cand2 is None:
                    if item.sid in self.mesh.simplices:
                        self._enqueue_sid(item.sid)
                    continue
                cand = cand2
            self._insert_free(cand.point, item, e["desc"], cand.fallback,
                              e["spindle"])
            progressed = True
        for item in deferred:
            if item.sid in self.mesh.simplices:
                self.process_single(item)
                progressed = True
        return progressed or bool(batch)

    def _reroute(self, e, enc):
        """Re-solve one batch candidate with explicit non-encroachment
        constraints; None when no safe position exists."""
        prob = e["prob"]
        extra = []
        for kind, idx, sub, _ in enc:
            if kind == "segment":
                root = self.roots[idx]
                if sub >= root.nsubs():
                    continue
                t0, t1, _, _ = root.sub(sub)
                c = root.point_at((t0 + t1) / 2.0)
                extra.append(rg.OutsideSphere(c, (t1 - t0) / 2.0))
            else:
                entry = self.sheets[idx].subfacet_of(sub)
                if entry is not None:
                    extra.append(rg.OutsideSphere(entry[2], entry[3]))
        if not extra:
            return None
        feasible = rg.Region(tuple(prob.feasible.constraints) + tuple(extra))
        prob2 = op.PlacementProblem(
            sites=prob.sites, feasible=feasible, avoid=prob.avoid,
            objective=prob.objective, weight_planes=prob.weight_planes,
            co_sites=prob.co_sites)
        try:
            cand = (op.solve_weighted(prob2)
                    if prob.objective is op.Objective.WEIGHTED_PLANE_DISTANCE
                    else op.solve(prob2))
        except FeasibleRegionEmpty:
            return None
        if self._feature_encroachments(cand.point):
            return None
        return cand

    # -- driver ----------------------------------------------------------------

    def _min_domain_edge(self) -> float | None:
        mesh = self.mesh
        best = math.inf
        seen = set()
        for vids in mesh.simplices.values():
            k = len(vids)
            for i in range(k):
                for j in range(i + 1, k):
                    a, b = vids[i], vids[j]
                    if a in mesh.scaffold_ids or b in mesh.scaffold_ids:
                        continue
                    e = (a, b) if a < b else (b, a)
                    if e in seen:
                        continue
                    seen.add(e)
                    best = min(best, dist(mesh.point(a), mesh.point(b)))
        return best if math.isfinite(best) else None

    def _seed(self) -> None:
        for sid in self.mesh.domain_simplices():
            self._enqueue_sid(sid)

    def _final_dirt(self) -> bool:
        before = len(self.log.events)
        self._mark_all_dirty()
        self._drain()
        return len(self.log.events) != before

    def execute(self) -> None:
        self.in_quality = False
        self._mark_all_dirty()
        self._drain()
        self.log.l0 = self._min_domain_edge()
        self._classify_regions()
        self.in_quality = True
        self._seed()
        round_idx = 0
        while True:
            self._drain()
            self._ensure_regions()
            if self.config.insertion is InsertionMode.MULTI:
                if not self.heap:
                    if self._final_dirt():
                        continue
                    break
                if not self.multi_insert_round(round_idx):
                    if self._final_dirt():
                        continue
                    break
                round_idx += 1
            else:
                item = self._pop()
                if item is None:
                    if self._final_dirt():
                        continue
                    break
                self.process_single(item)
        self._classify_regions()


# ---------------------------------------------------------------------------
# input preprocessing


class _PrePoint:
    """PLC-level feature stores used before any mesh exists.  Vertex ids are
    indices into the growing vertex list."""


def _preprocess(plc: PLC, config: RefinementConfig):
    from .analysis import local_feature_size

    dim = plc.dim
    verts: list[tuple] = [tuple(map(float, p)) for p in plc.vertices]
    if dim == 2:
        seg_list = list(plc.segments)
    else:
        seg_list = list(plc.all_segments())
    roots = [_RootSegment(ri, verts[ia], verts[ib], ia, ib)
             for ri, (ia, ib) in enumerate(seg_list)]
    sheets: list[_Sheet] = []
    sheets_of_root: dict[int, list[int]] = {}
    facet_interior: list[list[int]] = []
    if dim == 3:
        edge_root = {tuple(sorted(e)): ri for ri, e in enumerate(seg_list)}
        for fi, facet in enumerate(plc.facets):
            loop = list(facet.loop)
            sheet = _Sheet(fi, [verts[i] for i in loop], loop)
            for i in facet.interior_points:
                sheet.add(i, verts[i])
            sheets.append(sheet)
            facet_interior.append(list(facet.interior_points))
            n = len(loop)
            for k in range(n):
                e = tuple(sorted((loop[k], loop[(k + 1) % n])))
                sheets_of_root.setdefault(edge_root[e], []).append(fi)

    records: list[dict] = []
    lfs_of = {i: local_feature_size(plc, verts[i]) for i in range(len(verts))}

    def vertex_on_root(vi: int, root: _RootSegment) -> bool:
        return any(v == vi for _, v in root.splits)

    def vertex_on_sheet(vi: int, sheet: _Sheet) -> bool:
        return vi in sheet.tri.local_of

    def other_feature_clash(point, skip_root: int | None,
                            skip_sheets: tuple) -> bool:
        for rj, root in enumerate(roots):
            if rj == skip_root:
                continue
            mid, half = root.ball()
            if dist(point, mid) >= half:
                continue
            t = root.param(point)
            i = root.locate(t)
            if i is None:
                continue
            t0, t1, _, _ = root.sub(i)
            if rg.encroaches(point, (root.point_at(t0), root.point_at(t1))):
                return True
        for fj, sheet in enumerate(sheets):
            if fj in skip_sheets:
                continue
            if sheet.encroached_subfacet(point) is not None:
                return True
        return False

    def add_vertex(point, ri: int | None, fi: int | None) -> int:
        vi = len(verts)
        verts.append(tuple(map(float, point)))
        lfs_of[vi] = local_feature_size(plc, verts[vi])
        if ri is not None:
            root = roots[ri]
            root.insert(root.param(point), vi)
            for fj in sheets_of_root.get(ri, ()):
                sheets[fj].add(vi, verts[vi])
        if fi is not None:
            sheets[fi].add(vi, verts[vi])
            facet_interior[fi].append(vi)
        return vi

    def min_dist_to_verts(point) -> float:
        return min(dist(point, q) for q in verts)

    def fix_segment(vi: int, ri: int, i: int) -> None:
        root = roots[ri]
        p = verts[vi]
        t0, t1, va, vb = root.sub(i)
        t = root.param(p)
        pm = dist(p, root.point_at(t))
        d0 = t - t0
        d1 = t1 - t
        near = min(d0, d1)
        adjacent = sheets_of_root.get(ri, ())
        kind = "projection"
        am = near
        tm = t

        def safe_for_p(tc: float) -> bool:
            a = root.point_at(t0)
            b = root.point_at(t1)
            mpt = root.point_at(tc)
            return (not rg.encroaches(p, (a, mpt))
                    and not rg.encroaches(p, (mpt, b)))

        if near < pm:
            kind = "slide"
            anchor, sgn = (t0, 1.0) if d0 <= d1 else (t1, -1.0)
            lo = pm
            hi = min(2.0 * pm, (t1 - t0) * (1.0 - 1e-9))
            best = None
            if hi >= lo:
                for s in np.linspace(lo, hi, 33):
                    tc = anchor + sgn * float(s)
                    if not (t0 < tc < t1):
                        continue
                    if not safe_for_p(tc):
                        continue
                    score = min_dist_to_verts(root.point_at(tc))
                    cand = (-score, tc)
                    if best is None or cand < best:
                        best = cand
                        am = float(s)
                        tm = tc
            if best is None:
                kind = "case_c"

        mpt = root.point_at(tm)
        if kind != "case_c" and other_feature_clash(mpt, ri, tuple(adjacent)):
            kind = "case_c"
        if kind == "case_c":
            cands = list(np.linspace(t0 + (t1 - t0) * 1e-6,
                                     t1 - (t1 - t0) * 1e-6, 65))
            cands.append(t)
            best = None
            for tc in cands:
                if not (t0 < tc < t1) or not safe_for_p(tc):
                    continue
                q = root.point_at(tc)
                clash = other_feature_clash(q, ri, tuple(adjacent))
                score = min_dist_to_verts(q)
                cand = (clash, -score, tc)
                if best is None or cand < best:
                    best = cand
                    tm = tc
            if best is None:
                raise GeometryError(
                    "no admissible split while protecting vertex %d" % vi)
            mpt = root.point_at(tm)
            am = min(tm - t0, t1 - tm)
        add_vertex(mpt, ri, None)
        records.append({"kind": kind, "vertex": vi,
                        "feature": ["segment", ri], "pm": pm, "am": am,
                        "point": list(mpt)})

    def fix_facet(vi: int, fi: int, entry) -> None:
        sheet = sheets[fi]
        p = verts[vi]
        uv, h = sheet.project(p)
        pm = abs(h)
        kind = "projection"
        target_uv = uv
        best_vid = None
        best_d = math.inf
        for w, li in sorted(sheet.tri.local_of.items()):
            quv = sheet.tri.pts[li]
            dd = math.hypot(uv[0] - quv[0], uv[1] - quv[1])
            if dd < best_d:
                best_d = dd
                best_vid = w
        am = best_d
        if best_d < pm and best_vid is not None:
            kind = "slide"
            auv = sheet.tri.pts[sheet.tri.local_of[best_vid]]
            dx = uv[0] - auv[0]
            dy = uv[1] - auv[1]
            nrm = math.hypot(dx, dy)
            if nrm == 0.0:
                kind = "case_c"
            else:
                dx /= nrm
                dy /= nrm
                best = None
                for s in np.linspace(pm, 2.0 * pm * (1.0 - 1e-9), 33):
                    quv = (auv[0] + dx * float(s), auv[1] + dy * float(s))
                    if polygon_contains(sheet.loop_uv, quv) != 1:
                        continue
                    q3 = lift_from_frame(quv, sheet.frame)
                    score = min_dist_to_verts(q3)
                    cand = (-score, float(s))
                    if best is None or cand < best:
                        best = cand
                        target_uv = quv
                        am = float(s)
                if best is None:
                    kind = "case_c"
        if kind != "case_c" and polygon_contains(sheet.loop_uv,
                                                 target_uv) != 1:
            kind = "case_c"
        if kind != "case_c":
            q3 = lift_from_frame(target_uv, sheet.frame)
            if other_feature_clash(q3, None, (fi,)):
                kind = "case_c"
        if kind == "case_c":
            _, vids, _, _ = entry
            uvs = [sheet.tri.pts[sheet.tri.local_of[w]] for w in vids]
            best = None
            ws = [(1 / 3, 1 / 3, 1 / 3), (0.5, 0.25, 0.25), (0.25, 0.5, 0.25),
                  (0.25, 0.25, 0.5), (0.6, 0.2, 0.2), (0.2, 0.6, 0.2),
                  (0.2, 0.2, 0.6), (0.45, 0.45, 0.1), (0.45, 0.1, 0.45),
                  (0.1, 0.45, 0.45)]
            for w in ws:
                quv = (sum(c * q[0] for c, q in zip(w, uvs)),
                       sum(c * q[1] for c, q in zip(w, uvs)))
                if polygon_contains(sheet.loop_uv, quv) != 1:
                    continue
                q3 = lift_from_frame(quv, sheet.frame)
                clash = other_feature_clash(q3, None, (fi,))
                score = min_dist_to_verts(q3)
                cand = (clash, -score, quv)
                if best is None or cand < best:
                    best = cand
                    target_uv = quv
            if best is None:
                raise GeometryError(
                    "no admissible facet point while protecting vertex %d"
                    % vi)
            am = min(math.hypot(target_uv[0] - q[0], target_uv[1] - q[1])
                     for q in uvs)
        q3 = lift_from_frame(target_uv, sheet.frame)
        add_vertex(q3, None, fi)
        records.append({"kind": kind, "vertex": vi, "feature": ["facet", fi],
                        "pm": pm, "am": am, "point": list(q3)})

    def fix_vertex(vi: int) -> bool:
        acted = False
        p = verts[vi]
        for ri, root in enumerate(roots):
            if vertex_on_root(vi, root):
                continue
            mid, half = root.ball()
            if dist(p, mid) >= half:
                continue
            t = root.param(p)
            i = root.locate(t)
            if i is None:
                continue
            t0, t1, _, _ = root.sub(i)
            if not rg.encroaches(p, (root.point_at(t0), root.point_at(t1))):
                continue
            fix_segment(vi, ri, i)
            acted = True
        for fi, sheet in enumerate(sheets):
            if vertex_on_sheet(vi, sheet):
                continue
            entry = sheet.encroached_subfacet(p)
            if entry is None:
                continue
            fix_facet(vi, fi, entry)
            acted = True
        return acted

    passes = 0
    while True:
        passes += 1
        if passes > 200:
            raise GeometryError("input preprocessing did not settle")
        order = sorted(range(len(verts)), key=lambda v: (lfs_of[v], v))
        acted = False
        for vi in order:
            acted |= fix_vertex(vi)
        if not acted:
            break

    if dim == 2:
        segments2 = []
        for root in roots:
            for i in range(root.nsubs()):
                _, _, va, vb = root.sub(i)
                segments2.append((va, vb))
        plc2 = PLC(dim=2, vertices=tuple(verts), segments=tuple(segments2),
                   facets=(), holes=plc.holes)
    else:
        explicit = {tuple(sorted(s)) for s in plc.segments}
        segments2 = []
        for ri, (ia, ib) in enumerate(seg_list):
            if tuple(sorted((ia, ib))) not in explicit:
                continue
            root = roots[ri]
            for i in range(root.nsubs()):
                _, _, va, vb = root.sub(i)
                segments2.append((va, vb))
        edge_root = {tuple(sorted(e)): ri for ri, e in enumerate(seg_list)}
        facets2 = []
        for fi, facet in enumerate(plc.facets):
            loop = list(facet.loop)
            new_loop = []
            n = len(loop)
            for k in range(n):
                a, b = loop[k], loop[(k + 1) % n]
                new_loop.append(a)
                root = roots[edge_root[tuple(sorted((a, b)))]]
                inner = [(t, v) for t, v in root.splits[1:-1]]
                if root.splits[0][1] == a:
                    inner.sort(key=lambda q: q[0])
                else:
                    inner.sort(key=lambda q: -q[0])
                new_loop.extend(v for _, v in inner)
            facets2.append(Facet(loop=tuple(new_loop),
                                 interior_points=tuple(facet_interior[fi])))
        plc2 = PLC(dim=3, vertices=tuple(verts), segments=tuple(segments2),
                   facets=tuple(facets2), holes=plc.holes)
    plc2.validate()
    return plc2, records


def preprocess_plc(plc: PLC, config: RefinementConfig) -> PLC:
    """Split boundary features so no input vertex sits strictly inside a
    feature diametral ball."""
    plc.validate()
    config.validate()
    return _preprocess(plc, config)[0]


# ---------------------------------------------------------------------------
# public drivers


def refine(plc: PLC, config: RefinementConfig | None = None):
    """Refine a PLC to the configured quality bounds.

    Returns (mesh, event log).  Raises InsertionCapExceeded (with the partial
    event log attached) when the insertion budget runs out.
    """
    if config is None:
        config = RefinementConfig.defaults_for(plc.dim)
    config.validate()
    plc.validate()
    records: list = []
    work = plc
    if config.preprocess:
        work, records = _preprocess(plc, config)
    log = EventLog(dim=plc.dim, config=_config_echo(config),
                   preprocess=records)
    run = _Refiner(work, config, log)
    run.execute()
    return run.mesh, log


def replay(plc: PLC, config: RefinementConfig, log: EventLog) -> Mesh:
    """Rebuild the refined mesh by applying a recorded event sequence."""
    config.validate()
    plc.validate()
    work = plc
    if config.preprocess:
        work = _preprocess(plc, config)[0]
    mesh = bootstrap(work)
    for ev in log.events:
        if ev.kind is EventKind.DELETE:
            delete_vertex(mesh, ev.vid)
            continue
        if ev.kind in (EventKind.BOUNDARY_MIDPOINT, EventKind.BOUNDARY_FRONT):
            prov = Provenance.BOUNDARY_STEINER
            feature = ev.feature
        else:
            prov = Provenance.FREE_STEINER
            feature = None
        res = insert_vertex(mesh, ev.point, provenance=prov, feature=feature)
        if res.vid != ev.vid:
            raise GeometryError("replay diverged: vid %d became %d"
                                % (ev.vid, res.vid))
    return mesh
