"""Mesh and event-log audits.

local_feature_size() measures distance to the second-nearest pairwise
nonincident input feature.  The audit entry points check exact Delaunay
emptiness, boundary conformity, the advancing-front distance invariants
recorded in an event log, and size optimality against 1/(alpha-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .plc import PLC, polygon_contains, project_to_frame, facet_frame
from .predicates import Sign, dist, in_circumsphere
from .quality import ElementClass, RefinementConfig, classify_measures, measure
from .refiner import EventKind, EventLog, refine, _preprocess, _Sheet
from .triangulation import Mesh, Provenance

__all__ = [
    "local_feature_size", "lipschitz_check", "verify_delaunay",
    "conformity_audit", "quality_summary", "front_audit",
    "size_optimality_audit", "baseline_circumcenter_refine",
    "charged_insertion_counts", "AuditReport", "full_audit",
]


# ---------------------------------------------------------------------------
# local feature size


class _LfsEvaluator:
    """Distances from a query point to every input feature, with feature
    incidence given by shared input vertices."""

    def __init__(self, plc: PLC):
        self.plc = plc
        self.verts = np.asarray(plc.vertices, dtype=float)
        self.vsets: list[frozenset] = []
        self.kind: list[str] = []
        self.seg_a: list[int] = []
        self.seg_b: list[int] = []
        for i in range(len(plc.vertices)):
            self.vsets.append(frozenset((i,)))
            self.kind.append("v")
        segs = plc.segments if plc.dim == 2 else plc.all_segments()
        for ia, ib in segs:
            self.vsets.append(frozenset((ia, ib)))
            self.kind.append("s")
            self.seg_a.append(ia)
            self.seg_b.append(ib)
        self.facet_data = []
        for facet in plc.facets:
            loop = list(facet.loop)
            pts = [plc.vertices[i] for i in loop]
            frame = facet_frame(pts)
            uv = [tuple(q) for q in project_to_frame(pts, frame)]
            self.vsets.append(frozenset(loop) | frozenset(facet.interior_points))
            self.kind.append("f")
            self.facet_data.append((frame, uv, pts))
        self.n = len(self.vsets)

    def distances(self, x) -> np.ndarray:
        q = np.asarray(x, dtype=float)
        out = np.empty(self.n)
        k = 0
        nv = len(self.verts)
        out[:nv] = np.linalg.norm(self.verts - q, axis=1)
        k = nv
        if self.seg_a:
            a = self.verts[self.seg_a]
            b = self.verts[self.seg_b]
            ab = b - a
            ln2 = np.einsum("ij,ij->i", ab, ab)
            t = np.clip(np.einsum("ij,ij->i", q - a, ab) / ln2, 0.0, 1.0)
            proj = a + t[:, None] * ab
            out[k:k + len(self.seg_a)] = np.linalg.norm(proj - q, axis=1)
            k += len(self.seg_a)
        for frame, uv, pts in self.facet_data:
            origin, axes, normal = frame
            rel = q - np.asarray(origin)
            h = float(np.dot(rel, np.asarray(normal)))
            pu = (float(np.dot(rel, np.asarray(axes[0]))),
                  float(np.dot(rel, np.asarray(axes[1]))))
            if polygon_contains(uv, pu) >= 0:
                out[k] = abs(h)
            else:
                best = math.inf
                m = len(pts)
                for i in range(m):
                    a = np.asarray(pts[i], dtype=float)
                    b = np.asarray(pts[(i + 1) % m], dtype=float)
                    ab = b - a
                    t = float(np.clip(np.dot(q - a, ab) / np.dot(ab, ab),
                                      0.0, 1.0))
                    best = min(best, float(np.linalg.norm(a + t * ab - q)))
                out[k] = best
            k += 1
        return out

    def lfs(self, x) -> float:
        d = self.distances(x)
        order = np.argsort(d, kind="stable")
        seen: list[int] = []
        for gi in order:
            gset = self.vsets[gi]
            for fi in seen:
                if not (self.vsets[fi] & gset):
                    return float(d[gi])
            seen.append(int(gi))
        raise ValidationError("input has no pair of nonincident features")


_EVAL_CACHE: dict[int, tuple] = {}


def _evaluator(plc: PLC) -> _LfsEvaluator:
    key = id(plc)
    hit = _EVAL_CACHE.get(key)
    if hit is not None and hit[0] is plc:
        return hit[1]
    ev = _LfsEvaluator(plc)
    if len(_EVAL_CACHE) > 32:
        _EVAL_CACHE.clear()
    _EVAL_CACHE[key] = (plc, ev)
    return ev


def local_feature_size(plc: PLC, x) -> float:
    """Radius of the smallest ball around x meeting two nonincident input
    features (features are incident when they share an input vertex)."""
    return _evaluator(plc).lfs(x)


def lipschitz_check(plc: PLC, sample_pairs) -> list:
    """Pairs violating |lfs(x) - lfs(y)| <= |x - y|, with absolute slack
    1e-9 * scale."""
    ev = _evaluator(plc)
    slack = 1e-9 * plc.scale()
    bad = []
    for x, y in sample_pairs:
        lx = ev.lfs(x)
        ly = ev.lfs(y)
        if abs(lx - ly) > dist(x, y) + slack:
            bad.append((tuple(x), tuple(y), lx, ly))
    return bad


# ---------------------------------------------------------------------------
# mesh checks


def verify_delaunay(mesh: Mesh) -> list:
    """(sid, vid) pairs where a vertex sits strictly inside a simplex's
    circumball, by exact predicate."""
    bad = []
    for sid in sorted(mesh.simplices):
        vids = mesh.simplices[sid]
        pts = mesh.points_of(sid)
        try:
            m = measure(pts) if len(pts) == mesh.dim + 1 else None
        except Exception:
            m = None
        if m is None:
            continue
        near = mesh.vertices_near(m.circumcenter,
                                  m.circumradius * (1.0 + 1e-9))
        for vid in near:
            if vid in vids:
                continue
            if in_circumsphere(pts, mesh.point(vid)) is Sign.POSITIVE:
                bad.append((sid, vid))
    return bad


def _rebuild_feature_partition(mesh: Mesh, plc: PLC):
    """Subsegments and subfacets implied by the mesh's boundary vertices.

    Returns (list of subsegment vid pairs, list of subfacet vid triples).
    plc here is the refined input (after preprocessing).
    """
    if plc.dim == 2:
        seg_list = list(plc.segments)
    else:
        seg_list = list(plc.all_segments())
    on_root: dict[int, list] = {ri: [] for ri in range(len(seg_list))}
    for vid in sorted(mesh.verts):
        rec = mesh.verts[vid]
        if rec.feature and rec.feature[0] == "segment":
            on_root[rec.feature[1]].append(vid)
    subsegs = []
    for ri, (ia, ib) in enumerate(seg_list):
        a = np.asarray(plc.vertices[ia], dtype=float)
        b = np.asarray(plc.vertices[ib], dtype=float)
        u = b - a
        ln = float(np.linalg.norm(u))
        u /= ln
        chain = [(0.0, mesh.input_vids[ia]), (ln, mesh.input_vids[ib])]
        for vid in on_root[ri]:
            t = float(np.dot(np.asarray(mesh.point(vid)) - a, u))
            chain.append((t, vid))
        chain.sort()
        for k in range(len(chain) - 1):
            subsegs.append((chain[k][1], chain[k + 1][1]))
    subfacets = []
    if plc.dim == 3:
        on_facet: dict[int, list] = {fi: [] for fi in range(len(plc.facets))}
        for vid in sorted(mesh.verts):
            rec = mesh.verts[vid]
            if rec.feature and rec.feature[0] == "facet":
                on_facet[rec.feature[1]].append(vid)
        edge_root = {tuple(sorted(e)): ri for ri, e in enumerate(seg_list)}
        for fi, facet in enumerate(plc.facets):
            loop = list(facet.loop)
            pts = [plc.vertices[i] for i in loop]
            sheet = _Sheet(fi, pts, [mesh.input_vids[i] for i in loop])
            for i in facet.interior_points:
                sheet.add(mesh.input_vids[i], plc.vertices[i])
            n = len(loop)
            split_vids = set()
            for k in range(n):
                ri = edge_root[tuple(sorted((loop[k], loop[(k + 1) % n])))]
                split_vids.update(on_root[ri])
            for vid in sorted(split_vids | set(on_facet[fi])):
                sheet.add(vid, mesh.point(vid))
            for _, vids, _, _ in sheet.subfacets():
                subfacets.append(tuple(sorted(vids)))
    return subsegs, subfacets


def conformity_audit(mesh: Mesh, plc: PLC, config: RefinementConfig) -> dict:
    """Presence and ball-emptiness of every boundary subsegment/subfacet."""
    work = plc
    if config.preprocess:
        work = _preprocess(plc, config)[0]
    subsegs, subfacets = _rebuild_feature_partition(mesh, work)
    missing_edges = []
    occupied = []
    for va, vb in subsegs:
        if not mesh.edge_exists(va, vb):
            missing_edges.append((va, vb))
        a = mesh.point(va)
        b = mesh.point(vb)
        mid = tuple((x + y) / 2.0 for x, y in zip(a, b))
        r = dist(a, b) / 2.0
        for vid in mesh.vertices_near(mid, r * (1.0 + 1e-12)):
            if vid in (va, vb):
                continue
            if dist(mesh.point(vid), mid) < r:
                occupied.append((va, vb, vid))
    missing_faces = []
    for tri in subfacets:
        if not mesh.face_exists(tri):
            missing_faces.append(tri)
    return {
        "subsegments": len(subsegs),
        "subfacets": len(subfacets),
        "missing_edges": missing_edges,
        "missing_faces": missing_faces,
        "occupied_balls": occupied,
        "ok": not (missing_edges or missing_faces or occupied),
    }


def quality_summary(mesh: Mesh, config: RefinementConfig,
                    log: EventLog | None = None) -> dict:
    """Element-quality statistics over interior simplices."""
    max_rho = 0.0
    min_angle = None
    min_dihedral = None
    slivers = []
    n = 0
    for sid in mesh.domain_simplices():
        n += 1
        m = measure(mesh.points_of(sid))
        max_rho = max(max_rho, m.rho)
        if m.min_angle_deg is not None:
            min_angle = (m.min_angle_deg if min_angle is None
                         else min(min_angle, m.min_angle_deg))
        if m.min_dihedral_deg is not None:
            min_dihedral = (m.min_dihedral_deg if min_dihedral is None
                            else min(min_dihedral, m.min_dihedral_deg))
        if classify_measures(m, config) is ElementClass.SLIVER:
            slivers.append(sid)
    fallback_vids = set()
    if log is not None:
        for e in log.events:
            if e.kind is EventKind.FALLBACK_SLIVER:
                fallback_vids.add(e.vid)
    untraceable = []
    for sid in slivers:
        if not any(v in fallback_vids for v in mesh.simplices[sid]):
            untraceable.append(sid)
    return {
        "elements": n,
        "vertices": len(mesh.verts) - len(mesh.scaffold_ids),
        "steiner": mesh.steiner_count(),
        "max_rho": max_rho,
        "min_angle_deg": min_angle,
        "min_dihedral_deg": min_dihedral,
        "slivers": len(slivers),
        "slivers_untraceable": len(untraceable),
    }


# ---------------------------------------------------------------------------
# event-log audits


def _stage_alpha(key: float | None, l0: float, alpha: float) -> int:
    """Queue stage by alpha-power buckets over the initial shortest edge."""
    if key is None or key <= 0.0 or l0 <= 0.0:
        return 0
    return max(0, 1 + int(math.floor(math.log(key / l0) / math.log(alpha))))


def _stage_beta(key: float | None, l0: float, beta: float) -> int:
    """Growth stage by beta-power buckets (stage 0 starts at l0)."""
    if key is None or key <= 0.0 or l0 <= 0.0:
        return 0
    return max(0, int(math.floor(math.log(key / l0) / math.log(beta))))


def front_audit(log: EventLog, config: RefinementConfig) -> dict:
    """Distance invariants of the advancing front.

    Asserts min-distance >= alpha * driving_l_min for free placements
    (STEINER, SPINDLE, and sliver fallbacks, all of which sit inside a
    picking ball) and the band [alpha*l, beta*l] on the distance to the
    driving shortest edge for STEINER placements.  Boundary splits and
    circumcenter placements carry no front guarantee; they are counted.
    Stage monotonicity is reported as a count, not asserted.
    """
    alpha = config.alpha
    beta = config.beta
    tol = 1e-9
    min_dist_violations = []
    band_violations = []
    circumcenter_events = 0
    boundary_events = 0
    checked = 0
    pts = []
    stages = []
    l0 = log.l0 if log.l0 else 0.0
    free_kinds = (EventKind.STEINER, EventKind.SPINDLE,
                  EventKind.FALLBACK_SLIVER)
    for idx, e in enumerate(log.events):
        if e.kind is EventKind.DELETE:
            continue
        if "circumcenter" in e.regions:
            circumcenter_events += 1
            continue
        if e.kind in (EventKind.BOUNDARY_FRONT, EventKind.BOUNDARY_MIDPOINT):
            boundary_events += 1
            pts.append(e.point)
            stages.append(_stage_alpha(e.key, l0, alpha))
            continue
        if e.kind not in free_kinds:
            continue
        l = e.driving_l_min
        if l is None or e.min_dist is None:
            continue
        checked += 1
        scale = max(l, 1.0)
        if e.min_dist < alpha * l - tol * scale:
            min_dist_violations.append((idx, e.min_dist, alpha * l))
        if e.kind is EventKind.STEINER and e.edge_dist is not None:
            if (e.edge_dist < alpha * l - tol * scale
                    or e.edge_dist > beta * l + tol * scale):
                band_violations.append((idx, e.edge_dist,
                                        alpha * l, beta * l))
        pts.append(e.point)
        stages.append(_stage_alpha(e.key, l0, alpha))
    stage_violations = 0
    stage_table: dict[int, int] = {}
    for k in stages:
        stage_table[k] = stage_table.get(k, 0) + 1
    if pts and l0 > 0.0:
        arr = np.asarray(pts, dtype=float)
        st = np.asarray(stages)
        for k in sorted(set(stages)):
            if k <= 1:
                continue
            lower = arr[st < k]
            here = arr[st == k]
            if not len(lower) or not len(here):
                continue
            need = alpha ** (k - 1) * l0 * (1.0 - 1e-9)
            for chunk in np.array_split(here, max(1, len(here) // 256)):
                d = np.linalg.norm(chunk[:, None, :] - lower[None, :, :],
                                   axis=2)
                stage_violations += int(np.count_nonzero(d.min(axis=1) < need))
    round_violations = []
    for r in log.rounds:
        seq = r.get("min_sequence", [])
        for i in range(1, len(seq)):
            if seq[i] < seq[i - 1] * (1.0 - 1e-9):
                round_violations.append((r.get("round"), i, seq[i - 1],
                                         seq[i]))
    return {
        "checked": checked,
        "circumcenter_events": circumcenter_events,
        "boundary_events": boundary_events,
        "min_dist_violations": min_dist_violations,
        "band_violations": band_violations,
        "stage_violations": stage_violations,
        "stage_table": stage_table,
        "round_violations": round_violations,
        "ok": not (min_dist_violations or band_violations
                   or round_violations),
    }


def size_optimality_audit(mesh: Mesh, plc: PLC, config: RefinementConfig,
                          log: EventLog) -> dict:
    """Spacing against local feature size.

    Reports max lfs(v)/r_v over Steiner vertices (r_v = distance to the
    nearest other final vertex) next to the reference bound 1/(alpha-1),
    and counts insertions whose lfs exceeds the staged geometric-series
    budget (beta^(n+1)-1)/(beta-1) * l0.
    """
    ev = _evaluator(plc)
    worst = 0.0
    worst_vid = None
    ratios = []
    for vid in sorted(mesh.verts):
        rec = mesh.verts[vid]
        if rec.provenance is Provenance.INPUT:
            continue
        near = mesh.nearest_vertex(rec.point, exclude=(vid,))
        if near is None or near[1] <= 0.0:
            continue
        ratio = ev.lfs(rec.point) / near[1]
        ratios.append(ratio)
        if ratio > worst:
            worst = ratio
            worst_vid = vid
    reference = 1.0 / (config.alpha - 1.0)
    stage_budget_violations = 0
    l0 = log.l0 if log.l0 else 0.0
    beta = config.beta
    if l0 > 0.0:
        for e in log.events:
            if e.kind is EventKind.DELETE or e.key is None:
                continue
            if e.driving_l_min is None:
                continue
            n = _stage_beta(e.key, l0, beta)
            budget = ((beta ** (n + 2) - 1.0) / (beta - 1.0)
                      * e.driving_l_min)
            if ev.lfs(e.point) > budget * (1.0 + 1e-9):
                stage_budget_violations += 1
    return {
        "steiner_checked": len(ratios),
        "max_lfs_ratio": worst,
        "worst_vid": worst_vid,
        "reference": reference,
        "stage_budget_violations": stage_budget_violations,
    }


def charged_insertion_counts(log: EventLog) -> dict:
    """Free insertions charged to the driving shortest edge (by vertex ids)."""
    counts: dict[tuple, int] = {}
    for e in log.events:
        if e.kind in (EventKind.STEINER, EventKind.SPINDLE,
                      EventKind.FALLBACK_SLIVER) and e.edge is not None:
            counts[e.edge] = counts.get(e.edge, 0) + 1
    return counts


def baseline_circumcenter_refine(plc: PLC, config: RefinementConfig):
    """Same queue and boundary machinery, circumcenter placement."""
    from dataclasses import replace as _replace
    from .quality import PlacementMode
    base = _replace(config, placement=PlacementMode.CIRCUMCENTER)
    return refine(plc, base)


# ---------------------------------------------------------------------------
# combined report


@dataclass
class AuditReport:
    dim: int
    quality: dict = field(default_factory=dict)
    delaunay_violations: int = 0
    conformity: dict = field(default_factory=dict)
    front: dict = field(default_factory=dict)
    size: dict = field(default_factory=dict)
    ok: bool = False

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "quality": self.quality,
            "delaunay_violations": self.delaunay_violations,
            "conformity": {k: (v if isinstance(v, (int, bool)) else
                               [list(map(int, t)) for t in v])
                           for k, v in self.conformity.items()},
            "front": {k: v for k, v in self.front.items()},
            "size": self.size,
            "ok": self.ok,
        }


def full_audit(mesh: Mesh, plc: PLC, config: RefinementConfig,
               log: EventLog) -> AuditReport:
    quality = quality_summary(mesh, config, log)
    delaunay = verify_delaunay(mesh)
    conf = conformity_audit(mesh, plc, config)
    front = front_audit(log, config)
    size = size_optimality_audit(mesh, plc, config, log)
    ok = (not delaunay and conf["ok"] and front["ok"]
          and quality["max_rho"] <= config.rho_star * (1.0 + 1e-9)
          and quality["slivers_untraceable"] == 0)
    return AuditReport(dim=mesh.dim, quality=quality,
                       delaunay_violations=len(delaunay), conformity=conf,
                       front=front, size=size, ok=ok)
