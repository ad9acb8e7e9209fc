"""Steiner vertex placement as nondifferentiable max-min optimization.

The objective (minimum distance to sites, or minimum area-weighted plane
distance) is piecewise smooth; its maximizers over a region bounded by
spheres, planes, and spindle tori lie where at most d+1 generators are
active.  Candidates are therefore enumerated combinatorially: equidistance
bisectors of site subsets intersected with constraint surfaces, stationary
points of single-site distance on surfaces and intersection curves, and
surface corner points.  Comparison picks the winner; saddles never win.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FeasibleRegionEmpty, ValidationError
from .predicates import dist
from .regions import (ForbiddenRegion, Halfspace, InsideSphere, OutsideSphere,
                      Region, Slab, SpindleTorus)

__all__ = ["Objective", "PlacementProblem", "Candidate", "solve",
           "solve_weighted", "grid_oracle", "relocate_round", "relocate",
           "active_generators"]

_TORUS_SAMPLES = 256
_REFINE_TOL = 1e-9


class Objective(str, enum.Enum):
    MIN_DISTANCE = "min-distance"
    WEIGHTED_PLANE_DISTANCE = "weighted-plane-distance"


@dataclass(frozen=True)
class PlacementProblem:
    sites: tuple = ()
    feasible: Region = None
    avoid: tuple = ()
    objective: Objective = Objective.MIN_DISTANCE
    weight_planes: tuple = ()   # ((point_on_plane, unit_normal), weight)
    co_sites: tuple = ()        # co-inserted candidates, refreshed in MULTI

    def validate(self) -> None:
        if self.feasible is None or not self.feasible.constraints:
            raise ValidationError("feasible region needs >= 1 constraint")
        if self.objective is Objective.MIN_DISTANCE:
            if not (self.sites or self.co_sites):
                raise ValidationError("min-distance placement needs sites")
        elif not self.weight_planes:
            raise ValidationError("weighted placement needs weight planes")


@dataclass(frozen=True)
class Candidate:
    point: tuple
    value: float
    active_set: tuple
    fallback: bool = False
    note: str = ""


# ---------------------------------------------------------------------------
# surfaces


@dataclass(frozen=True)
class _Sphere:
    c: tuple
    r: float
    label: str


@dataclass(frozen=True)
class _Plane:
    n: tuple       # unit normal
    d: float       # n . x = d
    label: str


@dataclass(frozen=True)
class _Torus:
    torus: SpindleTorus
    label: str


def _collect_surfaces(problem, center, radius):
    spheres, planes, tori = [], [], []
    for i, c in enumerate(problem.feasible.constraints):
        label = "feas:%d" % i
        if isinstance(c, (InsideSphere, OutsideSphere)):
            spheres.append(_Sphere(tuple(c.center), float(c.radius), label))
        elif isinstance(c, Slab):
            n = np.asarray(c.normal)
            base = float(np.dot(n, c.origin))
            planes.append(_Plane(c.normal, base + c.half_width, label + "+"))
            planes.append(_Plane(c.normal, base - c.half_width, label + "-"))
        elif isinstance(c, Halfspace):
            planes.append(_Plane(c.normal, c.offset, label))
        elif isinstance(c, SpindleTorus):
            tori.append(_Torus(c, label))
        else:
            raise ValidationError("unsupported constraint %r" % (c,))
    extents = {}
    for j, fr in enumerate(problem.avoid):
        if fr.empty:
            continue
        ec, er = fr.extent()
        if dist(ec, center) > er + radius:
            continue
        extents[j] = (np.asarray(ec, dtype=float), float(er))
        for k, surf in enumerate(fr.surfaces()):
            label = "avoid:%d:%d" % (j, k)
            if surf[0] == "sphere":
                spheres.append(_Sphere(tuple(surf[1]), float(surf[2]), label))
            else:
                n = np.asarray(surf[2])
                planes.append(_Plane(surf[2], float(np.dot(n, surf[1])), label))
    return _prune_surfaces(problem, center, radius, spheres, planes, tori,
                           extents)


def _prune_surfaces(problem, center, radius, spheres, planes, tori,
                    extents=None):
    """Drop surfaces that provably cannot generate the winning candidate.

    Any optimum lies inside every feasible bounding ball, and an avoid
    surface is only active on its region's boundary, which its extent ball
    encloses; a surface missing any of those balls is never active.  With a
    known-valid probe value, an avoid surface whose best reachable min-site
    distance stays below it can be dropped too: were it active at the
    optimum, the optimum would score worse than the probe.
    """
    cen = np.asarray(center, dtype=float)
    slack = 1e-9 * (radius + float(np.linalg.norm(cen)))
    extents = extents or {}

    # every feasible point lies inside each of these balls: the picking
    # balls directly, and for a spindle the ball enclosing its solid
    fballs = [(cen, float(radius))]
    for c in problem.feasible.constraints:
        if isinstance(c, InsideSphere):
            bc = np.asarray(c.center, dtype=float)
            if dist(bc, cen) > 1e-12 * (radius + 1.0) or \
                    abs(float(c.radius) - radius) > 1e-12 * (radius + 1.0):
                fballs.append((bc, float(c.radius)))
        elif isinstance(c, SpindleTorus):
            a, axis, _, _, l, q, rl = _torus_frame(c)
            fballs.append((a + 0.5 * l * axis, q + rl))

    dead = {j for j, (ec, er) in extents.items()
            if any(dist(ec, bc) > er + br + slack for bc, br in fballs)}

    def balls_for(label):
        if label.startswith("avoid:"):
            j = int(label.split(":")[1])
            if j in dead:
                return None
            ex = extents.get(j)
            return fballs if ex is None else fballs + [ex]
        return fballs

    def touches_ball(s):
        balls = balls_for(s.label)
        if balls is None:
            return False
        if isinstance(s, _Sphere):
            return all(abs(dist(s.c, bc) - s.r) <= br + slack
                       for bc, br in balls)
        n = np.asarray(s.n, dtype=float)
        ln = float(np.linalg.norm(n))
        if ln < 1e-30:
            return False
        return all(abs(float(np.dot(n, bc)) - s.d) / ln <= br + slack
                   for bc, br in balls)

    spheres = [s for s in spheres if touches_ball(s)]
    planes = [p for p in planes if touches_ball(p)]

    if problem.objective is Objective.MIN_DISTANCE and problem.avoid:
        S, _ = _all_sites(problem)
        probes = [cen]
        dim = len(cen)
        for c in problem.feasible.constraints:
            if isinstance(c, InsideSphere):
                probes.append(np.asarray(c.center, dtype=float))
            elif isinstance(c, SpindleTorus):
                a, axis, e1, e2, l, q, rl = _torus_frame(c)
                ph = np.linspace(0.0, 2 * math.pi, 32, endpoint=False)
                ring = (a + 0.5 * l * axis
                        + q * (np.cos(ph)[:, None] * e1[None, :]
                               + np.sin(ph)[:, None] * e2[None, :]))
                probes.extend(ring)
        # the fixed-seed scatter only raises the bound; any feasible
        # probe value is a valid one, so the winner is unaffected
        rng = np.random.default_rng(1803)
        dirs = rng.standard_normal((128, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        rr = rng.random(128) ** (1.0 / dim)
        probes.extend(cen + (rr * radius)[:, None] * dirs)
        pts = np.asarray(probes)
        ok = problem.feasible.contains_batch(pts, slack=slack)
        for fr in problem.avoid:
            ok &= ~fr.contains_batch(pts, slack=-slack)
        if ok.any():
            vals = np.linalg.norm(pts[:, None, :] - S[None, :, :],
                                  axis=2).min(axis=1)
            v_lb = float(vals[ok].max())

            def can_beat(s):
                # bound max-over-surface of the min site distance by the
                # ball enclosing the surface's part inside each feasible
                # ball (spherical cap / chord disk), keeping the tightest
                ub = math.inf
                if isinstance(s, _Sphere):
                    c = np.asarray(s.c, dtype=float)
                    for bc, br in fballs:
                        dcc = dist(c, bc)
                        t = -s.r if dcc <= 1e-30 else min(
                            (dcc * dcc + s.r * s.r
                             - (br + slack) ** 2) / (2.0 * dcc), s.r)
                        if t <= 0.0:
                            cc, cr = c, s.r
                        else:
                            cc = c + (t / dcc) * (np.asarray(bc) - c)
                            cr = math.sqrt(max(s.r * s.r - t * t, 0.0))
                        ub = min(ub, float(
                            np.linalg.norm(S - cc, axis=1).min()) + cr)
                else:
                    n = np.asarray(s.n, dtype=float)
                    n = n / np.linalg.norm(n)
                    for bc, br in fballs:
                        h = float(np.dot(n, bc)) - s.d
                        foot = np.asarray(bc, dtype=float) - h * n
                        chord = math.sqrt(max(
                            (br + slack) ** 2 - h * h, 0.0))
                        ub = min(ub, float(
                            np.linalg.norm(S - foot, axis=1).min()) + chord)
                return ub >= v_lb - slack

            spheres = [s for s in spheres
                       if not s.label.startswith("avoid:") or can_beat(s)]
            planes = [p for p in planes
                      if not p.label.startswith("avoid:") or can_beat(p)]
    return spheres, planes, tori


# ---------------------------------------------------------------------------
# batched geometric kernels


def _unit_rows(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, v / np.where(n == 0, 1.0, n), 0.0), n[..., 0]


def _line_sphere(q0, u, c, r):
    """Line points q0 + t u hitting the sphere; returns (pts, ok)."""
    w = q0 - c
    b = np.einsum("ij,ij->i", w, u)
    cc = np.einsum("ij,ij->i", w, w) - r * r
    disc = b * b - cc
    ok = disc >= 0.0
    s = np.sqrt(np.maximum(disc, 0.0))
    t1 = (-b - s)[:, None]
    t2 = (-b + s)[:, None]
    return np.concatenate([q0 + t1 * u, q0 + t2 * u]), np.concatenate([ok, ok])


def _circle_site_extremes(cc, rr, nn, s):
    """Stationary points of distance to site s on circles (cc, rr, nn)."""
    w = s - cc
    w = w - np.einsum("ij,ij->i", w, nn)[:, None] * nn
    u, ln = _unit_rows(w)
    # degenerate: site on the circle axis; any diameter works
    idx = np.argmin(np.abs(nn), axis=1)
    fb = np.zeros_like(u)
    fb[np.arange(len(fb)), idx] = 1.0
    fb = fb - np.einsum("ij,ij->i", fb, nn)[:, None] * nn
    fb, _ = _unit_rows(fb)
    u = np.where(ln[:, None] > 1e-30, u, fb)
    return np.concatenate([cc + rr[:, None] * u, cc - rr[:, None] * u])


def _sphere_plane_circle(c, r, n, d):
    """Circle cut from a sphere by row-wise planes: (center, radius, ok)."""
    h = np.einsum("ij,ij->i", c, n) - d
    cc = c - h[:, None] * n
    r2 = r * r - h * h
    ok = r2 >= 0.0
    return cc, np.sqrt(np.maximum(r2, 0.0)), ok


def _circle_planes_cut(c0, r0, n0, nb, db):
    """One circle (center c0, radius r0, axis n0) cut by row-wise planes."""
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n0)))] = 1.0
    e1 = np.cross(n0, e)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n0, e1)
    a = r0 * (nb @ e1)
    b = r0 * (nb @ e2)
    c = db - nb @ c0
    rho = np.hypot(a, b)
    ok = rho >= np.abs(c)
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.arccos(np.clip(np.where(ok, c / np.where(rho == 0, 1.0, rho),
                                           0.0), -1.0, 1.0))
    theta0 = np.arctan2(b, a)
    pts = []
    for sgn in (1.0, -1.0):
        th = theta0 + sgn * delta
        pts.append(c0 + r0 * (np.cos(th)[:, None] * e1[None, :]
                              + np.sin(th)[:, None] * e2[None, :]))
    return np.concatenate(pts), np.concatenate([ok, ok])


def _radical_plane(c1, r1, c2, r2):
    """Plane containing the intersection of two spheres."""
    n = np.asarray(c2, dtype=float) - np.asarray(c1, dtype=float)
    ln = np.linalg.norm(n)
    if ln < 1e-30:
        return None
    n = n / ln
    mid = 0.5 * (np.dot(c1 + c2, n) + (r1 * r1 - r2 * r2) / ln)
    return n, float(mid)


def _solve3(rows, rhs):
    """3x3 Cramer solve; rows/rhs python sequences.  None if singular."""
    (a0, a1, a2), (b0, b1, b2), (c0, c1, c2) = rows
    x0 = b1 * c2 - b2 * c1
    x1 = b2 * c0 - b0 * c2
    x2 = b0 * c1 - b1 * c0
    det = a0 * x0 + a1 * x1 + a2 * x2
    if abs(det) < 1e-14:
        return None
    y0 = a2 * c1 - a1 * c2
    y1 = a0 * c2 - a2 * c0
    y2 = a1 * c0 - a0 * c1
    z0 = a1 * b2 - a2 * b1
    z1 = a2 * b0 - a0 * b2
    z2 = a0 * b1 - a1 * b0
    d0, d1, d2 = rhs
    return ((d0 * x0 + d1 * y0 + d2 * z0) / det,
            (d0 * x1 + d1 * y1 + d2 * z1) / det,
            (d0 * x2 + d1 * y2 + d2 * z2) / det)


def _reduce_system(cons):
    """Isolated intersection points of d surfaces (spheres reduce to radical
    planes).  cons: list of ("plane", n, d) / ("sphere", c, r).  Scalar."""
    planes = [c for c in cons if c[0] == "plane"]
    spheres = [c for c in cons if c[0] == "sphere"]
    while len(spheres) >= 2:
        a, b = spheres.pop(), spheres.pop()
        rp = _radical_plane(a[1], a[2], b[1], b[2])
        if rp is None:
            return []
        planes.append(("plane", rp[0], rp[1]))
        spheres.append(a)
    dim = len(cons[0][1])
    if not spheres:
        if len(planes) != dim:
            return []
        if dim == 3:
            q = _solve3([tuple(p[1]) for p in planes],
                        [float(p[2]) for p in planes])
            return [] if q is None else [np.array(q)]
        (a0, a1), (b0, b1) = tuple(planes[0][1]), tuple(planes[1][1])
        det = a0 * b1 - a1 * b0
        if abs(det) < 1e-14:
            return []
        d0, d1 = float(planes[0][2]), float(planes[1][2])
        return [np.array([(d0 * b1 - d1 * a1) / det,
                          (a0 * d1 - b0 * d0) / det])]
    c, r = spheres[0][1], float(spheres[0][2])
    cx = tuple(float(x) for x in c)
    if len(planes) != dim - 1:
        return []
    if dim == 2:
        n0 = tuple(planes[0][1])
        u = (-n0[1], n0[0])
        lu = math.hypot(*u)
        if lu < 1e-14:
            return []
        u = (u[0] / lu, u[1] / lu)
        det = n0[0] * u[1] - n0[1] * u[0]
        if abs(det) < 1e-14:
            return []
        d0 = float(planes[0][2])
        d1 = u[0] * cx[0] + u[1] * cx[1]
        q0 = ((d0 * u[1] - d1 * n0[1]) / det,
              (n0[0] * d1 - u[0] * d0) / det)
    else:
        n0, n1 = tuple(planes[0][1]), tuple(planes[1][1])
        u = (n0[1] * n1[2] - n0[2] * n1[1],
             n0[2] * n1[0] - n0[0] * n1[2],
             n0[0] * n1[1] - n0[1] * n1[0])
        lu = math.sqrt(u[0] ** 2 + u[1] ** 2 + u[2] ** 2)
        if lu < 1e-14:
            return []
        u = (u[0] / lu, u[1] / lu, u[2] / lu)
        q0 = _solve3([n0, n1, u],
                     [float(planes[0][2]), float(planes[1][2]),
                      u[0] * cx[0] + u[1] * cx[1] + u[2] * cx[2]])
        if q0 is None:
            return []
    w = tuple(q0[k] - cx[k] for k in range(dim))
    b = sum(w[k] * u[k] for k in range(dim))
    disc = b * b - (sum(x * x for x in w) - r * r)
    if disc < 0.0:
        return []
    s = math.sqrt(disc)
    return [np.array([q0[k] + t * u[k] for k in range(dim)])
            for t in (-b - s, -b + s)]


# ---------------------------------------------------------------------------
# spindle torus curves


def _torus_frame(t: SpindleTorus):
    a = np.asarray(t.a, dtype=float)
    axis = np.asarray(t.b, dtype=float) - a
    l = float(np.linalg.norm(axis))
    axis /= l
    e = np.zeros(3)
    e[int(np.argmin(np.abs(axis)))] = 1.0
    e1 = np.cross(axis, e)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    q = math.sqrt((t.rho * l) ** 2 - (l / 2) ** 2)
    return a, axis, e1, e2, l, q, t.rho * l


class _TorusSweep:
    """Meridian-swept branch curves of torus ∩ surface, shared by the
    generator loops through a per-surface grid cache.  Candidates come
    from local maxima of the objective along one curve or sign changes
    of a second surface's margin across it; grid work runs vectorized
    over the admissible angles, refinements in scalar math.  The two
    sign branches of the petal-circle cut keep fixed identities."""

    def __init__(self, torus: _Torus, phis=None):
        self.label = torus.label
        a, axis, e1, e2, l, q, rl = _torus_frame(torus.torus)
        self.a, self.axis = a, axis
        self.l, self.q, self.rl = l, q, rl
        if phis is None:
            phis = np.linspace(0.0, 2 * math.pi, _TORUS_SAMPLES,
                               endpoint=False)
        self.phis = phis
        self.n = len(phis)
        self.step = 2 * math.pi / _TORUS_SAMPLES
        self.cosp, self.sinp = np.cos(phis), np.sin(phis)
        self.dphi = (self.cosp[:, None] * e1[None, :]
                     + self.sinp[:, None] * e2[None, :])
        self.at, self.axt = tuple(a), tuple(axis)
        self.e1t, self.e2t = tuple(e1), tuple(e2)
        self.ballc = a + 0.5 * l * axis
        self.ballr = q + rl
        if self.n:
            gp = ((phis - np.roll(phis, 1)) % (2 * math.pi)) <= 1.5 * self.step
            self.gap_prev = gp
            self.gap_next = np.roll(gp, -1)
        self._grids: dict = {}

    def grid(self, key, surf):
        """(surf, V, P): branch validity (2, n) and points (2, n, 3)."""
        if key is not None and key in self._grids:
            return self._grids[key]
        pcx, pcy, rl = 0.5 * self.l, self.q, self.rl
        n = self.n
        if surf[0] == "sphere":
            c_rel = np.asarray(surf[1], dtype=float) - self.a
            tc = float(np.dot(c_rel, self.axis))
            w = c_rel - tc * self.axis
            w2 = float(np.dot(w, w))
            sr = float(surf[2])
            sc = self.dphi @ w
            rt2 = sr * sr - (w2 - sc * sc)
            okA = rt2 >= 0.0
            dxl = np.full(n, tc - pcx)
            dyl = sc - pcy
            ln = np.hypot(dxl, dyl)
            okA &= ln > 1e-30
            lnz = np.where(ln == 0.0, 1.0, ln)
            n2t, n2s = dxl / lnz, dyl / lnz
            d2 = 0.5 * ((pcx + tc) * n2t + (pcy + sc) * n2s
                        + (rl * rl - rt2) / lnz)
        else:
            nrm = np.asarray(surf[1], dtype=float)
            nu = float(np.dot(nrm, self.axis))
            rhs = float(surf[2]) - float(np.dot(nrm, self.a))
            nd = self.dphi @ nrm
            ln = np.hypot(nu, nd)
            okA = ln > 1e-30
            lnz = np.where(ln == 0.0, 1.0, ln)
            n2t, n2s = np.full(n, nu) / lnz, nd / lnz
            d2 = np.full(n, rhs) / lnz
        h = d2 - (n2t * pcx + n2s * pcy)
        okA &= np.abs(h) <= rl
        half = np.sqrt(np.maximum(rl * rl - h * h, 0.0))
        foot_t, foot_s = pcx + h * n2t, pcy + h * n2s
        TT = np.stack([foot_t + half * n2s, foot_t - half * n2s])
        SS = np.stack([foot_s - half * n2t, foot_s + half * n2t])
        V = np.stack([okA, okA]) & (SS >= 0.0)
        P = (self.a[None, None, :]
             + TT[:, :, None] * self.axis[None, None, :]
             + SS[:, :, None] * self.dphi[None, :, :])
        g = (surf, V, P)
        if key is not None:
            self._grids[key] = g
        return g

    def branch_at(self, surf, phi, b):
        """One branch point at an arbitrary angle, scalar math."""
        pcx, pcy, rl = 0.5 * self.l, self.q, self.rl
        cph, sph = math.cos(phi), math.sin(phi)
        e1t, e2t = self.e1t, self.e2t
        dpx = cph * e1t[0] + sph * e2t[0]
        dpy = cph * e1t[1] + sph * e2t[1]
        dpz = cph * e1t[2] + sph * e2t[2]
        at, axt = self.at, self.axt
        if surf[0] == "sphere":
            c = surf[1]
            cx = float(c[0]) - at[0]
            cy = float(c[1]) - at[1]
            cz = float(c[2]) - at[2]
            tc = cx * axt[0] + cy * axt[1] + cz * axt[2]
            scv = cx * dpx + cy * dpy + cz * dpz
            w2 = cx * cx + cy * cy + cz * cz - tc * tc
            sr = float(surf[2])
            rt2v = sr * sr - (w2 - scv * scv)
            if rt2v < 0.0:
                return None
            ddx, ddy = tc - pcx, scv - pcy
            lv = math.hypot(ddx, ddy)
            if lv < 1e-30:
                return None
            ut, us = ddx / lv, ddy / lv
            dv = 0.5 * ((pcx + tc) * ut + (pcy + scv) * us
                        + (rl * rl - rt2v) / lv)
        else:
            nrm = surf[1]
            nx, ny, nz = float(nrm[0]), float(nrm[1]), float(nrm[2])
            nu = nx * axt[0] + ny * axt[1] + nz * axt[2]
            ndv = nx * dpx + ny * dpy + nz * dpz
            rhs = float(surf[2]) - (nx * at[0] + ny * at[1] + nz * at[2])
            lv = math.hypot(nu, ndv)
            if lv < 1e-30:
                return None
            ut, us = nu / lv, ndv / lv
            dv = rhs / lv
        hv = dv - (ut * pcx + us * pcy)
        if abs(hv) > rl:
            return None
        hf = math.sqrt(max(rl * rl - hv * hv, 0.0))
        sgn = -1.0 if b == 0 else 1.0
        tt = pcx + hv * ut - sgn * hf * us
        ss = pcy + hv * us + sgn * hf * ut
        if ss < 0.0:
            return None
        return (at[0] + tt * axt[0] + ss * dpx,
                at[1] + tt * axt[1] + ss * dpy,
                at[2] + tt * axt[2] + ss * dpz)

    def maxima(self, surf, key, value_fn, labels):
        """Local maxima of the objective along torus ∩ surf; across a
        sampling gap a sample counts as a window edge and is refined."""
        if self.n == 0:
            return []
        surf, V, P = self.grid(key, surf)
        if not V.any():
            return []
        # on the shell, a site farther from every shell point than the
        # closest site ever gets can't realize the minimum; drop it
        S = getattr(value_fn, "sites", None)
        if S is not None and len(S) > 1:
            d = np.linalg.norm(S - self.ballc[None, :], axis=1)
            keep = d <= d.min() + 2.0 * self.ballr
            if not keep.all():
                value_fn = _min_dist_value(S[keep])
        flatV = V.ravel()
        vv = np.full(2 * self.n, -math.inf)
        vv[flatV] = value_fn(P.reshape(-1, 3)[flatV])
        v2 = vv.reshape(2, self.n)
        prev_ok = np.roll(V, 1, axis=1) & self.gap_prev[None, :]
        next_ok = np.roll(V, -1, axis=1) & self.gap_next[None, :]
        interior = (prev_ok & next_ok
                    & ~((v2 >= np.roll(v2, 1, axis=1))
                        & (v2 >= np.roll(v2, -1, axis=1))))
        seeds = V & ~interior
        if not seeds.any():
            return []
        g = (math.sqrt(5) - 1) / 2
        value1 = getattr(value_fn, "single",
                         lambda p: value_fn(np.asarray(p)[None, :])[0])
        phis, step = self.phis, self.step
        out = []
        for b, k in zip(*np.nonzero(seeds)):
            b = int(b)
            lo, hi = phis[k] - step, phis[k] + step

            def val_at(phi, b=b):
                p = self.branch_at(surf, phi, b)
                if p is None:
                    return -math.inf, None
                return value1(p), p
            x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
            f1, f2 = val_at(x1), val_at(x2)
            while hi - lo > _REFINE_TOL:
                if f1[0] < f2[0]:
                    lo, x1, f1 = x1, x2, f2
                    x2 = lo + g * (hi - lo)
                    f2 = val_at(x2)
                else:
                    hi, x2, f2 = x2, x1, f1
                    x1 = hi - g * (hi - lo)
                    f1 = val_at(x1)
            best = max([f1, f2, (v2[b, k], P[b, k])], key=lambda t: t[0])
            if best[1] is not None:
                out.append((np.asarray(best[1]), labels))
        return out

    def corners(self, host, hkey, other, labels):
        """Sign changes of `other`'s margin along torus ∩ host."""
        if self.n == 0:
            return []
        host, V, P = self.grid(hkey, host)
        if not V.any():
            return []
        if other[0] == "sphere":
            oc = np.asarray(other[1], dtype=float)
            orr = float(other[2])
            M = np.linalg.norm(P - oc[None, None, :], axis=2) - orr
            oct_ = tuple(map(float, oc))

            def margin_at(p):
                return math.dist(p, oct_) - orr
        else:
            on = np.asarray(other[1], dtype=float)
            od = float(other[2])
            M = P @ on - od
            ont = tuple(map(float, on))

            def margin_at(p):
                return p[0] * ont[0] + p[1] * ont[1] + p[2] * ont[2] - od
        brk = (V & np.roll(V, -1, axis=1)
               & ((M == 0.0) | (M * np.roll(M, -1, axis=1) < 0.0)))
        if not brk.any():
            return []
        phis, n = self.phis, self.n
        tau = 2 * math.pi
        out = []
        for b, k in zip(*np.nonzero(brk)):
            b = int(b)
            kk = (k + 1) % n
            gap = (phis[kk] - phis[k]) % tau
            if gap == 0.0:
                gap = tau
            lo, hi = float(phis[k]), float(phis[k]) + gap
            mlo = M[b, k]
            while hi - lo > 1e-12:
                mid = 0.5 * (lo + hi)
                p = self.branch_at(host, mid, b)
                if p is None:
                    break
                if mlo * margin_at(p) <= 0:
                    hi = mid
                else:
                    lo, mlo = mid, margin_at(p)
            p = self.branch_at(host, 0.5 * (lo + hi), b)
            if p is not None:
                out.append((np.asarray(p), labels))
        return out


def _torus_site_meridian(torus: _Torus, sites, site_labels):
    """Stationary points of single-site distance on the torus shell: the
    meridian plane through the site (and its opposite)."""
    a, axis, e1, e2, l, q, rl = _torus_frame(torus.torus)
    pc2 = np.array([l / 2, q])
    out = []
    for s, lab in zip(sites, site_labels):
        w = np.asarray(s, dtype=float) - a
        t = float(np.dot(w, axis))
        wp = w - t * axis
        sr = float(np.linalg.norm(wp))
        dphi = wp / sr if sr > 1e-30 else e1
        for sign in (1.0, -1.0):
            s2 = np.array([t, sign * sr])
            dirv = s2 - pc2
            ld = np.linalg.norm(dirv)
            dirv = dirv / ld if ld > 1e-30 else np.array([1.0, 0.0])
            for s3 in (1.0, -1.0):
                p2 = pc2 + s3 * rl * dirv
                if p2[1] >= 0.0:
                    p = a + p2[0] * axis + p2[1] * dphi
                    out.append((p, (lab, torus.label)))
    return out


# ---------------------------------------------------------------------------
# candidate pool


class _Pool:
    """Candidate accumulator.

    `filters` holds (center, radius) pairs every winner must lie inside
    (the feasible region's bounding spheres, slack included); points
    failing one are rejected on entry since solve() would mask them out
    anyway.  Batches stay as array chunks to keep memory flat.
    """

    def __init__(self, dim, filters=()):
        self.dim = dim
        self._chunks: list = []
        self._labels: list = []
        self._filters = [(np.asarray(c, dtype=float), float(r))
                         for c, r in filters]

    def add(self, pts, labels):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.size == 0:
            return
        keep = np.all(np.isfinite(pts), axis=1)
        for c, r in self._filters:
            with np.errstate(invalid="ignore"):
                keep &= np.linalg.norm(pts - c, axis=1) <= r
        if not keep.all():
            pts = pts[keep]
            labels = [lab for lab, k in zip(labels, keep) if k]
        if not len(pts):
            return
        self._chunks.append(pts)
        self._labels.append([tuple(lab) for lab in labels])

    @property
    def labels(self):
        out = []
        for chunk in self._labels:
            out.extend(chunk)
        return out

    def array(self):
        if not self._chunks:
            return np.zeros((0, self.dim))
        return np.vstack(self._chunks)


def _curve_touches_ball(curve, c, r):
    if curve[0] == "circle":
        _, cc, rr, nn = curve
        w = np.asarray(c, dtype=float) - cc
        ax = float(np.dot(w, nn))
        rad = math.sqrt(max(float(np.dot(w, w)) - ax * ax, 0.0))
        return math.hypot(ax, rad - rr) <= r
    _, q0, u = curve
    w = np.asarray(c, dtype=float) - q0
    t = float(np.dot(w, u))
    return math.sqrt(max(float(np.dot(w, w)) - t * t, 0.0)) <= r


class _GenCtx:
    """Shared pairwise-intersection cache for the 3D generator loops.

    curve(i, j) is None when surfaces i and j provably cannot host a
    winning candidate: their intersection is empty or misses one of the
    filter balls every feasible point lies in.  Torus sweeps get their
    enclosing balls and admissible meridian angles from here too.
    """

    def __init__(self, surfs, filters):
        self.surfs = surfs
        self.filters = filters
        self.tball: dict = {}
        self.tphis: dict = {}
        self._curves: dict = {}
        self._sweeps: dict = {}
        self._pairs = None

    def sweep(self, to):
        if to.label not in self._sweeps:
            self._sweeps[to.label] = _TorusSweep(to, self.tphis.get(to.label))
        return self._sweeps[to.label]

    def curve(self, i, j):
        key = (i, j) if i < j else (j, i)
        if key not in self._curves:
            cv = _pair_curve(self.surfs[key[0]], self.surfs[key[1]])
            if cv is not None:
                for c, r in self.filters:
                    if not _curve_touches_ball(cv, c, r):
                        cv = None
                        break
            self._curves[key] = cv
        return self._curves[key]

    def pairs(self):
        if self._pairs is None:
            self._pairs = [
                (i, j)
                for i, j in itertools.combinations(range(len(self.surfs)), 2)
                if self.curve(i, j) is not None]
        return self._pairs


def _torus_context(to, filters):
    """Enclosing ball of the shell and the meridian angles whose petal
    circle can reach every filter ball."""
    a, axis, e1, e2, l, q, rl = _torus_frame(to.torus)
    mid = a + 0.5 * l * axis
    ball = (mid, q + rl)
    phis = np.linspace(0.0, 2 * math.pi, _TORUS_SAMPLES, endpoint=False)
    if filters:
        m = (mid[None, :] + q * (np.cos(phis)[:, None] * e1[None, :]
                                 + np.sin(phis)[:, None] * e2[None, :]))
        ok = np.ones(len(phis), dtype=bool)
        for c, r in filters:
            ok &= np.linalg.norm(m - np.asarray(c, dtype=float)[None, :],
                                 axis=1) <= rl + r
        ok = ok | np.roll(ok, 1) | np.roll(ok, -1)
        phis = phis[ok]
    return ball, phis


def _all_sites(problem):
    pts = [tuple(map(float, s)) for s in problem.sites]
    labels = ["site:%d" % i for i in range(len(pts))]
    for i, s in enumerate(problem.co_sites):
        pts.append(tuple(map(float, s)))
        labels.append("co:%d" % i)
    return np.asarray(pts, dtype=float).reshape(len(pts), -1), labels


def _min_dist_value(S):
    def fn(pts):
        d = np.linalg.norm(pts[:, None, :] - S[None, :, :], axis=2)
        return d.min(axis=1)
    sites = [tuple(map(float, s)) for s in S]
    if S.shape[1] == 3:
        def one(p):
            px, py, pz = p
            best = math.inf
            for sx, sy, sz in sites:
                dx, dy, dz = px - sx, py - sy, pz - sz
                d = dx * dx + dy * dy + dz * dz
                if d < best:
                    best = d
            return math.sqrt(best)
    else:
        def one(p):
            px, py = p
            best = math.inf
            for sx, sy in sites:
                dx, dy = px - sx, py - sy
                d = dx * dx + dy * dy
                if d < best:
                    best = d
            return math.sqrt(best)
    fn.single = one
    fn.sites = S
    return fn


def _value_fn(problem, S):
    if problem.objective is Objective.MIN_DISTANCE:
        return _min_dist_value(S)
    planes = [(np.asarray(p, dtype=float), np.asarray(n, dtype=float), w)
              for (p, n), w in problem.weight_planes]

    def fn(pts):
        vals = [w * np.abs((pts - p) @ n) for p, n, w in planes]
        return np.minimum.reduce(vals)
    scal = [(tuple(map(float, p)), tuple(map(float, n)), float(w))
            for p, n, w in planes]

    def one(p):
        best = math.inf
        for q, n, w in scal:
            v = w * abs(sum((p[k] - q[k]) * n[k] for k in range(len(n))))
            if v < best:
                best = v
        return best
    fn.single = one
    return fn


def _perp2(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _equidistance_planes(problem):
    """Weighted-plane equidistance generators; both sign branches."""
    out = []
    planes = [(np.asarray(p, dtype=float), np.asarray(n, dtype=float), w)
              for (p, n), w in problem.weight_planes]
    for i, j in itertools.combinations(range(len(planes)), 2):
        pi, ni, wi = planes[i]
        pj, nj, wj = planes[j]
        for sign in (1.0, -1.0):
            n = wi * ni - sign * wj * nj
            ln = np.linalg.norm(n)
            if ln < 1e-14:
                continue
            d = (wi * np.dot(ni, pi) - sign * wj * np.dot(nj, pj)) / ln
            out.append((n / ln, float(d), "wbis:%d:%d:%s"
                        % (i, j, "+" if sign > 0 else "-")))
    return out


def _generate(problem, center, radius):
    """All candidate points with their generating active sets."""
    dim = len(center)
    spheres, planes, tori = _collect_surfaces(problem, center, radius)
    slack = 1e-9 * _problem_scale(center, radius)
    filters = [(np.asarray(c.center, dtype=float), float(c.radius) + slack)
               for c in problem.feasible.constraints
               if isinstance(c, InsideSphere)]
    pool = _Pool(dim, filters)
    ctx = None
    if dim == 3:
        surfs = ([("sphere", np.asarray(s.c, dtype=float), s.r, s.label)
                  for s in spheres]
                 + [("plane", np.asarray(p.n, dtype=float), p.d, p.label)
                    for p in planes])
        ctx = _GenCtx(surfs, filters)
        for to in tori:
            ctx.tball[to.label], ctx.tphis[to.label] = \
                _torus_context(to, filters)

    # probes: guaranteed-feasible anchors for degenerate instances
    pool.add([center], [("probe",)])
    for c in problem.feasible.constraints:
        if isinstance(c, InsideSphere):
            pool.add([c.center], [("probe",)])

    if problem.objective is Objective.MIN_DISTANCE:
        S, site_labels = _all_sites(problem)
        cen = np.asarray(center)
        dmin = np.linalg.norm(S - cen, axis=1).min()
        keep = np.linalg.norm(S - cen, axis=1) <= dmin + 2.0 * radius + 1e-12
        S = S[keep]
        site_labels = [l for l, k in zip(site_labels, keep) if k]
        _site_families(pool, S, site_labels, spheres, planes, tori, dim,
                       _value_fn(problem, S), ctx)
    else:
        _weighted_families(pool, problem, spheres, planes, tori, dim,
                           _value_fn(problem, None), ctx)

    _corner_families(pool, spheres, planes, tori, dim,
                     _value_fn(problem, _all_sites(problem)[0])
                     if problem.objective is Objective.MIN_DISTANCE
                     else _value_fn(problem, None), ctx)
    return pool


def _site_families(pool, S, labels, spheres, planes, tori, dim, vfn,
                   ctx=None):
    n = len(S)
    idx = np.arange(n)

    # d+1 equidistant sites: circumcenters, batched
    combos = np.array(list(itertools.combinations(idx, dim + 1)), dtype=int)
    if len(combos):
        p0 = S[combos[:, 0]]
        rows = np.stack([2.0 * (S[combos[:, k + 1]] - p0)
                         for k in range(dim)], axis=1)
        rhs = np.stack([np.einsum("ij,ij->i", S[combos[:, k + 1]],
                                  S[combos[:, k + 1]])
                        - np.einsum("ij,ij->i", p0, p0)
                        for k in range(dim)], axis=1)
        det = np.linalg.det(rows)
        ok = np.abs(det) > 1e-30
        if ok.any():
            cc = np.linalg.solve(rows[ok], rhs[ok][..., None])[..., 0]
            labs = [tuple(labels[i] for i in combo)
                    for combo, o in zip(combos, ok) if o]
            pool.add(cc, labs)

    if dim == 2:
        _site_families_2d(pool, S, labels, spheres, planes)
        return

    pairs = np.array(list(itertools.combinations(idx, 2)), dtype=int)
    triples = np.array(list(itertools.combinations(idx, 3)), dtype=int)

    # three sites + one surface: bisector line through the equidistance axis
    if len(triples):
        a = S[triples[:, 0]]
        n1 = S[triples[:, 1]] - a
        n2 = S[triples[:, 2]] - a
        u = np.cross(n1, n2)
        lu = np.linalg.norm(u, axis=1)
        ok = lu > 1e-30
        if ok.any():
            a, n1, n2, u = a[ok], n1[ok], n2[ok], u[ok] / lu[ok][:, None]
            t3 = triples[ok]
            mats = np.stack([n1, n2, u], axis=1)
            rhs = np.stack([
                np.einsum("ij,ij->i", n1, a + 0.5 * n1),
                np.einsum("ij,ij->i", n2, a + 0.5 * n2),
                np.einsum("ij,ij->i", u, a)], axis=1)
            det = np.linalg.det(mats)
            good = np.abs(det) > 1e-30
            if good.any():
                q0 = np.linalg.solve(mats[good], rhs[good][..., None])[..., 0]
                uu = u[good]
                tg = t3[good]
                base_labs = [tuple(labels[i] for i in t) for t in tg]
                for sp in spheres:
                    pts, okk = _line_sphere(q0, uu, np.asarray(sp.c)[None, :],
                                            sp.r)
                    labs = [lab + (sp.label,) for lab in base_labs] * 2
                    pool.add(pts[okk], [l for l, o in zip(labs, okk) if o])
                for pl in planes:
                    nn = np.asarray(pl.n)
                    den = uu @ nn
                    okk = np.abs(den) > 1e-14
                    t = np.where(okk, (pl.d - q0 @ nn) / np.where(okk, den, 1.0), 0.0)
                    pts = q0 + t[:, None] * uu
                    labs = [lab + (pl.label,) for lab in base_labs]
                    pool.add(pts[okk], [l for l, o in zip(labs, okk) if o])
                for to in tori:
                    ball = ctx.tball.get(to.label) if ctx is not None \
                        else None
                    for r0, ru, lab in zip(q0, uu, base_labs):
                        if ball is not None:
                            w = ball[0] - r0
                            t = float(np.dot(w, ru))
                            if float(np.dot(w, w)) - t * t > ball[1] ** 2:
                                continue
                        pts = _line_torus(r0, ru, to)
                        pool.add(pts, [lab + (to.label,)] * len(pts))

    # two sites + surfaces
    if len(pairs):
        mids = 0.5 * (S[pairs[:, 0]] + S[pairs[:, 1]])
        nb, _ = _unit_rows(S[pairs[:, 1]] - S[pairs[:, 0]])
        db = np.einsum("ij,ij->i", nb, mids)
        base_labs = [(labels[i], labels[j]) for i, j in pairs]

        # + one sphere: stationary points on the cut circle
        for sp in spheres:
            c = np.asarray(sp.c)
            cc, rr, ok = _sphere_plane_circle(
                np.broadcast_to(c, mids.shape).copy(), np.full(len(mids), sp.r),
                nb, db)
            if ok.any():
                pts = _circle_site_extremes(cc[ok], rr[ok], nb[ok],
                                            S[pairs[:, 0]][ok])
                labs = [lab + (sp.label,) for lab, o in zip(base_labs, ok) if o]
                pool.add(pts, labs * 2)
        # + one plane: foot of either site on the intersection line
        for pl in planes:
            nn = np.asarray(pl.n)
            pts, labs = [], []
            for k in range(len(mids)):
                line = _plane_plane_line(nb[k], db[k], nn, pl.d, 3)
                if line is None:
                    continue
                q0, u = line
                s0 = S[pairs[k, 0]]
                pts.append(q0 + np.dot(s0 - q0, u) * u)
                labs.append(base_labs[k] + (pl.label,))
            pool.add(pts, labs)
        # + two surfaces: their intersection curve cut by the bisector plane
        if ctx is None:
            ctx = _GenCtx(
                [("sphere", np.asarray(s.c, dtype=float), s.r, s.label)
                 for s in spheres]
                + [("plane", np.asarray(p.n, dtype=float), p.d, p.label)
                   for p in planes], ())
        surfs = ctx.surfs
        for i, j in ctx.pairs():
            curve = ctx.curve(i, j)
            lab2 = (surfs[i][3], surfs[j][3])
            if curve[0] == "circle":
                pts, ok = _circle_planes_cut(curve[1], curve[2], curve[3],
                                             nb, db)
                labs = [lab + lab2 for lab in base_labs] * 2
                pool.add(pts[ok], [l for l, o in zip(labs, ok) if o])
            else:
                q0, u = curve[1], curve[2]
                den = nb @ u
                ok = np.abs(den) > 1e-14
                t = np.where(ok, (db - nb @ q0) / np.where(ok, den, 1.0), 0.0)
                pts = q0[None, :] + t[:, None] * u[None, :]
                labs = [lab + lab2 for lab in base_labs]
                pool.add(pts[ok], [l for l, o in zip(labs, ok) if o])
        # + torus curves, meridians restricted to the reachable arc; a
        # bisector plane missing the shell ball cannot cut the torus
        for to in tori:
            ball = ctx.tball.get(to.label)
            sweep = ctx.sweep(to)
            for k in range(len(mids)):
                if ball is not None and abs(
                        float(np.dot(nb[k], ball[0])) - db[k]) > ball[1]:
                    continue
                bis = ("plane", nb[k], float(db[k]), "bis")
                for p, lab in sweep.maxima(bis, None, vfn,
                                           base_labs[k] + (to.label,)):
                    pool.add([p], [lab])

    # one site + one or two surfaces
    _single_site_families(pool, S, labels, spheres, planes, tori, dim, vfn,
                          ctx)


def _site_families_2d(pool, S, labels, spheres, planes):
    n = len(S)
    pairs = np.array(list(itertools.combinations(range(n), 2)), dtype=int)
    if len(pairs):
        mids = 0.5 * (S[pairs[:, 0]] + S[pairs[:, 1]])
        nb, _ = _unit_rows(S[pairs[:, 1]] - S[pairs[:, 0]])
        u = _perp2(nb)
        base_labs = [(labels[i], labels[j]) for i, j in pairs]
        for sp in spheres:
            pts, ok = _line_sphere(mids, u, np.asarray(sp.c)[None, :], sp.r)
            labs = [lab + (sp.label,) for lab in base_labs] * 2
            pool.add(pts[ok], [l for l, o in zip(labs, ok) if o])
        for pl in planes:
            nn = np.asarray(pl.n)
            den = u @ nn
            ok = np.abs(den) > 1e-14
            t = np.where(ok, (pl.d - mids @ nn) / np.where(ok, den, 1.0), 0.0)
            pts = mids + t[:, None] * u
            labs = [lab + (pl.label,) for lab in base_labs]
            pool.add(pts[ok], [l for l, o in zip(labs, ok) if o])
    _single_site_families(pool, S, labels, spheres, planes, [], 2, None)


def _single_site_families(pool, S, labels, spheres, planes, tori, dim, vfn,
                          ctx=None):
    for sp in spheres:
        c = np.asarray(sp.c)
        u, ln = _unit_rows(S - c)
        fb = np.zeros_like(u)
        fb[:, 0] = 1.0
        u = np.where(ln[:, None] > 1e-30, u, fb)
        pts = np.concatenate([c + sp.r * u, c - sp.r * u])
        labs = [(lab, sp.label) for lab in labels] * 2
        pool.add(pts, labs)
    for pl in planes:
        nn = np.asarray(pl.n)
        feet = S - ((S @ nn) - pl.d)[:, None] * nn
        pool.add(feet, [(lab, pl.label) for lab in labels])
    for to in tori:
        for p, lab in _torus_site_meridian(to, S, labels):
            pool.add([p], [lab])

    if dim == 3:
        # one site + an intersection curve of two surfaces
        if ctx is None:
            ctx = _GenCtx(
                [("sphere", np.asarray(s.c, dtype=float), s.r, s.label)
                 for s in spheres]
                + [("plane", np.asarray(p.n, dtype=float), p.d, p.label)
                   for p in planes], ())
        surfs = ctx.surfs
        for i, j in ctx.pairs():
            circ = ctx.curve(i, j)
            sa, sb = surfs[i], surfs[j]
            if circ[0] == "circle":
                _, cc, rr, nn = circ
                pts = _circle_site_extremes(
                    np.broadcast_to(cc, S.shape).copy(),
                    np.full(len(S), rr),
                    np.broadcast_to(nn, S.shape).copy(), S)
                labs = [(lab, sa[3], sb[3]) for lab in labels] * 2
                pool.add(pts, labs)
            else:
                _, q0, u = circ
                t = (S - q0) @ u
                pts = q0 + t[:, None] * u
                pool.add(pts, [(lab, sa[3], sb[3]) for lab in labels])
        for to in tori:
            sweep = ctx.sweep(to)
            for idx, other in enumerate(surfs):
                for p, lab in sweep.maxima(other, idx, vfn,
                                           (to.label, other[3])):
                    pool.add([p], [lab])


def _weighted_families(pool, problem, spheres, planes, tori, dim, vfn,
                       ctx=None):
    eq_planes = _equidistance_planes(problem)
    if ctx is not None and ctx.filters:
        keep = []
        for n1, d1, lab1 in eq_planes:
            if all(abs(float(np.dot(n1, c)) - d1) <= r
                   for c, r in ctx.filters):
                keep.append((n1, d1, lab1))
        eq_planes = keep
    wplanes = [(np.asarray(p, dtype=float), np.asarray(n, dtype=float),
                "wplane:%d" % k)
               for k, ((p, n), w) in enumerate(problem.weight_planes)]
    # single weight plane: push to each sphere's poles along its normal,
    # and to objective extremes on every two-surface intersection circle
    for sp in spheres:
        c = np.asarray(sp.c)
        for p0, n0, lab in wplanes:
            pool.add([c + sp.r * n0, c - sp.r * n0],
                     [(lab, sp.label)] * 2)
    surfs = ([("sphere", np.asarray(s.c, dtype=float), s.r, s.label)
              for s in spheres]
             + [("plane", np.asarray(p.n, dtype=float), p.d, p.label)
                for p in planes])
    if dim == 3:
        if ctx is None:
            ctx = _GenCtx(surfs, ())
        for i, j in ctx.pairs():
            curve = ctx.curve(i, j)
            if curve[0] != "circle":
                continue
            sa, sb = ctx.surfs[i], ctx.surfs[j]
            _, cc, rr, nn = curve
            for p0, n0, lab in wplanes:
                w = n0 - np.dot(n0, nn) * nn
                lw = np.linalg.norm(w)
                if lw < 1e-14:
                    continue
                w /= lw
                pool.add([cc + rr * w, cc - rr * w],
                         [(lab, sa[3], sb[3])] * 2)
    # equidistance planes act exactly like site bisector hyperplanes
    for k, (n1, d1, lab1) in enumerate(eq_planes):
        for sa in surfs:
            if sa[0] == "plane":
                line = _plane_plane_line(np.asarray(n1), d1, sa[1], sa[2], dim)
                if line is not None and dim == 2:
                    pool.add([line[0]], [(lab1, sa[3])])
            elif dim == 2:
                pts, ok = _line_sphere(*_plane_as_line(np.asarray(n1), d1),
                                       sa[1][None, :], sa[2])
                pool.add(pts[ok], [(lab1, sa[3])] * int(ok.sum()))
            else:
                # objective extremes on the eq-plane ∩ sphere circle
                curve = _pair_curve(("plane", np.asarray(n1), d1, lab1), sa)
                if curve is None or curve[0] != "circle":
                    continue
                _, cc, rr, nn = curve
                for p0, n0, wlab in wplanes:
                    w = n0 - np.dot(n0, nn) * nn
                    lw = np.linalg.norm(w)
                    if lw < 1e-14:
                        continue
                    w /= lw
                    pool.add([cc + rr * w, cc - rr * w],
                             [(lab1, sa[3], wlab)] * 2)
        for (n2, d2, lab2) in eq_planes[k + 1:]:
            if dim == 2:
                pt = _reduce_system([("plane", np.asarray(n1), d1),
                                     ("plane", np.asarray(n2), d2)])
                pool.add(pt, [(lab1, lab2)] * len(pt))
                continue
            for sa in surfs:
                cons = [("plane", np.asarray(n1), d1),
                        ("plane", np.asarray(n2), d2), (sa[0], sa[1], sa[2])]
                pts = _reduce_system(cons)
                pool.add(pts, [(lab1, lab2, sa[3])] * len(pts))
            for (n3, d3, lab3) in eq_planes[k + 1:]:
                if lab3 <= lab2:
                    continue
                pts = _reduce_system([("plane", np.asarray(n1), d1),
                                      ("plane", np.asarray(n2), d2),
                                      ("plane", np.asarray(n3), d3)])
                pool.add(pts, [(lab1, lab2, lab3)] * len(pts))
        if dim == 3:
            for i, j in ctx.pairs():
                sa, sb = ctx.surfs[i], ctx.surfs[j]
                cons = [("plane", np.asarray(n1), d1),
                        (sa[0], sa[1], sa[2]), (sb[0], sb[1], sb[2])]
                pts = _reduce_system(cons)
                pool.add(pts, [(lab1, sa[3], sb[3])] * len(pts))
        # feet of sphere centers on the equidistance plane (flat-tie anchor)
        for sp in spheres:
            c = np.asarray(sp.c)
            foot = c - (np.dot(c, n1) - d1) * np.asarray(n1)
            pool.add([foot], [(lab1, "probe")])


def _plane_as_line(n, d):
    """2D plane (line) as (point, direction) for the line-circle kernel."""
    q0 = (d * np.asarray(n))[None, :]
    u = _perp2(np.asarray(n))[None, :]
    return q0, u


def _plane_plane_line(n1, d1, n2, d2, dim):
    if dim == 2:
        pts = _reduce_system([("plane", np.asarray(n1), d1),
                              ("plane", np.asarray(n2), d2)])
        return (pts[0], None) if pts else None
    a0, a1, a2 = (float(x) for x in n1)
    b0, b1, b2 = (float(x) for x in n2)
    u = (a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0)
    lu = math.sqrt(u[0] ** 2 + u[1] ** 2 + u[2] ** 2)
    if lu < 1e-14:
        return None
    u = (u[0] / lu, u[1] / lu, u[2] / lu)
    q0 = _solve3([(a0, a1, a2), (b0, b1, b2), u], [d1, d2, 0.0])
    if q0 is None:
        return None
    return np.array(q0), np.array(u)


def _line_torus(q0, u, torus: _Torus):
    """Isolated hits of a line with the torus shell, by margin sign scan.
    The scan is clipped to the line's chord through the shell's bounding
    ball; an empty chord means no hits."""
    a, axis, _, _, l, q, rl = _torus_frame(torus.torus)
    mid = a + 0.5 * l * axis
    w = np.asarray(q0, dtype=float) - mid
    bb = float(np.dot(w, u))
    cc = float(np.dot(w, w)) - (q + rl) ** 2
    disc = bb * bb - cc
    if disc <= 0.0:
        return []
    root = math.sqrt(disc)
    ts = np.linspace(-bb - root, -bb + root, 128)
    pts = q0[None, :] + ts[:, None] * u[None, :]
    rel = pts - a
    tax = rel @ axis
    rad = np.sqrt(np.maximum(np.einsum("ij,ij->i", rel, rel)
                             - tax * tax, 0.0))
    margins = np.hypot(tax - 0.5 * l, rad - q) - rl

    at, axt, q0t, ut = tuple(a), tuple(axis), tuple(q0), tuple(u)

    def margin_at(t):
        wx = q0t[0] + t * ut[0] - at[0]
        wy = q0t[1] + t * ut[1] - at[1]
        wz = q0t[2] + t * ut[2] - at[2]
        tax = wx * axt[0] + wy * axt[1] + wz * axt[2]
        rad = math.sqrt(max(wx * wx + wy * wy + wz * wz - tax * tax, 0.0))
        return math.hypot(tax - 0.5 * l, rad - q) - rl

    out = []
    tol = 1e-12 * (ts[-1] - ts[0] + 1.0)
    for k in range(len(ts) - 1):
        if margins[k] == 0.0 or margins[k] * margins[k + 1] < 0:
            lo, hi, mlo = ts[k], ts[k + 1], margins[k]
            while hi - lo > tol:
                tm = 0.5 * (lo + hi)
                mm = margin_at(tm)
                if mlo * mm <= 0:
                    hi = tm
                else:
                    lo, mlo = tm, mm
            out.append(q0 + 0.5 * (lo + hi) * u)
    return out


def _corner_families(pool, spheres, planes, tori, dim, vfn, ctx=None):
    surfs = (ctx.surfs if ctx is not None else
             [("sphere", np.asarray(s.c, dtype=float), s.r, s.label)
              for s in spheres]
             + [("plane", np.asarray(p.n, dtype=float), p.d, p.label)
                for p in planes])
    if dim == 3 and ctx is not None:
        # a corner exists only where all three pairwise curves reach the
        # filter balls; walk pairs and extend by compatible thirds
        good = ctx.pairs()
        adj = {}
        for i, j in good:
            adj.setdefault(i, set()).add(j)
            adj.setdefault(j, set()).add(i)
        for i, j in good:
            for k in sorted(adj[i] & adj[j]):
                if k <= j:
                    continue
                pts = _reduce_system([(surfs[m][0], surfs[m][1], surfs[m][2])
                                      for m in (i, j, k)])
                pool.add(pts, [(surfs[i][3], surfs[j][3], surfs[k][3])]
                         * len(pts))
    else:
        for combo in itertools.combinations(surfs, dim):
            pts = _reduce_system([(s[0], s[1], s[2]) for s in combo])
            pool.add(pts, [tuple(s[3] for s in combo)] * len(pts))
    if dim == 3 and tori:
        pairs = (ctx.pairs() if ctx is not None
                 else list(itertools.combinations(range(len(surfs)), 2)))
        for to in tori:
            sweep = ctx.sweep(to) if ctx is not None else _TorusSweep(to)
            shell = (sweep.ballc, sweep.ballr)
            for i, j in pairs:
                sa, sb = surfs[i], surfs[j]
                # a corner on the shell also sits on the pair curve, so
                # the curve must reach the shell's enclosing ball
                cv = (ctx.curve(i, j) if ctx is not None
                      else _pair_curve(sa, sb))
                if cv is None or not _curve_touches_ball(cv, *shell):
                    continue
                for p, lab in sweep.corners(sa, i, sb,
                                            (to.label, sa[3], sb[3])):
                    pool.add([p], [lab])


# ---------------------------------------------------------------------------
# public operations


def _pick_best(pts, labels, values, mask):
    if not mask.any():
        return None
    idx = np.flatnonzero(mask)
    vals = values[idx]
    best = vals.max()
    at = idx[vals == best]
    order = np.lexsort(tuple(pts[at][:, k] for k in range(pts.shape[1] - 1, -1, -1)))
    win = at[order[0]]
    return win, best


def _problem_scale(center, radius):
    return radius + float(np.linalg.norm(center))


def solve(problem: PlacementProblem) -> Candidate:
    """Best placement over the combinatorial candidate set; FALLBACK drops
    the avoid regions when they exclude every feasible candidate."""
    problem.validate()
    if problem.objective is Objective.WEIGHTED_PLANE_DISTANCE:
        return solve_weighted(problem)
    center, radius = problem.feasible.bounding_sphere()
    scale = _problem_scale(center, radius)
    slack = 1e-9 * scale
    pool = _generate(problem, center, radius)
    pts = pool.array()
    labs = pool.labels
    S, _ = _all_sites(problem)
    values = _value_fn(problem, S)(pts) if len(pts) else np.zeros(0)
    feas = problem.feasible.contains_batch(pts, slack=slack) if len(pts) \
        else np.zeros(0, dtype=bool)
    ok_avoid = np.ones(len(pts), dtype=bool)
    for fr in problem.avoid:
        ok_avoid &= ~fr.contains_batch(pts, slack=-slack)
    hit = _pick_best(pts, labs, values, feas & ok_avoid)
    if hit is not None:
        win, best = hit
        return Candidate(tuple(pts[win]), float(best), labs[win])
    hit = _pick_best(pts, labs, values, feas)
    if hit is not None:
        win, best = hit
        return Candidate(tuple(pts[win]), float(best), labs[win],
                         fallback=True, note="avoid regions dropped")
    raise FeasibleRegionEmpty("no candidate satisfies the feasible region")


def solve_weighted(problem: PlacementProblem) -> Candidate:
    if problem.objective is not Objective.WEIGHTED_PLANE_DISTANCE:
        raise ValidationError("objective must be weighted-plane-distance")
    problem.validate()
    center, radius = problem.feasible.bounding_sphere()
    scale = _problem_scale(center, radius)
    slack = 1e-9 * scale
    pool = _generate(problem, center, radius)
    pts = pool.array()
    labs = pool.labels
    values = _value_fn(problem, None)(pts) if len(pts) else np.zeros(0)
    feas = problem.feasible.contains_batch(pts, slack=slack) if len(pts) \
        else np.zeros(0, dtype=bool)
    ok_avoid = np.ones(len(pts), dtype=bool)
    for fr in problem.avoid:
        ok_avoid &= ~fr.contains_batch(pts, slack=-slack)
    hit = _pick_best(pts, labs, values, feas & ok_avoid)
    if hit is not None:
        win, best = hit
        return Candidate(tuple(pts[win]), float(best), labs[win])
    hit = _pick_best(pts, labs, values, feas)
    if hit is not None:
        win, best = hit
        return Candidate(tuple(pts[win]), float(best), labs[win],
                         fallback=True, note="avoid regions dropped")
    raise FeasibleRegionEmpty("no candidate satisfies the feasible region")


def grid_oracle(problem: PlacementProblem, resolution: int) -> Candidate | None:
    """Exhaustive grid maximum over the feasible bounding box; test oracle."""
    problem.validate()
    lo, hi = problem.feasible.bounding_box()
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(len(lo))]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    mask = problem.feasible.contains_batch(pts)
    for fr in problem.avoid:
        mask &= ~fr.contains_batch(pts)
    if not mask.any():
        return None
    S, _ = _all_sites(problem) if problem.objective is Objective.MIN_DISTANCE \
        else (None, None)
    values = np.full(len(pts), -np.inf)
    values[mask] = _value_fn(problem, S)(pts[mask])
    hit = _pick_best(pts, None, values, mask)
    win, best = hit
    return Candidate(tuple(pts[win]), float(best), ("grid",))


def active_generators(problem: PlacementProblem, point, value,
                      rel: float = 1e-7) -> list:
    """Generators at objective value at the point: equally-near sites (or
    equally-critical weight planes) and touched constraint surfaces."""
    center, radius = problem.feasible.bounding_sphere()
    tol = rel * max(abs(value), _problem_scale(center, radius))
    out = []
    if problem.objective is Objective.MIN_DISTANCE:
        S, labels = _all_sites(problem)
        for s, lab in zip(S, labels):
            if abs(dist(point, tuple(s)) - value) <= tol:
                out.append(lab)
    else:
        for k, ((p, n), w) in enumerate(problem.weight_planes):
            d = w * abs(float(np.dot(np.asarray(point) - np.asarray(p),
                                     np.asarray(n))))
            if abs(d - value) <= tol:
                out.append("wplane:%d" % k)
    spheres, planes, tori = _collect_surfaces(problem, center, radius)
    for sp in spheres:
        if abs(dist(point, sp.c) - sp.r) <= tol:
            out.append(sp.label)
    for pl in planes:
        if abs(float(np.dot(point, pl.n)) - pl.d) <= tol:
            out.append(pl.label)
    for to in tori:
        if abs(to.torus.margin(point)) <= tol:
            out.append(to.label)
    return out


def _objective_at(problem, point):
    S, _ = _all_sites(problem) if problem.objective is Objective.MIN_DISTANCE \
        else (None, None)
    return float(_value_fn(problem, S)(np.asarray(point, dtype=float)[None, :])[0])


def relocate_round(items: list) -> list:
    """One pass moving each candidate to its solve optimum against all other
    current candidates; the global minimum distance never decreases."""
    cands = [c for c, _ in items]
    out = []
    for k, (cand, problem) in enumerate(items):
        others = tuple(c.point for i, c in enumerate(cands) if i != k)
        prob = replace(problem, co_sites=others)
        cur_val = _objective_at(prob, cand.point)
        try:
            moved = solve(prob)
        except FeasibleRegionEmpty:
            moved = None
        if moved is None or moved.value < cur_val:
            kept = replace(cand, value=cur_val, note="held in place")
            cands[k] = kept
        else:
            cands[k] = moved
        out.append(cands[k])
    return out


def relocate(items: list, max_passes: int = 50) -> list:
    """Relocation passes until movement falls below 1e-9 of problem scale."""
    cands = [c for c, _ in items]
    problems = [p for _, p in items]
    scale = max(_problem_scale(*p.feasible.bounding_sphere())
                for p in problems) or 1.0
    for _ in range(max_passes):
        new = relocate_round(list(zip(cands, problems)))
        move = max(dist(a.point, b.point) for a, b in zip(cands, new))
        cands = new
        if move < 1e-9 * scale:
            break
    return cands


def _pair_curve(sa, sb):
    """Intersection curve of two spheres/planes: circle or line."""
    if sa[0] == "sphere" and sb[0] == "sphere":
        rp = _radical_plane(sa[1], sa[2], sb[1], sb[2])
        if rp is None:
            return None
        n, d = rp
        cc, rr, ok = _sphere_plane_circle(sa[1][None, :], np.array([sa[2]]),
                                          np.broadcast_to(n, (1, 3)).copy(),
                                          np.array([d]))
        if not ok[0]:
            return None
        return ("circle", cc[0], float(rr[0]), n)
    if sa[0] == "plane" and sb[0] == "plane":
        line = _plane_plane_line(sa[1], sa[2], sb[1], sb[2], 3)
        if line is None:
            return None
        return ("line", line[0], line[1])
    if sa[0] == "plane":
        sa, sb = sb, sa
    n, d = sb[1], sb[2]
    cc, rr, ok = _sphere_plane_circle(sa[1][None, :], np.array([sa[2]]),
                                      np.broadcast_to(n, (1, 3)).copy(),
                                      np.array([d]))
    if not ok[0]:
        return None
    return ("circle", cc[0], float(rr[0]), np.asarray(n, dtype=float))
