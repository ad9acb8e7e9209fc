"""Region construction and membership, cross-checked against independent
oracles: direct circumsphere computation, tetrahedron quality measures, a
brute-force triple enumeration, and a 2D petal projection."""

import itertools
import math
import types

import numpy as np
import pytest

from frontmesh import regions as rg
from frontmesh.errors import FeasibleRegionEmpty, GeometryError, ValidationError
from frontmesh.predicates import circumsphere, dist, orient, Sign
from frontmesh.quality import (ElementClass, QualityMeasures, RefinementConfig,
                               classify_measures, measure)

RNG = np.random.default_rng(4207)

EQUILATERAL_3D = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.5, math.sqrt(3) / 2, 0.0))
_CFG3 = RefinementConfig(rho_star=2.0, sigma_star=0.01, alpha=1.2)


def synthetic_measures(rho, l, center):
    return QualityMeasures(rho=rho, sigma=None, shortest_edge=l,
                           shortest_pair=(0, 1), circumcenter=center,
                           circumradius=rho * l)


# ---------------------------------------------------------------------------
# picking region


def test_picking_region_radius():
    cfg = RefinementConfig(rho_star=2.0, alpha=1.5)
    ball = rg.picking_region(None, cfg, synthetic_measures(3.0, 2.0, (1.0, 2.0)))
    assert ball.center == (1.0, 2.0)
    assert ball.radius == pytest.approx(3.0, abs=0.0)

    cfg = RefinementConfig(rho_star=2.0, alpha=1.0)
    ball = rg.picking_region(None, cfg, synthetic_measures(2.0, 1.0, (0.0, 0.0)))
    assert ball.radius == pytest.approx(1.0, abs=0.0)


def test_picking_region_empty_at_alpha():
    cfg = RefinementConfig(rho_star=2.0, alpha=1.5)
    with pytest.raises(FeasibleRegionEmpty):
        rg.picking_region(None, cfg, synthetic_measures(1.5, 1.0, (0.0, 0.0)))


def test_picking_region_inside_circumsphere():
    tri = ((0.0, 0.0), (4.0, 0.0), (0.2, 0.6))
    m = measure(tri)
    cfg = RefinementConfig(rho_star=math.sqrt(5) / 2, alpha=1.05)
    assert m.rho > cfg.alpha
    ball = rg.picking_region(tri, cfg)
    assert ball.center == m.circumcenter
    for _ in range(500):
        u = RNG.normal(size=2)
        u /= np.linalg.norm(u)
        p = np.asarray(ball.center) + RNG.uniform(0, ball.radius) * u
        assert dist(p, m.circumcenter) <= m.circumradius


# ---------------------------------------------------------------------------
# petal


def test_petal_center_offset():
    disk = rg.petal(((0.0, 0.0), (1.0, 0.0)), 1.0, (0.5, 3.0))
    assert disk.radius == pytest.approx(1.0, abs=0.0)
    assert disk.center[0] == pytest.approx(0.5, abs=1e-15)
    assert disk.center[1] == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    for endpoint in ((0.0, 0.0), (1.0, 0.0)):
        assert abs(disk.margin(endpoint)) < 1e-12


def test_petal_degenerate_offset():
    disk = rg.petal(((0.0, 0.0), (1.0, 0.0)), 0.5, (0.5, -1.0))
    assert disk.center == pytest.approx((0.5, 0.0), abs=1e-15)
    assert disk.radius == pytest.approx(0.5, abs=0.0)


def test_petal_side_follows_hint():
    below = rg.petal(((0.0, 0.0), (1.0, 0.0)), 1.0, (0.5, -3.0))
    assert below.center[1] == pytest.approx(-math.sqrt(3) / 2, abs=1e-15)


def test_petal_errors():
    with pytest.raises(ValidationError):
        rg.petal(((0.0, 0.0), (1.0, 0.0)), 0.4, (0.5, 1.0))
    with pytest.raises(GeometryError):
        rg.petal(((0.0, 0.0), (1.0, 0.0)), 1.0, (0.7, 0.0))
    with pytest.raises(GeometryError):
        rg.petal(((0.0, 0.0), (0.0, 0.0)), 1.0, (0.5, 1.0))


# ---------------------------------------------------------------------------
# snow globe


def test_snow_globe_equilateral():
    globe = rg.snow_globe(EQUILATERAL_3D, (0.5, 0.3, 1.0), 2.0)
    assert globe is not None
    assert globe.radius == pytest.approx(2.0, abs=0.0)
    cc, y = circumsphere(EQUILATERAL_3D)
    offset = np.asarray(globe.center) - np.asarray(cc)
    assert offset[:2] == pytest.approx((0.0, 0.0), abs=1e-12)
    assert offset[2] == pytest.approx(math.sqrt(4.0 - 1.0 / 3.0), abs=1e-12)
    # all three facet vertices lie on the globe boundary
    for p in EQUILATERAL_3D:
        assert abs(dist(p, globe.center) - globe.radius) < 1e-10


def test_snow_globe_side_follows_fourth_vertex():
    globe = rg.snow_globe(EQUILATERAL_3D, (0.5, 0.3, -1.0), 2.0)
    assert globe.center[2] < 0


def test_snow_globe_none_for_bad_facet():
    skinny = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.5, 0.02, 0.0))
    cc, y = circumsphere(skinny)
    l = min(dist(skinny[i], skinny[j]) for i in range(3) for j in range(i + 1, 3))
    assert y / l > 2.0
    assert rg.snow_globe(skinny, (0.5, 0.0, 1.0), 2.0) is None


def test_snow_globe_boundary_ratio():
    cc, y = circumsphere(EQUILATERAL_3D)
    ratio = y / 1.0
    globe = rg.snow_globe(EQUILATERAL_3D, (0.5, 0.3, 1.0), ratio)
    assert globe is not None
    assert np.asarray(globe.center) == pytest.approx(np.asarray(cc), abs=1e-12)
    assert globe.radius == pytest.approx(y, rel=1e-12)


def test_snow_globe_degenerate_raises():
    flat = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (2.0, 0.0, 0.0))
    with pytest.raises(GeometryError):
        rg.snow_globe(flat, (0.0, 1.0, 0.0), 2.0)


# ---------------------------------------------------------------------------
# forbidden region


def test_forbidden_region_fields():
    fr = rg.forbidden_region(EQUILATERAL_3D, 2.0, 0.01)
    assert fr.slab_half_height == pytest.approx(0.03 / (math.sqrt(3) / 4),
                                                rel=1e-12)
    assert fr.cap_radius == pytest.approx(2.0, abs=0.0)
    assert fr.sphere_pair is not None
    (c1, r1), (c2, r2) = fr.sphere_pair
    assert r1 == r2 == fr.cap_radius
    # both spheres pass through the base circumcircle
    for c in (c1, c2):
        for p in EQUILATERAL_3D:
            assert abs(dist(p, c) - fr.cap_radius) < 1e-10
    assert np.dot(np.asarray(c1) - np.asarray(c2), fr.normal) != 0.0


def test_forbidden_region_point_above_centroid_is_cap_not_sliver():
    # A point slightly above the centroid forms a flat tetrahedron with a
    # huge circumsphere, not a sliver; it must lie outside.
    fr = rg.forbidden_region(EQUILATERAL_3D, 2.0, 0.01)
    centroid = np.mean(np.asarray(EQUILATERAL_3D), axis=0)
    p = tuple(centroid + (0.0, 0.0, 0.05))
    cc4, r4 = circumsphere(EQUILATERAL_3D + (p,))
    assert r4 > 3.0
    assert not fr.contains(p)
    m = measure(EQUILATERAL_3D + (p,))
    assert classify_measures(m, _CFG3) is not ElementClass.SLIVER


def test_forbidden_region_far_point_outside():
    fr = rg.forbidden_region(EQUILATERAL_3D, 2.0, 0.01)
    centroid = np.mean(np.asarray(EQUILATERAL_3D), axis=0)
    assert not fr.contains(tuple(centroid + (0.0, 0.0, 1.0)))


def test_forbidden_region_near_base_vertex_outside():
    fr = rg.forbidden_region(EQUILATERAL_3D, 2.0, 0.01)
    p = (0.05, 0.0, 0.05)
    m = measure(EQUILATERAL_3D + (p,))
    assert m.rho > 2.0
    assert not fr.contains(p)


def test_forbidden_region_empty_when_cap_below_circumradius():
    fr = rg.forbidden_region(EQUILATERAL_3D, 0.3, 0.01)
    assert fr.empty
    assert not fr.contains((0.5, 0.3, 0.01))
    assert fr.contains_batch(RNG.normal(size=(32, 3))).sum() == 0


def test_forbidden_region_degenerate_raises():
    with pytest.raises(GeometryError):
        rg.forbidden_region(((0, 0, 0), (1, 0, 0), (2, 0, 0)), 2.0, 0.01)


def _random_base(scale=1.0):
    while True:
        pts = RNG.uniform(-1, 1, size=(3, 3)) * scale
        a = np.linalg.norm(np.cross(pts[1] - pts[0], pts[2] - pts[0])) / 2
        lmax = max(np.linalg.norm(pts[i] - pts[j])
                   for i in range(3) for j in range(i + 1, 3))
        if a > 0.1 * lmax ** 2:
            return tuple(tuple(p) for p in pts)


def _sample_near_circle(fr, n):
    """Points biased toward the base circumcircle, where slivers live."""
    cc = np.asarray(fr.circumcenter)
    nrm = np.asarray(fr.normal)
    e1 = np.asarray(fr.base_points[0]) - cc
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nrm, e1)
    theta = RNG.uniform(0, 2 * math.pi, size=n)
    radial = fr.circumradius * RNG.uniform(0.7, 1.3, size=n)
    height = RNG.uniform(-1, 1, size=n) * fr.slab_half_height
    return (cc + radial[:, None] * (np.cos(theta)[:, None] * e1 +
                                    np.sin(theta)[:, None] * e2)
            + height[:, None] * nrm)


def test_forbidden_membership_implies_sliver():
    # every member point forms a sliver with the base (tetrahedron quality
    # measures as the oracle); collect 1000 members across several bases
    rho_star, sigma_star = 2.0, 0.01
    bases = [EQUILATERAL_3D, _random_base(), _random_base(0.3), _random_base(5.0)]
    checked = 0
    for base in bases:
        fr = rg.forbidden_region(base, rho_star, sigma_star)
        if fr.empty:
            continue
        pts = _sample_near_circle(fr, 40_000)
        members = pts[fr.contains_batch(pts)]
        assert len(members) > 0
        for p in members[:400]:
            tet = base + (tuple(p),)
            if orient(tet) is Sign.ZERO:
                continue
            m = measure(tet)
            assert classify_measures(m, _CFG3) is ElementClass.SLIVER
            checked += 1
    assert checked >= 1000


def test_forbidden_membership_equals_tet_sliver_condition():
    # two-way agreement away from the decision boundary
    rho_star, sigma_star = 2.0, 0.01
    base = EQUILATERAL_3D
    fr = rg.forbidden_region(base, rho_star, sigma_star)
    pts = _sample_near_circle(fr, 4000)
    pts = np.concatenate([pts, RNG.uniform(-1.5, 2.5, size=(4000, 3))])
    member = fr.contains_batch(pts)
    for p, inside in zip(pts, member):
        tet = base + (tuple(p),)
        if orient(tet) is Sign.ZERO:
            continue
        m = measure(tet)
        if abs(m.rho - rho_star) < 1e-6 or abs(m.sigma - sigma_star) < 1e-9:
            continue
        expect = m.rho <= rho_star and m.sigma < sigma_star
        assert bool(inside) == expect


def test_forbidden_sphere_pair_is_circumradius_level_set():
    # points on either extreme sphere yield circumradius(p ∪ base) = cap
    for base in (EQUILATERAL_3D, _random_base()):
        fr = rg.forbidden_region(base, 2.0, 0.01)
        for center, radius in fr.sphere_pair:
            for _ in range(50):
                u = RNG.normal(size=3)
                u /= np.linalg.norm(u)
                p = tuple(np.asarray(center) + radius * u)
                try:
                    cc4, r4 = circumsphere(base + (p,))
                except GeometryError:
                    continue
                assert abs(r4 - fr.cap_radius) < 1e-8 * max(1.0, fr.cap_radius)


def test_forbidden_extent_contains_members():
    for base in (EQUILATERAL_3D, _random_base(), _random_base(4.0)):
        fr = rg.forbidden_region(base, 2.0, 0.01)
        ec, er = fr.extent()
        pts = _sample_near_circle(fr, 20_000)
        members = pts[fr.contains_batch(pts)]
        if len(members):
            d = np.linalg.norm(members - np.asarray(ec), axis=1)
            assert d.max() <= er + 1e-9


# ---------------------------------------------------------------------------
# enumerate_forbidden


class _FakeMesh:
    def __init__(self, points):
        self.verts = {i: types.SimpleNamespace(point=tuple(map(float, p)))
                      for i, p in enumerate(points)}

    def vertices_near(self, point, radius):
        return [v for v, r in self.verts.items()
                if dist(r.point, point) <= radius]


def _brute_forbidden(points, locale, cfg, l_drv, r_drv):
    center, loc_r = locale.bounding_sphere()
    gathered = [i for i, p in enumerate(points)
                if dist(p, center) <= 2 * cfg.rho_star * r_drv]
    out = []
    for tri in itertools.combinations(sorted(gathered), 3):
        pts = [points[i] for i in tri]
        short = min(dist(pts[a], pts[b]) for a in range(3) for b in range(a + 1, 3))
        if short >= cfg.rho_star * l_drv:
            continue
        try:
            fr = rg.forbidden_region(pts, cfg.rho_star, cfg.sigma_star,
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
        out.append(tri)
    return out


def test_enumerate_forbidden_matches_bruteforce():
    points = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.02), (-1.0, 0.1, -0.01),
              (0.1, -1.0, 0.0), (0.3, 0.4, 0.9)]
    mesh = _FakeMesh(points)
    cfg = RefinementConfig(rho_star=2.0, sigma_star=0.01, alpha=1.2)
    locale = rg.Region((rg.InsideSphere((0.0, 0.0, 0.1), 0.4),))
    got = rg.enumerate_forbidden(mesh, locale, cfg,
                                 driving_l_min=1.0, driving_circumradius=1.0)
    want = _brute_forbidden(points, locale, cfg, 1.0, 1.0)
    assert [f.base_ids for f in got] == want
    assert want, "test geometry should produce at least one region"
    again = rg.enumerate_forbidden(mesh, locale, cfg,
                                   driving_l_min=1.0, driving_circumradius=1.0)
    assert [f.base_ids for f in again] == want


def test_enumerate_forbidden_disjoint_locale():
    points = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.02), (-1.0, 0.1, -0.01),
              (0.1, -1.0, 0.0), (0.3, 0.4, 0.9)]
    mesh = _FakeMesh(points)
    cfg = RefinementConfig(rho_star=2.0, sigma_star=0.01, alpha=1.2)
    far = rg.Region((rg.InsideSphere((40.0, 40.0, 40.0), 0.4),))
    assert rg.enumerate_forbidden(mesh, far, cfg, driving_l_min=1.0,
                                  driving_circumradius=1.0) == []


def test_enumerate_forbidden_threshold_filter():
    # spread the cluster so every triangle's shortest side exceeds the
    # threshold; nothing qualifies even though the locale is inside
    points = [(4.0, 0.0, 0.0), (0.0, 4.0, 0.0), (-4.0, 0.0, 0.0),
              (0.0, -4.0, 0.0), (0.0, 0.0, 4.0)]
    mesh = _FakeMesh(points)
    cfg = RefinementConfig(rho_star=2.0, sigma_star=0.01, alpha=1.2)
    locale = rg.Region((rg.InsideSphere((0.0, 0.0, 0.0), 1.0),))
    got = rg.enumerate_forbidden(mesh, locale, cfg, driving_l_min=1.0,
                                 driving_circumradius=3.0)
    assert got == []


# ---------------------------------------------------------------------------
# encroachment


def test_encroaches_segment():
    seg = ((0.0, 0.0), (2.0, 0.0))
    assert rg.encroaches((1.0, 0.5), seg)
    assert not rg.encroaches((1.0, 1.5), seg)
    assert not rg.encroaches((1.0, 1.0), seg)  # on the ball boundary
    assert not rg.encroaches((2.0, 0.0), seg)  # endpoint


def test_encroaches_facet():
    assert rg.encroaches((0.5, math.sqrt(3) / 6, 0.1), EQUILATERAL_3D)
    assert not rg.encroaches((0.5, math.sqrt(3) / 6, 0.6), EQUILATERAL_3D)


def test_encroaches_arity():
    with pytest.raises(ValidationError):
        rg.encroaches((0.0, 0.0), ((0.0, 0.0),))


# ---------------------------------------------------------------------------
# spindle torus


def test_spindle_requires_sqrt2():
    with pytest.raises(ValidationError):
        rg.SpindleTorus((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 1.3)
    with pytest.raises(ValidationError):
        rg.spindle_torus(EQUILATERAL_3D, 1.0)


def test_spindle_picks_shortest_edge():
    facet = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.3, 0.8, 0.0))
    torus = rg.spindle_torus(facet, 1.5)
    assert torus.a == facet[0] and torus.b == facet[2]


def test_spindle_generator_plane_membership():
    torus = rg.SpindleTorus((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 1.5)
    assert torus.margin((0.5, 0.5, 0.0)) < 0          # inside
    assert torus.margin((3.0, 0.0, 0.0)) > 0          # axis beyond the tip
    assert abs(torus.margin((0.0, 0.0, 0.0))) < 1e-12  # endpoints on boundary
    assert abs(torus.margin((1.0, 0.0, 0.0))) < 1e-12


def test_spindle_matches_2d_petal_projection():
    a, b = (0.2, -0.4, 0.7), (1.1, 0.3, -0.2)
    rho = 1.6
    torus = rg.SpindleTorus(a, b, rho)
    l = torus.edge_length
    disk = rg.petal(((0.0, 0.0), (l, 0.0)), rho, (l / 2, 1.0))
    av, bv = np.asarray(a), np.asarray(b)
    axis = (bv - av) / l
    hits = 0
    for _ in range(1000):
        p = av + RNG.normal(scale=1.5 * l, size=3)
        w = p - av
        t = float(np.dot(w, axis))
        s = float(np.linalg.norm(w - t * axis))
        m2d = disk.margin((t, s))
        m3d = torus.margin(tuple(p))
        assert m3d == pytest.approx(m2d, abs=1e-9)
        if abs(m3d) > 1e-9:
            assert (m3d <= 0) == (m2d <= 0)
            hits += m3d <= 0
    assert hits > 0


def test_spindle_batch_agrees_with_scalar():
    torus = rg.SpindleTorus((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 1.5)
    pts = RNG.normal(scale=2.0, size=(256, 3))
    batch = torus.margin_batch(pts)
    for p, mb in zip(pts, batch):
        assert mb == pytest.approx(torus.margin(tuple(p)), abs=1e-12)


def test_spindle_picking_intersection_nonempty():
    # poor tetrahedra with rho >= sqrt(2): the circumcenter is a witness in
    # both the spindle torus and the picking region
    alpha = 1.05
    found = 0
    while found < 1000:
        tet = tuple(map(tuple, RNG.uniform(-1, 1, size=(4, 3))))
        if orient(tet) is Sign.ZERO:
            continue
        m = measure(tet)
        if m.rho < math.sqrt(2) + 1e-9:
            continue
        i, j = m.shortest_pair
        facet = tuple(tet[k] for k in range(4) if k != ({0, 1, 2, 3} - {i, j}).pop())
        torus = rg.spindle_torus(facet, m.rho)
        cfg = RefinementConfig(rho_star=2.0, alpha=alpha)
        ball = rg.picking_region(tet, cfg, m)
        witness = None
        for cand in [m.circumcenter] + [
                tuple(np.asarray(m.circumcenter) + RNG.normal(scale=0.1 * ball.radius, size=3))
                for _ in range(8)]:
            if torus.margin(cand) <= 1e-9 and ball.margin(cand) <= 1e-9:
                witness = cand
                break
        assert witness is not None
        found += 1


# ---------------------------------------------------------------------------
# primitives and regions


def test_boundary_sampling_consistency():
    # points constructed on each claimed boundary surface evaluate at the
    # membership threshold
    prims = [
        rg.InsideSphere((0.3, -0.2, 0.5), 1.7),
        rg.OutsideSphere((-1.0, 0.4, 0.0), 0.8),
        rg.Slab((0.0, 0.0, 0.0), (1.0, 2.0, -1.0), 0.25),
        rg.Halfspace((0.0, 3.0, 4.0), 1.2),
    ]
    for prim in prims:
        for _ in range(300):
            if prim.kind in ("inside_sphere", "outside_sphere"):
                u = RNG.normal(size=3)
                u /= np.linalg.norm(u)
                p = np.asarray(prim.center) + prim.radius * u
            elif prim.kind == "slab":
                n = np.asarray(prim.normal)
                t = RNG.normal(size=3)
                t -= np.dot(t, n) * n
                side = 1.0 if RNG.uniform() < 0.5 else -1.0
                p = np.asarray(prim.origin) + side * prim.half_width * n + t
            else:
                n = np.asarray(prim.normal)
                t = RNG.normal(size=3)
                t -= np.dot(t, n) * n
                p = prim.offset * n + t
            assert abs(prim.margin(tuple(p))) < 1e-8

    torus = rg.SpindleTorus((0.0, 0.0, 0.0), (0.0, 0.0, 2.0), 1.5)
    l = 2.0
    q = math.sqrt((1.5 * l) ** 2 - 1.0)
    for _ in range(300):
        theta = RNG.uniform(0, 2 * math.pi)
        s = q + 1.5 * l * math.sin(theta)
        if s < 0:
            continue
        t = l / 2 + 1.5 * l * math.cos(theta)
        phi = RNG.uniform(0, 2 * math.pi)
        p = (s * math.cos(phi), s * math.sin(phi), t)
        assert abs(torus.margin(p)) < 1e-8


def test_margin_batch_agreement():
    prims = [
        rg.InsideSphere((0.3, -0.2, 0.5), 1.7),
        rg.OutsideSphere((-1.0, 0.4, 0.0), 0.8),
        rg.Slab((0.1, 0.0, -0.3), (0.0, 1.0, 1.0), 0.4),
        rg.Halfspace((1.0, 1.0, 0.0), -0.5),
    ]
    pts = RNG.normal(size=(128, 3))
    for prim in prims:
        batch = prim.margin_batch(pts)
        for p, mb in zip(pts, batch):
            assert mb == pytest.approx(prim.margin(tuple(p)), abs=1e-12)


def test_region_conjunction():
    region = rg.Region((rg.InsideSphere((0.0, 0.0), 1.0),
                        rg.Slab((0.0, 0.0), (0.0, 1.0), 0.2)))
    assert region.contains((0.5, 0.1))
    assert not region.contains((0.5, 0.5))   # violates slab
    assert not region.contains((1.5, 0.0))   # violates sphere
    pts = RNG.uniform(-1.5, 1.5, size=(512, 2))
    batch = region.contains_batch(pts)
    for p, b in zip(pts, batch):
        assert bool(b) == region.contains(tuple(p))


def test_region_bounding_sphere():
    region = rg.Region((rg.InsideSphere((0.0, 0.0), 2.0),
                        rg.InsideSphere((0.5, 0.0), 0.7),
                        rg.OutsideSphere((0.0, 0.0), 0.1)))
    center, radius = region.bounding_sphere()
    assert center == (0.5, 0.0) and radius == 0.7
    with pytest.raises(GeometryError):
        rg.Region((rg.OutsideSphere((0.0, 0.0), 0.1),)).bounding_sphere()


def test_normals_are_normalized():
    slab = rg.Slab((0.0, 0.0, 0.0), (0.0, 0.0, 5.0), 1.0)
    assert slab.normal == (0.0, 0.0, 1.0)
    half = rg.Halfspace((0.0, 4.0, 0.0), 2.0)
    assert abs(np.linalg.norm(half.normal) - 1.0) < 1e-12
