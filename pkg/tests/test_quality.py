import math

import numpy as np
import pytest

from frontmesh.errors import GeometryError, ValidationError
from frontmesh.quality import (
    ElementClass,
    InsertionMode,
    PlacementMode,
    RefinementConfig,
    classify,
    measure,
    queue_key,
    smallest_facet,
)


EQUILATERAL = ((0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2))
# Regular tetrahedron with side sqrt(2).
REGULAR_TET = ((1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0))


def test_measure_equilateral():
    m = measure(EQUILATERAL)
    assert m.rho == pytest.approx(1 / math.sqrt(3))
    assert m.shortest_edge == pytest.approx(1.0)
    assert m.min_angle_deg == pytest.approx(60.0)
    assert m.sigma is None


def test_measure_right_triangle():
    m = measure(((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)))
    assert m.rho == pytest.approx(math.sqrt(2) / 2)
    assert m.shortest_pair == (0, 1)  # tie with (0,2) broken lexicographically
    assert m.min_angle_deg == pytest.approx(45.0)
    assert m.circumcenter == pytest.approx((0.5, 0.5))


def test_measure_regular_tet():
    side = math.sqrt(2) * 2  # edge length of REGULAR_TET
    m = measure(REGULAR_TET)
    assert m.shortest_edge == pytest.approx(side)
    # R/l = sqrt(6)/4 for the regular tetrahedron.
    assert m.rho == pytest.approx(math.sqrt(6) / 4)
    # V = l^3 / (6 sqrt(2)) so sigma = 1/(6 sqrt(2)).
    assert m.sigma == pytest.approx(1 / (6 * math.sqrt(2)))
    assert m.min_dihedral_deg == pytest.approx(math.degrees(math.acos(1 / 3)))


def test_rho_lower_bounds():
    # rho >= 1/sqrt(3) in 2D and >= sqrt(6)/4 in 3D, equality at regular.
    rng = np.random.default_rng(5)
    for _ in range(2000):
        tri = [tuple(p) for p in rng.random((3, 2))]
        try:
            m = measure(tri)
        except GeometryError:
            continue
        assert m.rho >= 1 / math.sqrt(3) - 1e-12
    for _ in range(2000):
        tet = [tuple(p) for p in rng.random((4, 3))]
        try:
            m = measure(tet)
        except GeometryError:
            continue
        assert m.rho >= math.sqrt(6) / 4 - 1e-12


def test_degenerate_measure_raises_and_classifies_large_rho():
    flat = ((0.0, 0.0), (1.0, 1.0), (2.0, 2.0))
    with pytest.raises(GeometryError):
        measure(flat)
    cfg = RefinementConfig.defaults_2d()
    assert classify(flat, cfg) is ElementClass.LARGE_RHO


def test_classify_2d():
    cfg = RefinementConfig.defaults_2d()
    assert classify(EQUILATERAL, cfg) is ElementClass.GOOD
    skinny = ((0.0, 0.0), (1.0, 0.0), (0.5, 0.02))
    assert classify(skinny, cfg) is ElementClass.LARGE_RHO


def test_classify_3d_sliver():
    cfg = RefinementConfig.defaults_3d()
    assert classify(REGULAR_TET, cfg) is ElementClass.GOOD
    # Four near-coplanar well-spaced vertices: rho stays small, sigma tiny.
    eps = 1e-4
    sliver = ((0.0, 0.0, 0.0), (1.0, 0.0, eps), (1.0, 1.0, 0.0), (0.0, 1.0, eps))
    m = measure(sliver)
    assert m.rho <= cfg.rho_star
    assert m.sigma < cfg.sigma_star
    assert classify(sliver, cfg) is ElementClass.SLIVER
    needle = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.5, 0.5, 0.001))
    assert classify(needle, cfg) is ElementClass.LARGE_RHO


def test_smallest_facet_regular_tet_ties():
    assert smallest_facet(REGULAR_TET) == (0, 1, 2)


def test_smallest_facet_picks_short_adjacent_edge():
    a, b = (0.0, 0.0, 0.0), (0.1, 0.0, 0.0)      # shortest edge (0,1)
    c, d = (0.0, 0.3, 0.0), (0.0, 0.0, 0.2)      # ad shorter than ac
    assert smallest_facet((a, b, c, d)) == (0, 1, 3)
    c2, d2 = (0.0, 0.2, 0.0), (0.0, 0.0, 0.3)
    assert smallest_facet((a, b, c2, d2)) == (0, 1, 2)


def test_queue_key():
    assert queue_key(0.5, 1.2) == 0.5
    assert queue_key(0.5, 1.2, [0.3]) == pytest.approx(0.25)
    assert queue_key(0.5, 1.2, [0.9, 0.3]) == pytest.approx(0.25)
    assert queue_key(0.1, 1.2, [0.9]) == pytest.approx(0.1)


def test_config_defaults_and_validation():
    c2 = RefinementConfig.defaults_2d()
    c2.validate()
    assert c2.rho_star == pytest.approx(math.sqrt(5) / 2)
    assert c2.alpha == pytest.approx(1.05)
    assert c2.beta == pytest.approx(2 * c2.rho_star)
    assert c2.gamma_eff == pytest.approx(c2.alpha)
    c3 = RefinementConfig.defaults_3d()
    c3.validate()
    assert c3.rho_star == 2.0
    assert c3.sigma_star == 0.01
    assert c3.alpha == 1.2

    with pytest.raises(ValidationError):
        RefinementConfig(rho_star=1.0).validate()
    with pytest.raises(ValidationError):
        RefinementConfig(rho_star=2.0, alpha=2.5).validate()
    with pytest.raises(ValidationError):
        RefinementConfig(rho_star=2.0, alpha=1.2, gamma=1.0).validate()
    with pytest.raises(ValidationError):
        RefinementConfig(rho_star=2.0, alpha=1.2, gamma=5.0).validate()
    with pytest.raises(ValidationError):
        RefinementConfig(sigma_star=0.0).validate()
    with pytest.raises(ValidationError):
        RefinementConfig(max_insertions=0).validate()
    # gamma may sit anywhere in [alpha, beta]
    RefinementConfig(rho_star=2.0, alpha=1.2, gamma=4.0).validate()
    assert PlacementMode("distance") is PlacementMode.DISTANCE
    assert InsertionMode("multi") is InsertionMode.MULTI
