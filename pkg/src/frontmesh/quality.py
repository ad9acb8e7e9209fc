"""Element quality measures, classification, and refinement configuration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GeometryError, ValidationError
from .predicates import Sign, circumsphere, dist, orient, simplex_volume


class ElementClass(enum.Enum):
    GOOD = "good"
    LARGE_RHO = "large_rho"
    SLIVER = "sliver"


class PlacementMode(str, enum.Enum):
    DISTANCE = "distance"
    ANGLE = "angle"
    CIRCUMCENTER = "circumcenter"


class InsertionMode(str, enum.Enum):
    SINGLE = "single"
    MULTI = "multi"


class Ordering(str, enum.Enum):
    SHORTEST_FIRST = "shortest-first"
    FIFO = "fifo"


@dataclass
class RefinementConfig:
    """Knobs of the refinement loop.

    rho_star bounds the radius-edge ratio, sigma_star the volume-edge ratio
    below which a tetrahedron counts as a sliver.  alpha scales the picking
    region, gamma the advancing-front boundary placement distance.  beta is
    derived: it is the stage-growth factor 2 * rho_star (any point of a petal
    or snow globe is within that factor of the driving shortest edge).
    """

    rho_star: float = 2.0
    sigma_star: float = 0.01
    alpha: float = 1.2
    gamma: float | None = None
    placement: PlacementMode = PlacementMode.DISTANCE
    insertion: InsertionMode = InsertionMode.SINGLE
    ordering: Ordering = Ordering.SHORTEST_FIRST
    preprocess: bool = True
    classic_boundary: bool = False
    max_insertions: int = 1_000_000
    multi_batch: int = 64

    @property
    def beta(self) -> float:
        return 2.0 * self.rho_star

    @property
    def gamma_eff(self) -> float:
        return self.alpha if self.gamma is None else self.gamma

    @classmethod
    def defaults_2d(cls, **kw) -> "RefinementConfig":
        base = cls(rho_star=math.sqrt(5) / 2, alpha=1.05)
        return replace(base, **kw)

    @classmethod
    def defaults_3d(cls, **kw) -> "RefinementConfig":
        base = cls(rho_star=2.0, sigma_star=0.01, alpha=1.2)
        return replace(base, **kw)

    @classmethod
    def defaults_for(cls, dim: int, **kw) -> "RefinementConfig":
        if dim == 2:
            return cls.defaults_2d(**kw)
        return cls.defaults_3d(**kw)

    def validate(self) -> None:
        if not self.rho_star > 1.0:
            raise ValidationError("rho_star must exceed 1")
        if not self.sigma_star > 0.0:
            raise ValidationError("sigma_star must be positive")
        if not 1.0 < self.alpha < self.rho_star:
            raise ValidationError(
                "alpha must satisfy 1 < alpha < rho_star (got alpha=%g, "
                "rho_star=%g)" % (self.alpha, self.rho_star))
        g = self.gamma_eff
        if not self.alpha <= g <= self.beta:
            raise ValidationError(
                "gamma must satisfy alpha <= gamma <= beta (got %g)" % g)
        if self.max_insertions < 1:
            raise ValidationError("max_insertions must be at least 1")
        if self.multi_batch < 1:
            raise ValidationError("multi_batch must be at least 1")


@dataclass(frozen=True)
class QualityMeasures:
    """Shape measures of one simplex.

    sigma and min_dihedral_deg are None in 2D; min_angle_deg is None in 3D.
    """

    rho: float
    sigma: float | None
    shortest_edge: float
    shortest_pair: tuple[int, int]
    circumcenter: tuple
    circumradius: float
    min_angle_deg: float | None = None
    min_dihedral_deg: float | None = None


def _edges(k: int):
    return [(i, j) for i in range(k) for j in range(i + 1, k)]


def measure(points) -> QualityMeasures:
    """Quality measures of a non-degenerate triangle or tetrahedron."""
    k = len(points)
    if k not in (3, 4):
        raise ValidationError("measure expects 3 or 4 points")
    if orient(points) is Sign.ZERO:
        raise GeometryError("degenerate element")
    lengths = {(i, j): dist(points[i], points[j]) for i, j in _edges(k)}
    shortest_pair = min(lengths, key=lambda e: (lengths[e], e))
    l_min = lengths[shortest_pair]
    center, radius = circumsphere(points)
    rho = radius / l_min
    if k == 3:
        return QualityMeasures(
            rho=rho, sigma=None, shortest_edge=l_min,
            shortest_pair=shortest_pair, circumcenter=center,
            circumradius=radius, min_angle_deg=_min_angle_deg(points))
    vol = simplex_volume(points)
    sigma = vol / l_min ** 3
    return QualityMeasures(
        rho=rho, sigma=sigma, shortest_edge=l_min,
        shortest_pair=shortest_pair, circumcenter=center,
        circumradius=radius, min_dihedral_deg=_min_dihedral_deg(points))


def _min_angle_deg(points) -> float:
    best = 180.0
    for i in range(3):
        p = np.asarray(points[i], dtype=float)
        u = np.asarray(points[(i + 1) % 3], dtype=float) - p
        w = np.asarray(points[(i + 2) % 3], dtype=float) - p
        c = float(np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w)))
        best = min(best, math.degrees(math.acos(max(-1.0, min(1.0, c)))))
    return best


def _min_dihedral_deg(points) -> float:
    pts = [np.asarray(p, dtype=float) for p in points]
    best = 360.0
    for i, j in _edges(4):
        others = [k for k in range(4) if k not in (i, j)]
        e = pts[j] - pts[i]
        e = e / np.linalg.norm(e)
        wedges = []
        for k in others:
            w = pts[k] - pts[i]
            w = w - np.dot(w, e) * e
            n = np.linalg.norm(w)
            if n == 0:
                return 0.0
            wedges.append(w / n)
        c = float(np.clip(np.dot(wedges[0], wedges[1]), -1.0, 1.0))
        best = min(best, math.degrees(math.acos(c)))
    return best


def classify_measures(m: QualityMeasures, config: RefinementConfig) -> ElementClass:
    if m.rho > config.rho_star:
        return ElementClass.LARGE_RHO
    if m.sigma is not None and m.sigma < config.sigma_star:
        return ElementClass.SLIVER
    return ElementClass.GOOD


def classify(points, config: RefinementConfig) -> ElementClass:
    """GOOD / LARGE_RHO / SLIVER; degenerate elements count as LARGE_RHO."""
    try:
        m = measure(points)
    except GeometryError:
        return ElementClass.LARGE_RHO
    return classify_measures(m, config)


def smallest_facet(points) -> tuple[int, int, int]:
    """The facet of a tetrahedron spanned by the globally shortest edge and
    the shortest edge adjacent to it.  Returns vertex positions (0..3),
    sorted; ties broken lexicographically.
    """
    if len(points) != 4:
        raise ValidationError("smallest_facet expects a tetrahedron")
    lengths = {(i, j): dist(points[i], points[j]) for i, j in _edges(4)}
    e0 = min(lengths, key=lambda e: (lengths[e], e))
    adjacent = [e for e in lengths
                if e != e0 and (e[0] in e0 or e[1] in e0)]
    e1 = min(adjacent, key=lambda e: (lengths[e], e))
    facet = tuple(sorted(set(e0) | set(e1)))
    return facet


def queue_key(l_min: float, alpha: float, encroached_l_mids=()) -> float:
    """Effective length driving the refinement queue.

    l_min is the element's shortest edge; encroached_l_mids holds, for every
    boundary feature the element's tentative Steiner point would encroach,
    half the segment length (2D) or the subfacet circumradius (3D).
    """
    l_eff = l_min
    for l_mid in encroached_l_mids:
        l_eff = min(l_eff, l_mid / alpha)
    return l_eff
