"""Geodesic triangle thinness, fat-triangle scans, four-point delta and balls surrounded by fat triangles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import errors
from .space import REL_TOL, Geodesic, MetricSurface
from .surrounding import region_reach

FAT, THIN = "FAT", "THIN"
DEFAULT_BUDGET = 5000
M_SWEEP = (4.0, 10.0, 25.0)


@dataclass(frozen=True)
class Triangle:
    corners: tuple[int, int, int]
    edges: tuple[Geodesic, Geodesic, Geodesic]  # edges[i] joins corners[i] and corners[i+1]
    delta: float

    @property
    def perimeter(self) -> float:
        return sum(e.length for e in self.edges)

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset().union(*(e.vertices for e in self.edges))

    def edge_pairs(self) -> list[tuple[int, int]]:
        out = []
        for e in self.edges:
            out.extend(zip(e.waypoints, e.waypoints[1:]))
        return out


def _side(space: MetricSurface, a: int, b: int) -> Geodesic:
    # one geodesic per unordered pair, so thinness does not depend on corner order
    return space.geodesic(min(a, b), max(a, b))


def _thinness_of(space: MetricSurface, edges: Sequence[Geodesic]) -> float:
    delta = 0.0
    for i, e in enumerate(edges):
        others = set()
        for j, g in enumerate(edges):
            if j != i:
                others |= g.vertices
        inner = [v for v in e.waypoints if v not in others]
        if not inner:
            continue
        d = space.multi_source_distance(others)
        delta = max(delta, float(d[inner].max()))
    return delta


def make_triangle(space: MetricSurface, a: int, b: int, c: int) -> Triangle:
    """Triangle on three corners with the deterministic geodesic per pair and its thinness."""
    space.require_geodesic("geodesic triangles")
    a, b, c = (space.check_vertex(v) for v in (a, b, c))
    edges = (_side(space, a, b), _side(space, b, c), _side(space, c, a))
    return Triangle((a, b, c), edges, _thinness_of(space, edges))


def thinness(space: MetricSurface, triangle: Triangle | Sequence[int]) -> float:
    """Largest distance from a waypoint of one edge to the union of the other two edges."""
    if isinstance(triangle, Triangle):
        return _thinness_of(space, triangle.edges)
    if len(triangle) != 3:
        raise errors.InputError("a triangle needs three corners")
    return make_triangle(space, *triangle).delta


@dataclass(frozen=True)
class ScanResult:
    triangle: Triangle | None
    certificate: str  # "found", "exhaustive", "sampled(n)" or "resolution-floor"
    checked: int
    max_delta: float
    threshold: float
    seed: int | None = None


def fat_triangle_scan(
    space: MetricSurface,
    center: int,
    r: float,
    M: float,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> ScanResult:
    """First triangle with corners in ball(center, r) whose thinness exceeds r / M.

    All corner triples are tried in lexicographic order when there are at most
    ``budget`` of them; otherwise ``budget`` distinct triples are drawn with
    ``numpy.random.default_rng(seed)``.  Below twice the longest edge meeting
    the ball no triangle can be fat and the scan stops at once.
    """
    space.require_geodesic("fat_triangle_scan")
    if not M > 1:
        raise errors.BadParameters(f"M must exceed 1, got {M}")
    if r < 0:
        raise errors.NegativeRadius(f"negative radius {r}")
    if budget < 1:
        raise errors.BadParameters("budget must be positive")
    threshold = r / M
    pts = sorted(space.ball(center, r))
    if r < 2 * _local_mesh(space, pts) * (1 - REL_TOL):
        return ScanResult(None, "resolution-floor", 0, 0.0, threshold)
    total = math.comb(len(pts), 3)
    exhaustive = total <= budget
    if exhaustive:
        triples = itertools.combinations(pts, 3)
        used_seed = None
    else:
        triples = _sample_triples(pts, budget, seed)
        used_seed = seed
    checked, max_delta = 0, 0.0
    for t in triples:
        tri = make_triangle(space, *t)
        checked += 1
        max_delta = max(max_delta, tri.delta)
        if tri.delta > threshold * (1 + REL_TOL):
            return ScanResult(tri, "found", checked, max_delta, threshold, used_seed)
    cert = "exhaustive" if exhaustive else f"sampled({checked})"
    return ScanResult(None, cert, checked, max_delta, threshold, used_seed)


def _local_mesh(space: MetricSurface, vertices: Sequence[int]) -> float:
    """Longest edge meeting the given vertices: the resolution of the space there."""
    return max((space.weight[(v, u)] for v in vertices for u in space.neighbors[v]), default=0.0)


def _sample_triples(pts: Sequence[int], count: int, seed: int):
    rng = np.random.default_rng(seed)
    seen = set()
    attempts = 0
    while len(seen) < count and attempts < 20 * count:
        attempts += 1
        t = tuple(sorted(int(v) for v in rng.choice(pts, 3, replace=False)))
        if t in seen:
            continue
        seen.add(t)
        yield t


def four_point_delta(space: MetricSurface, quadruples: Iterable[Sequence[int]]) -> float:
    """Largest four-point defect: half the gap between the two largest pairwise sums."""
    quads = []
    for q in quadruples:
        q = tuple(space.check_vertex(v) for v in q)
        if len(q) != 4 or len(set(q)) != 4:
            raise errors.BadParameters(f"quadruple {q} must have four distinct vertices")
        quads.append(q)
    if not quads:
        return 0.0
    verts = sorted({v for q in quads for v in q})
    col = {v: i for i, v in enumerate(verts)}
    D = space.dist_rows(verts)[:, verts]
    worst = 0.0
    for x, y, z, w in quads:
        x, y, z, w = col[x], col[y], col[z], col[w]
        s = sorted((D[x, y] + D[z, w], D[x, z] + D[y, w], D[x, w] + D[y, z]))
        worst = max(worst, (s[2] - s[1]) / 2)
    return float(worst)


def all_quadruples(vertices: Iterable[int]):
    return itertools.combinations(sorted(set(vertices)), 4)


@dataclass(frozen=True)
class SurroundedBall:
    center: int
    radius: float  # the open ball of this radius misses the triangle
    members: frozenset[int]
    component: frozenset[int]
    required: float  # R / 10
    surrounded: bool


def surrounded_ball_from_fat_triangle(space: MetricSurface, triangle: Triangle, R: float) -> SurroundedBall:
    """Largest ball inside a bounded complementary component of the triangle's edge union.

    Needs thinness > R.  The components are taken in the surface with the
    triangle's vertices and traversed edges removed; a component is bounded
    when it cannot reach the outer face.  The ball is centered at a vertex of
    a bounded component farthest from the triangle.
    """
    space.require_embedding()
    if not triangle.delta > R * (1 + REL_TOL) or R < 0:
        raise errors.NotFatEnough(f"thinness {triangle.delta} does not exceed R = {R}")
    tv = triangle.vertices
    te = triangle.edge_pairs()
    d_tri = space.multi_source_distance(tv)
    best = None
    seen: set[int] = set()
    for v in range(space.n):
        if v in tv or v in seen:
            continue
        comp, escaped = region_reach(space, tv, te, [v])
        seen |= comp
        if escaped:
            continue
        c = max(comp, key=lambda u: (d_tri[u], -u))
        if best is None or (d_tri[c], -c) > (d_tri[best[0]], -best[0]):
            best = (c, frozenset(comp))
    if best is None:
        raise errors.NoBoundedComponent("the triangle bounds no region at this resolution")
    c, comp = best
    radius = float(d_tri[c])
    d = space.dist_from(c)
    members = frozenset(np.flatnonzero(d < radius * (1 - REL_TOL)).tolist())
    ok = members <= comp and not (members & tv)
    return SurroundedBall(c, radius, members, comp, R / 10, ok and radius >= R / 10 * (1 - REL_TOL))


@dataclass(frozen=True)
class ScaleClass:
    radius: float
    M: float
    classification: str
    certificate: str
    delta: float  # thinness of the witness (FAT) or the largest thinness seen (THIN)
    witness: tuple[int, int, int] | None
    checked: int

    @property
    def delta_over_r(self) -> float:
        return self.delta / self.radius if self.radius > 0 else 0.0


@dataclass
class DichotomyReport:
    center: int
    rows: list[ScaleClass] = field(default_factory=list)

    def classes(self, M: float | None = None) -> list[str]:
        return [row.classification for row in self.rows if M is None or row.M == M]


def dichotomy_scan(
    space: MetricSurface,
    center: int,
    radii: Sequence[float],
    M: float | Sequence[float] = 10.0,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> DichotomyReport:
    """Classify every radius as FAT (an r/M-fat triangle exists in the ball) or THIN."""
    Ms = [float(M)] if np.isscalar(M) else [float(m) for m in M]
    report = DichotomyReport(space.check_vertex(center))
    for m in Ms:
        for r in radii:
            res = fat_triangle_scan(space, center, r, m, budget=budget, seed=seed)
            if res.triangle is not None:
                row = ScaleClass(float(r), m, FAT, res.certificate, res.triangle.delta, res.triangle.corners, res.checked)
            else:
                row = ScaleClass(float(r), m, THIN, res.certificate, res.max_delta, None, res.checked)
            report.rows.append(row)
    return report
