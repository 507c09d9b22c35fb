"""Ramp test functions across a geodesic, their upper gradients and discrete (1, p)-Poincare ratios."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import errors
from .embedding import components_without
from .measures import AtomicMeasure
from .space import REL_TOL, Geodesic, MetricSurface

CONSISTENT = "CONSISTENT"
VIOLATION = "VIOLATION-SIGNAL"
INCONCLUSIVE = "INCONCLUSIVE"
SLOPE_TOLERANCE = 0.3
DEFAULT_LAMBDA = 2.0
EXHAUSTIVE_LIMIT = 200


@dataclass(frozen=True)
class TestFunctionPack:
    __test__ = False  # not a pytest class

    sigma: Geodesic
    epsilon: float
    signed_distance: dict[int, float]
    u: dict[int, float]
    rho: dict[int, float]
    side0: frozenset[int]  # negative side, left of sigma walking from start to end
    side1: frozenset[int]

    @property
    def region(self) -> frozenset[int]:
        return frozenset(self.signed_distance)

    @property
    def band(self) -> frozenset[int]:
        return frozenset(v for v, x in self.rho.items() if x > 0)


def ramp(delta: float, epsilon: float) -> float:
    """(delta + eps) / (2 eps) clamped to [0, 1]."""
    return min(1.0, max(0.0, (delta + epsilon) / (2 * epsilon)))


def _left_neighbours(space: MetricSurface, sigma: Sequence[int]) -> tuple[set[int], set[int]]:
    left, right = set(), set()
    on = set(sigma)
    for a, w, b in zip(sigma, sigma[1:], sigma[2:]):
        rot = space.rotation[w]
        k = len(rot)
        i, j = rot.index(b), rot.index(a)
        # counterclockwise from the outgoing edge to the incoming one is the left side
        step = 1
        while (i + step) % k != j:
            u = rot[(i + step) % k]
            if u not in on:
                left.add(u)
            step += 1
        step = 1
        while (j + step) % k != i:
            u = rot[(j + step) % k]
            if u not in on:
                right.add(u)
            step += 1
    return left, right


def build_pack(space: MetricSurface, sigma: Geodesic, epsilon: float, region: Iterable[int] | None = None) -> TestFunctionPack:
    """u = ramp of the signed distance to sigma, rho = 1/(2 eps) on the eps-band.

    ``region`` (default: every vertex) minus sigma must fall into exactly two
    components; the one on the left of sigma is the negative side.
    """
    space.require_geodesic("build_pack")
    space.require_embedding()
    if not epsilon > 0:
        raise errors.BadEpsilon(f"epsilon must be positive, got {epsilon}")
    wp = [space.check_vertex(v) for v in sigma.waypoints]
    members = set(range(space.n)) if region is None else {space.check_vertex(v) for v in region}
    on = set(wp) & members
    outside = set(range(space.n)) - members
    labels = components_without(space, on | outside)
    comps = sorted({int(labels[v]) for v in members - on})
    if len(comps) != 2:
        raise errors.SigmaDoesNotSeparate(f"the region minus sigma has {len(comps)} component(s), need two")
    left, right = _left_neighbours(space, wp)
    left_labels = {int(labels[v]) for v in left if v in members}
    right_labels = {int(labels[v]) for v in right if v in members}
    if len(left_labels) != 1 or left_labels == right_labels:
        raise errors.SigmaDoesNotSeparate("sigma does not have the two components on opposite sides")
    neg = left_labels.pop()
    side0 = frozenset(v for v in members - on if labels[v] == neg)
    side1 = frozenset(members - on - side0)
    d = space.multi_source_distance(wp)
    signed, u, rho = {}, {}, {}
    for v in sorted(members):
        s = -float(d[v]) if v in side0 else float(d[v])
        signed[v] = s
        u[v] = ramp(s, epsilon)
        rho[v] = 1 / (2 * epsilon) if abs(s) <= epsilon * (1 + REL_TOL) else 0.0
    return TestFunctionPack(sigma, float(epsilon), signed, u, rho, side0, side1)


def edge_gradient_integral(pack: TestFunctionPack, w: float, a: int, b: int) -> float:
    """Integral of the band density 1/(2 eps) over an edge of length w.

    Along the edge the distance to sigma is min(|delta(a)| + t, |delta(b)| + w - t),
    so the edge meets the band in at most two end pieces.
    """
    eps = pack.epsilon
    da, db = abs(pack.signed_distance[a]), abs(pack.signed_distance[b])
    inside = min(w, max(0.0, eps - da) + max(0.0, eps - db))
    return inside / (2 * eps)


def path_gradient_integral(space: MetricSurface, pack: TestFunctionPack, path: Sequence[int]) -> float:
    return sum(edge_gradient_integral(pack, space.weight[(a, b)], a, b) for a, b in zip(path, path[1:]))


@dataclass(frozen=True)
class GradientReport:
    passed: bool
    paths_checked: int
    edges_checked: int
    worst_slack: float  # min over checks of (integral - |du|)


def upper_gradient_report(space: MetricSurface, pack: TestFunctionPack, paths: Sequence | None = None) -> GradientReport:
    """Check |u(x) - u(y)| <= integral of rho along each path.

    Without explicit paths the check covers every edge inside the pack region
    and, for regions of at most 200 vertices, the chosen geodesic between
    every pair of region vertices.
    """
    region = pack.region
    checks = []
    if paths is None:
        for a in sorted(region):
            for b in space.neighbors[a]:
                if a < b and b in region:
                    checks.append((a, b))
        n_edges = len(checks)
        pts = sorted(region)
        if len(pts) <= EXHAUSTIVE_LIMIT:
            for i, x in enumerate(pts):
                for y in pts[i + 1:]:
                    checks.append(space.geodesic(x, y).waypoints)
    else:
        n_edges = 0
        for p in paths:
            checks.append(p.waypoints if isinstance(p, Geodesic) else tuple(p))
    worst = math.inf
    ok = True
    for path in checks:
        if any(v not in region for v in path):
            raise errors.InputError("path leaves the pack region")
        du = abs(pack.u[path[0]] - pack.u[path[-1]])
        slack = path_gradient_integral(space, pack, path) - du
        worst = min(worst, slack)
        if slack < -1e-9:
            ok = False
    return GradientReport(ok, len(checks) - n_edges, n_edges, worst if checks else 0.0)


def upper_gradient_check(space: MetricSurface, pack: TestFunctionPack, paths: Sequence | None = None) -> bool:
    return upper_gradient_report(space, pack, paths).passed


def _diameter(space: MetricSurface, vertices: Sequence[int]) -> float:
    if len(vertices) < 2:
        return 0.0
    return float(space.dist_rows(vertices)[:, vertices].max())


@dataclass(frozen=True)
class PoincareRatio:
    lhs: float
    rhs: float
    ratio: float


def poincare_ratio(
    space: MetricSurface,
    measure: AtomicMeasure,
    ball_b: Iterable[int],
    lambda_ball: Iterable[int],
    p_exp: float,
    pack: TestFunctionPack,
) -> PoincareRatio:
    """lhs = mean |u - u_B| over B; rhs = diam(B) (mean of rho^p over lambda B)^(1/p)."""
    if not p_exp >= 1:
        raise errors.BadParameters(f"the exponent must be at least 1, got {p_exp}")
    B = sorted(set(ball_b))
    LB = sorted(set(lambda_ball))
    mB, mL = float(measure(B)), float(measure(LB))
    if mB <= 0 or mL <= 0:
        raise errors.ZeroMeasureOnBall("the measure vanishes on the test ball")
    missing = [v for v in set(B) | set(LB) if v not in pack.u]
    if missing:
        raise errors.InputError(f"{len(missing)} ball vertices lie outside the pack region")
    w = {v: float(measure.atom(v)) for v in set(B) | set(LB)}
    uB = sum(w[v] * pack.u[v] for v in B) / mB
    lhs = sum(w[v] * abs(pack.u[v] - uB) for v in B) / mB
    grad = (sum(w[v] * pack.rho[v] ** p_exp for v in LB) / mL) ** (1 / p_exp)
    rhs = _diameter(space, B) * grad
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0 else math.inf
    return PoincareRatio(lhs, rhs, ratio)


def indicator_limit(measure: AtomicMeasure, pack: TestFunctionPack, ball_b: Iterable[int]) -> float:
    """2 mu(A0) mu(A1) / mu(B)^2, the small-eps value of the mean oscillation."""
    B = set(ball_b)
    mB = float(measure(B))
    if mB <= 0:
        raise errors.ZeroMeasureOnBall("the measure vanishes on the test ball")
    return 2 * float(measure(B & pack.side0)) * float(measure(B & pack.side1)) / mB**2


def discrete_limit(measure: AtomicMeasure, pack: TestFunctionPack, ball_b: Iterable[int]) -> float:
    """Mean oscillation over B of the eps -> 0 limit of u: 0 on A0, 1/2 on sigma, 1 on A1."""
    B = sorted(set(ball_b))
    mB = float(measure(B))
    if mB <= 0:
        raise errors.ZeroMeasureOnBall("the measure vanishes on the test ball")
    u0 = {v: 0.0 if v in pack.side0 else 1.0 if v in pack.side1 else 0.5 for v in B}
    w = {v: float(measure.atom(v)) for v in B}
    mean = sum(w[v] * u0[v] for v in B) / mB
    return sum(w[v] * abs(u0[v] - mean) for v in B) / mB


def band_cover(space: MetricSurface, pack: TestFunctionPack) -> tuple[list[int], float]:
    """Centers on sigma whose 2 eps-balls cover the eps-band, and the bound length/(2 eps) + 1.

    Band vertices are swept by the arc position of their nearest sigma vertex;
    each uncovered one gets the farthest sigma vertex at most eps further
    along the arc.
    """
    eps = pack.epsilon
    wp = list(pack.sigma.waypoints)
    arc = np.concatenate([[0.0], np.cumsum([space.weight[(a, b)] for a, b in zip(wp, wp[1:])])])
    rows = space.dist_rows(wp)
    band = sorted(pack.band)
    foot = {v: int(np.argmin(rows[:, v])) for v in band}
    order = sorted(band, key=lambda v: (arc[foot[v]], v))
    covered: set[int] = set()
    centers = []
    for v in order:
        if v in covered:
            continue
        t = arc[foot[v]]
        k = int(np.searchsorted(arc, t + eps * (1 + REL_TOL), side="right")) - 1
        c = wp[k]
        centers.append(c)
        near = space.dist_within(c, 2 * eps)
        covered.update(x for x in band if np.isfinite(near[x]))
        if v not in covered:  # pragma: no cover - the chosen center is within 2 eps of v
            raise RuntimeError("band cover step failed")
    return centers, pack.sigma.length / (2 * eps) + 1


@dataclass
class DimensionBoundReport:
    epsilons: list[float]
    lhs: list[float]
    gradient_terms: list[float]
    ratios: list[float]
    limit: float  # 2 mu(A0) mu(A1) / mu(B)^2
    discrete_limit: float  # same oscillation for the limit function, sigma carrying mass
    slope: float
    alpha_implied: float
    verdict: str
    p_exp: float
    alpha: float | None = None
    notes: list[str] = field(default_factory=list)


def dimension_bound_diagnostic(
    space: MetricSurface,
    measure: AtomicMeasure,
    p_exp: float,
    epsilons: Sequence[float],
    sigma: Geodesic,
    ball_b: Iterable[int] | None = None,
    lam: float = DEFAULT_LAMBDA,
    alpha: float | None = None,
    tolerance: float = SLOPE_TOLERANCE,
) -> DimensionBoundReport:
    """Scaling of the Poincare right-hand side as eps shrinks.

    The gradient term (mean of rho^p over lambda B)^(1/p) is regressed in log-log
    against eps; a band of measure ~ eps^(alpha-1) gives slope (alpha-1-p)/p.
    CONSISTENT: the oscillation stays bounded below and the slope is at most
    ``tolerance`` (the right side does not vanish, alpha <= 1 + p).
    VIOLATION-SIGNAL: bounded-below oscillation with a vanishing right side.
    B defaults to the ball about sigma's middle waypoint of radius half its length.
    """
    space.require_geodesic("dimension_bound_diagnostic")
    if not p_exp >= 1:
        raise errors.BadParameters(f"the exponent must be at least 1, got {p_exp}")
    if not lam >= 1:
        raise errors.BadParameters(f"lambda must be at least 1, got {lam}")
    eps = sorted((float(e) for e in epsilons), reverse=True)
    if len(eps) < 3 or eps[-1] <= 0 or eps[0] / eps[-1] < 2**1.5 * (1 - 1e-12):
        raise errors.InsufficientScales("need at least 3 positive epsilons spanning 1.5 octaves")
    mid = sigma.waypoints[len(sigma.waypoints) // 2]
    radius = sigma.length / 2
    B = sorted(ball_b) if ball_b is not None else sorted(space.ball(mid, radius))
    LB = sorted(space.ball(mid, lam * radius) | set(B))
    lhs, grads, ratios = [], [], []
    limit = None
    for e in eps:
        pack = build_pack(space, sigma, e)
        pr = poincare_ratio(space, measure, B, LB, p_exp, pack)
        lhs.append(pr.lhs)
        diam = _diameter(space, B)
        grads.append(pr.rhs / diam if diam > 0 else 0.0)
        ratios.append(pr.ratio)
        limit = indicator_limit(measure, pack, B)
        dlimit = discrete_limit(measure, pack, B)
    notes = []
    if min(grads) <= 0:
        slope = math.inf
        notes.append("gradient term vanished at some scale")
    else:
        slope = float(np.polyfit(np.log(eps), np.log(grads), 1)[0])
    alpha_implied = 1 + p_exp + p_exp * slope
    bounded_below = min(lhs) >= 0.5 * limit and limit > 0
    if not bounded_below:
        verdict = INCONCLUSIVE
        notes.append("mean oscillation not bounded below")
    elif slope <= tolerance and (alpha is None or alpha <= 1 + p_exp + tolerance):
        verdict = CONSISTENT
    else:
        verdict = VIOLATION
    return DimensionBoundReport(eps, lhs, grads, ratios, limit, dlimit, slope, alpha_implied, verdict, float(p_exp), alpha, notes)
