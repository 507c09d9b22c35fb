"""Doubling constants, Assouad/Hausdorff dimension estimators and discrete Hausdorff measures."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import errors
from .embedding import exterior_boundary
from .nets import _greedy_separated, covering_number, maximal_net
from .space import REL_TOL, Geodesic, Loop, MetricSurface, RegionSpec
from .space import close as close_

# Federer's coarea constant for k = m = 1 in the plane: omega(1)^2 / omega(2) inverted
C1 = math.pi / 4
COAREA_TOLERANCE = 0.15
FIT_TOLERANCE = 0.3


@dataclass
class DimensionReport:
    assouad_D: float
    hausdorff_alpha: float
    doubling_N: int
    scales_used: list[float]
    fit_residuals: list[float] = field(default_factory=list)
    fit_tolerance: float = FIT_TOLERANCE

    @property
    def consistent(self) -> bool:
        return self.hausdorff_alpha <= self.assouad_D + self.fit_tolerance and self.doubling_N >= 1


def doubling_constant(space: MetricSurface, region: RegionSpec, scales: Sequence[float]) -> int:
    """Largest greedy covering count of ball(p, 2R) by R-balls over region points p and scales R."""
    scales = [float(s) for s in scales]
    if not scales or min(scales) <= 0:
        raise errors.BadParameters("scales must be positive")
    if 2 * max(scales) > region.radius * (1 + REL_TOL):
        raise errors.ScalesTooLarge(f"2 x {max(scales)} exceeds the region radius {region.radius}")
    pts = sorted(region.validate(space))
    return max(covering_number(space, p, 2 * R, R) for p in pts for R in scales)


def packing_count(space: MetricSurface, p: int, r: float, delta: float) -> int:
    """Size of a greedy maximal delta-separated subset of ball(p, r), swept outward from p."""
    d = space.dist_within(p, r)
    members = np.flatnonzero(np.isfinite(d)).tolist()
    order = sorted(members, key=lambda v: (d[v], v))
    return len(_greedy_separated(space, order, delta, strict=False))


@dataclass(frozen=True)
class AssouadResult:
    D: float
    C: float
    residuals: tuple[float, ...]
    counts: tuple[int, ...]
    ls_slope: float  # plain least-squares slope over all samples, for comparison


def assouad_estimate(space: MetricSurface, samples: Sequence[tuple[int, float, float]]) -> AssouadResult:
    """Estimate (D, C) with #(N_delta ∩ B(p, r)) <= C (r/delta)^D on the samples.

    Packing counts come from greedy maximal delta-separated subsets of the
    balls.  D is the upper envelope of growth slopes: the largest
    log-count increase per unit of log(r/delta) between two samples at the same
    centre that share r or share delta and are at least an octave apart.
    C is then the smallest constant making the bound hold on every sample, and
    the residuals are measured from that envelope line (all <= 0).
    """
    if len(samples) < 8:
        raise errors.InsufficientSamples("need at least 8 (p, r, delta) samples")
    ratios = []
    for p, r, delta in samples:
        if not 0 < delta < r:
            raise errors.BadRadii(f"need 0 < delta < r, got delta={delta}, r={r}")
        ratios.append(delta / r)
    if max(ratios) / min(ratios) < 4 * (1 - 1e-12):
        raise errors.InsufficientSamples("samples must span at least 2 octaves of delta/r")
    counts = [packing_count(space, p, r, delta) for p, r, delta in samples]
    x = -np.log(ratios)
    y = np.log(counts)
    octave = math.log(2) * (1 - 1e-9)
    D = -math.inf
    for i, (p, r, delta) in enumerate(samples):
        for j, (q, s, eps) in enumerate(samples):
            if p == q and (close_(r, s) or close_(delta, eps)) and x[j] - x[i] >= octave:
                D = max(D, (y[j] - y[i]) / (x[j] - x[i]))
    if D == -math.inf:
        raise errors.InsufficientSamples("no pair of samples shares a centre and a radius or scale an octave apart")
    C = float(np.exp(np.max(y - D * x)))
    res = y - (D * x + math.log(C))
    return AssouadResult(float(D), C, tuple(float(v) for v in res), tuple(counts), float(np.polyfit(x, y, 1)[0]))


@dataclass(frozen=True)
class HausdorffDimResult:
    alpha: float
    counts: dict  # seed -> list of c_eps
    per_seed: dict  # seed -> slope
    spread: float
    residuals: tuple[float, ...]


def hausdorff_dim_estimate(
    space: MetricSurface,
    origin: int,
    epsilons: Sequence[float],
    radius: float | None = None,
    seeds: Sequence[int] = (0,),
) -> HausdorffDimResult:
    """Slope of log c_eps against log(1/eps), c_eps = #(N_eps ∩ B(origin, radius)).

    ``radius`` defaults to a quarter of the largest distance from ``origin``.
    The pooled estimate uses the first seed; the per-seed slopes give the spread.
    """
    eps = sorted(float(e) for e in epsilons)
    if len(eps) < 4 or eps[0] <= 0 or eps[-1] / eps[0] < 4 * (1 - 1e-12):
        raise errors.InsufficientScales("need at least 4 positive epsilons spanning 2 octaves")
    if radius is None:
        radius = float(np.max(space.dist_from(origin))) / 4
    unit = space.ball(origin, radius)
    x = np.log(1 / np.array(eps))
    counts, slopes, res = {}, {}, ()
    for s in seeds:
        c = [len(maximal_net(space, e, seed=s).members & unit) for e in eps]
        counts[s] = c
        a, b = np.polyfit(x, np.log(c), 1)
        slopes[s] = float(a)
        if s == seeds[0]:
            res = tuple(float(v) for v in np.log(c) - (a * x + b))
    vals = list(slopes.values())
    return HausdorffDimResult(slopes[seeds[0]], counts, slopes, max(vals) - min(vals), res)


def hausdorff1_length(space: MetricSurface, curve) -> float:
    """Length of a loop, geodesic or vertex path; equals its one-dimensional Hausdorff measure."""
    if isinstance(curve, Loop):
        if len(curve.waypoints) <= 1:
            return 0.0
        return space.path_length(curve.waypoints, closed=True)
    if isinstance(curve, Geodesic):
        return space.path_length(curve.waypoints)
    pts = list(curve)
    if not pts:
        raise errors.InvalidCurve("empty curve")
    return space.path_length(pts)


def hausdorff2_estimate(space: MetricSurface, region: Iterable[int], epsilon: float, check: bool = True) -> float:
    """Covering sum |N| (2 eps)^2 for a maximal eps-separated subset N of ``region``.

    The net is built inside the region, swept by vertex id, so its eps-balls
    cover the region.  With ``check`` the scale may not exceed half the
    region's inradius (largest distance from a region vertex to the complement).
    """
    region = sorted(set(region))
    if not region:
        raise errors.InputError("empty region")
    if not epsilon > 0:
        raise errors.BadEpsilon("epsilon must be positive")
    if check and 1 < len(region) < space.n:
        members = set(region)
        d_out = space.multi_source_distance(v for v in range(space.n) if v not in members)
        inradius = float(np.max(d_out[region]))
        if epsilon > inradius / 2 * (1 + REL_TOL):
            raise errors.EpsilonTooLarge(f"epsilon {epsilon} exceeds half the region inradius {inradius}")
    return len(_greedy_separated(space, region, epsilon, strict=False)) * (2 * epsilon) ** 2


@dataclass(frozen=True)
class CoareaResult:
    lhs: float
    rhs: float
    passed: bool
    ratio: float
    shell_lengths: tuple[float, ...]
    tolerance: float


def coarea_check(space: MetricSurface, p: int, R: float, step: float, tolerance: float = COAREA_TOLERANCE) -> CoareaResult:
    """Compare the mesh-scale covering sum of B(p, R) with C1 times the integral of boundary lengths.

    The upper integral over [0, R] is a right-endpoint Riemann sum at
    t = step, 2 step, ..., R of the exterior-boundary lengths of B(p, t).
    """
    space.require_geodesic("coarea_check")
    space.require_embedding()
    if R < 0 or not step > 0:
        raise errors.BadParameters("need R >= 0 and step > 0")
    if step > space.mesh * (1 + REL_TOL):
        raise errors.BadParameters(f"step {step} exceeds the mesh {space.mesh}")
    if R == 0:
        return CoareaResult(0.0, 0.0, True, math.inf, (), tolerance)
    lhs = _h2_ball(space, p, R)
    lengths = []
    k = 1
    while k * step <= R * (1 + REL_TOL):
        loop = exterior_boundary(space, space.ball(p, k * step))
        lengths.append(hausdorff1_length(space, loop))
        k += 1
    rhs = C1 * sum(lengths) * step
    ratio = lhs / rhs if rhs > 0 else math.inf
    return CoareaResult(lhs, rhs, lhs >= rhs * (1 - tolerance), ratio, tuple(lengths), tolerance)


def _h2_ball(space: MetricSurface, p: int, r: float) -> float:
    # mesh-scale covering sum of a ball; the inradius guard does not apply at the mesh scale
    return hausdorff2_estimate(space, space.ball(p, r), space.mesh, check=False)


@dataclass(frozen=True)
class QuadraticBoundResult:
    c: float
    passed: bool
    per_radius: dict  # r -> min over points of H2/r^2


def quadratic_lower_bound_check(space: MetricSurface, region: RegionSpec, radii: Sequence[float], points: Sequence[int] | None = None) -> QuadraticBoundResult:
    """c = min over region points and radii of the mesh-scale H2 estimate of B(p, r) divided by r^2."""
    members = region.validate(space)
    pts = sorted(points) if points is not None else sorted(members)
    if not radii or min(radii) <= 0:
        raise errors.BadRadii("radii must be positive")
    per = {}
    for r in radii:
        per[float(r)] = min(_h2_ball(space, p, r) / r**2 for p in pts)
    c = min(per.values())
    return QuadraticBoundResult(c, c > 0, per)


def write_dimension_csv(path, scales, counts, estimates, residuals) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scale", "count", "estimate", "residual"])
        for row in zip(scales, counts, estimates, residuals):
            w.writerow(row)
