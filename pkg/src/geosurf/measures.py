"""Atomic measures on a space: net counting measures, pushforwards and Haar-like constructions."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import errors
from .bilip import BiLipMap
from .nets import Net, covering_number, maximal_net
from .space import MetricSurface, RegionSpec


class AtomicMeasure:
    """Finite nonnegative measure given by one weight per vertex.

    Weights built as 1/integer stay ``Fraction`` so normalisations are exact;
    float weights are accepted too.  Zero weights are dropped.
    """

    def __init__(self, weights: Mapping[int, Real]):
        w = {}
        for v, x in weights.items():
            if x < 0:
                raise errors.InputError(f"negative weight {x} at vertex {v}")
            if x > 0:
                w[int(v)] = x
        if not w:
            raise errors.ZeroMeasure("measure has no positive weight")
        self.weights: dict[int, Real] = dict(sorted(w.items()))

    @property
    def mass(self):
        return sum(self.weights.values(), Fraction(0))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.weights)

    def __call__(self, vertices: Iterable[int]):
        w = self.weights
        return sum((w[v] for v in vertices if v in w), Fraction(0))

    def atom(self, v: int):
        return self.weights.get(v, Fraction(0))

    def scaled(self, c) -> "AtomicMeasure":
        return AtomicMeasure({v: x * c for v, x in self.weights.items()})

    def restricted(self, vertices: Iterable[int]) -> "AtomicMeasure":
        keep = set(vertices)
        return AtomicMeasure({v: x for v, x in self.weights.items() if v in keep})

    def __eq__(self, other) -> bool:
        return isinstance(other, AtomicMeasure) and self.weights == other.weights

    def __repr__(self) -> str:
        return f"AtomicMeasure(atoms={len(self.weights)}, mass={float(self.mass):.6g})"


def uniform_measure(vertices: Iterable[int]) -> AtomicMeasure:
    """Counting measure with unit weight on each vertex."""
    return AtomicMeasure({v: Fraction(1) for v in vertices})


def _members(space: MetricSurface, unit) -> frozenset[int]:
    if isinstance(unit, RegionSpec):
        return unit.validate(space)
    return frozenset(space.check_vertex(v) for v in unit)


def net_measure(space: MetricSurface, net: Net, unit_ball) -> AtomicMeasure:
    """Weight 1/#(net ∩ unit_ball) on every net member, so the unit ball has mass exactly 1."""
    unit = _members(space, unit_ball)
    k = len(net.members & unit)
    if k == 0:
        raise errors.EmptyNormalizer("net does not meet the unit ball")
    return AtomicMeasure({v: Fraction(1, k) for v in net.members})


def pushforward(measure: AtomicMeasure, fmap: BiLipMap | Mapping[int, int]) -> AtomicMeasure:
    """f_* mu; the measure's support must lie in the map's domain and the map must be injective there."""
    domain = fmap.domain if isinstance(fmap, BiLipMap) else frozenset(fmap.keys())
    assign = fmap.assignment if isinstance(fmap, BiLipMap) else fmap
    outside = measure.support - domain
    if outside:
        raise errors.SupportOutsideDomain(f"{len(outside)} support vertices lie outside the map domain")
    out: dict[int, Real] = {}
    for v, x in measure.weights.items():
        w = assign[v]
        if w in out:
            raise errors.NotInjective(f"two support vertices map to {w}")
        out[w] = x
    return AtomicMeasure(out)


@dataclass(frozen=True)
class QuasiEquivalenceReport:
    alpha: float
    witness: object  # a vertex, or the test set achieving the extreme ratio


def _ratio(a, b) -> float:
    if a == 0 and b == 0:
        return 1.0
    if a == 0 or b == 0:
        return math.inf
    hi, lo = max(a, b), min(a, b)
    return float(hi / lo)


def quasi_equivalence(mu: AtomicMeasure, nu: AtomicMeasure, test_sets: Sequence[Iterable[int]] | None = None) -> QuasiEquivalenceReport:
    """Least alpha with nu/alpha <= mu <= alpha nu.

    Without ``test_sets`` the comparison is per atom, which bounds every set:
    a ratio of sums lies between the extreme ratios of its terms.  With
    ``test_sets`` the least alpha over that family is returned instead.
    """
    for m in (mu, nu):
        if not m.weights:  # pragma: no cover - constructor forbids it
            raise errors.ZeroMeasure("zero measure")
    best, witness = 1.0, None
    if test_sets is None:
        for v in sorted(mu.support | nu.support):
            q = _ratio(mu.atom(v), nu.atom(v))
            if q > best or witness is None:
                best, witness = max(best, q), v
    else:
        for A in test_sets:
            A = frozenset(A)
            q = _ratio(mu(A), nu(A))
            if q > best or witness is None:
                best, witness = max(best, q), A
    return QuasiEquivalenceReport(best, witness)


def ball_family(space: MetricSurface, centers: Iterable[int], radii: Iterable[float], inside: Iterable[int] | None = None) -> list[frozenset[int]]:
    """Balls ball(c, r) over centers and radii, keeping only those inside ``inside`` when given."""
    keep = frozenset(inside) if inside is not None else None
    out = []
    for c in centers:
        for r in radii:
            b = space.ball(c, r)
            if keep is None or b <= keep:
                out.append(b)
    return out


def _spread(vertices: Sequence[int], k: int) -> list[int]:
    vs = sorted(vertices)
    if len(vs) <= k:
        return vs
    idx = np.linspace(0, len(vs) - 1, k).round().astype(int)
    return sorted({vs[i] for i in idx})


@dataclass
class ConvergenceReport:
    epsilons: list[float]
    seeds: list[int]
    ratios: list[dict]  # per consecutive (eps, eps') pair: max/min ball-measure ratio
    drift_per_octave: float
    converged: bool
    seed_alpha: dict = field(default_factory=dict)  # eps -> max pairwise alpha across seeds on test balls
    tolerance: float = 1.0


def haar_like(
    space: MetricSurface,
    epsilons: Sequence[float],
    seeds: Sequence[int],
    unit_ball,
    test_balls: Sequence[Iterable[int]] | None = None,
    tolerance: float = 1.0,
) -> tuple[AtomicMeasure, ConvergenceReport]:
    """Finest-scale net measure together with a scale-to-scale drift report.

    For consecutive scales eps > eps' the report records, over the test balls,
    the extreme ratios mu_eps(B)/mu_eps'(B); the drift per octave is the largest
    |log2 ratio| divided by log2(eps/eps').  ``converged`` holds when the drift
    is at most ``tolerance``.  The returned measure is built from the first seed.
    """
    eps = sorted({float(e) for e in epsilons}, reverse=True)
    if len(eps) < 3 or eps[0] / eps[-1] < 2:
        raise errors.InsufficientScales("need at least 3 scales spanning an octave")
    if len(seeds) < 2:
        raise errors.InsufficientScales("need at least 2 seed orders")
    if any(e <= 0 for e in eps):
        raise errors.BadEpsilon("epsilons must be positive")
    unit = _members(space, unit_ball)
    if test_balls is None:
        # balls around spread-out unit-ball points, larger than the coarsest net scale
        test_balls = ball_family(space, _spread(unit, 9), [2 * eps[0]])
    test_balls = [frozenset(b) for b in test_balls]

    measures: dict[tuple[float, int], AtomicMeasure] = {}
    for e in eps:
        for s in seeds:
            measures[(e, s)] = net_measure(space, maximal_net(space, e, seed=s), unit)

    ratios, drift = [], 0.0
    s0 = seeds[0]
    for a, b in zip(eps, eps[1:]):
        qs = [float(measures[(a, s0)](B) / measures[(b, s0)](B)) if measures[(b, s0)](B) else math.inf for B in test_balls]
        lo, hi = min(qs), max(qs)
        octaves = math.log2(a / b)
        d = max(abs(math.log2(lo)) if lo > 0 else math.inf, abs(math.log2(hi)) if math.isfinite(hi) else math.inf) / octaves
        drift = max(drift, d)
        ratios.append({"eps": a, "eps_next": b, "min_ratio": lo, "max_ratio": hi, "drift": d})

    seed_alpha = {}
    for e in eps:
        worst = 1.0
        for i, s in enumerate(seeds):
            for t in seeds[i + 1:]:
                worst = max(worst, quasi_equivalence(measures[(e, s)], measures[(e, t)], test_balls).alpha)
        seed_alpha[e] = worst

    report = ConvergenceReport(eps, list(seeds), ratios, drift, drift <= tolerance, seed_alpha, tolerance)
    return measures[(eps[-1], s0)], report


@dataclass(frozen=True)
class QuasiInvarianceReport:
    alpha_star: float
    per_map: tuple[float, ...]
    bound: float | None  # C * L^D when C and D are supplied
    balls_tested: int


def quasi_invariance_check(
    space: MetricSurface,
    measure: AtomicMeasure,
    suite: Sequence[BiLipMap],
    radii: Sequence[float] | None = None,
    restrict: bool = False,
    C: float | None = None,
    D: float | None = None,
) -> QuasiInvarianceReport:
    """Worst alpha with mu ≈ f_* mu over the suite, measured on balls inside each map's image.

    Each map only sees the measure on its domain: with ``restrict`` the
    measure is cut down to the domain first, otherwise a support vertex outside
    the domain is an error.  Comparison uses every ball of the given radii
    (default: 2 and 4 mesh) centred in and contained in f(domain).
    """
    if not suite:
        raise errors.InputError("empty map suite")
    radii = list(radii) if radii is not None else [2 * space.mesh, 4 * space.mesh]
    per_map, tested = [], 0
    for f in suite:
        mu = measure
        if restrict:
            inside = measure.support & f.domain
            if not inside:
                raise errors.SupportOutsideDomain("measure vanishes on the map domain")
            mu = measure.restricted(inside)
        pushed = pushforward(mu, f)
        image = f.image
        balls = ball_family(space, sorted(image), radii, inside=image)
        tested += len(balls)
        per_map.append(quasi_equivalence(measure, pushed, balls).alpha if balls else 1.0)
    bound = None
    if C is not None and D is not None:
        L = max(f.constant for f in suite)
        bound = float(C * L**D)
    return QuasiInvarianceReport(max(per_map), tuple(per_map), bound, tested)


@dataclass(frozen=True)
class ExistenceStepReport:
    holds: bool
    worst_ratio: float  # max of #(B''∩f(N)) / (C L^D #(B'∩N))
    pairs_tested: int


def existence_step_check(
    space: MetricSurface,
    net: Net,
    suite: Sequence[BiLipMap],
    C: float,
    D: float,
    radius_pairs: Sequence[tuple[float, float]],
) -> ExistenceStepReport:
    """Check #(B''∩f(N_eps)) <= C L^D #(B'∩N_eps) on nested concentric balls B'' ⊂ B'.

    ``radius_pairs`` lists (r'', r') with r' - r'' >= eps; centres run over each
    map's image, keeping only B'' inside it so f(N_eps) is fully known there.
    """
    worst, count = 0.0, 0
    for r2, r1 in radius_pairs:
        if not r1 - r2 >= net.epsilon * (1 - 1e-12):
            raise errors.BadRadii("nested radii must differ by at least epsilon")
    for f in suite:
        image = f.image
        fnet = {f(v) for v in net.members & f.domain}
        bound = C * f.constant**D
        for c in sorted(image):
            for r2, r1 in radius_pairs:
                inner = space.ball(c, r2)
                if not inner <= image:
                    continue
                outer = space.ball(c, r1)
                lhs = len(inner & fnet)
                rhs = bound * len(outer & net.members)
                count += 1
                worst = max(worst, lhs / rhs if rhs > 0 else (math.inf if lhs else 0.0))
    return ExistenceStepReport(worst <= 1.0 + 1e-12, worst, count)


@dataclass(frozen=True)
class BallBoundsReport:
    k: float
    h: float
    passed: bool
    c_eps: int
    L: float
    alpha: float
    k_pred: float
    h_pred: float


def ball_measure_bounds(
    space: MetricSurface,
    measure: AtomicMeasure,
    suite: Sequence[BiLipMap],
    epsilon: float,
    unit_ball: RegionSpec,
    region: Iterable[int] | None = None,
    net: Net | None = None,
) -> BallBoundsReport:
    """Empirical k and h in mu(B(p, L eps)) >= k/c_eps and mu(B(p, eps/2L)) <= h/c_eps.

    k is the minimum of mu(B(p, L eps)) c_eps and h the maximum of
    mu(B(p, eps/(2L))) c_eps over ``region`` (default: the unit ball).  The
    predicted constants use alpha from :func:`quasi_invariance_check` and the
    balls of radii 1/2 and 3/2 unit radius around the unit-ball centre.
    """
    if not epsilon > 0:
        raise errors.BadEpsilon("epsilon must be positive")
    unit = unit_ball.validate(space)
    if epsilon >= unit_ball.radius / 2:
        raise errors.RegionTooSmall(f"epsilon {epsilon} must be below half the unit radius {unit_ball.radius}")
    if not suite:
        raise errors.InputError("empty map suite")
    L = max(f.constant for f in suite)
    net = net or maximal_net(space, epsilon)
    c_eps = len(net.members & unit)
    pts = sorted(region) if region is not None else sorted(unit)
    k = min(float(measure(space.ball(p, L * epsilon))) for p in pts) * c_eps
    h = max(float(measure(space.ball(p, epsilon / (2 * L)))) for p in pts) * c_eps
    alpha = quasi_invariance_check(space, measure, suite, restrict=True).alpha_star
    half = float(measure(space.ball(unit_ball.center, unit_ball.radius / 2)))
    three_half = float(measure(space.ball(unit_ball.center, 1.5 * unit_ball.radius)))
    return BallBoundsReport(k, h, k > 0 and math.isfinite(h), c_eps, L, alpha, half / alpha, alpha * three_half)


@dataclass(frozen=True)
class GrowthReport:
    lower: float
    upper: float
    fit_quality: float  # worst per-point coefficient of determination
    slopes: tuple[float, ...]
    sandwich: bool | None  # hausdorff - t <= lower and upper <= assouad + t, when both supplied


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


def growth_exponents(
    space: MetricSurface,
    measure: AtomicMeasure,
    points: Sequence[int],
    radii: Sequence[float],
    assouad: float | None = None,
    hausdorff: float | None = None,
    t: float = 0.0,
) -> GrowthReport:
    """Per-point log-log slopes of r -> mu(B(p, r)); lower/upper are their min and max."""
    radii = sorted(float(r) for r in radii)
    if len(radii) < 4 or radii[0] <= 0 or radii[-1] / radii[0] < 4:
        raise errors.InsufficientRadii("need at least 4 positive radii spanning 2 octaves")
    if not points:
        raise errors.InputError("no sample points")
    x = np.log(radii)
    slopes, quality = [], 1.0
    for p in points:
        m = np.array([float(measure(space.ball(p, r))) for r in radii])
        if np.any(m <= 0):
            # a ball of zero measure: growth is undefined there, record it as flat
            slopes.append(0.0)
            quality = 0.0
            continue
        s, _, r2 = _fit(x, np.log(m))
        slopes.append(s)
        quality = min(quality, r2)
    lo, hi = min(slopes), max(slopes)
    sandwich = None
    if assouad is not None and hausdorff is not None:
        sandwich = (hausdorff - t <= lo) and (hi <= assouad + t)
    return GrowthReport(lo, hi, quality, tuple(slopes), sandwich)


@dataclass(frozen=True)
class UniquenessReport:
    beta_emp: float  # quasi-equivalence of the two measures on the test balls
    beta_chain: float  # max(1, m alpha s)
    s: float
    m: int
    alpha: float
    L: float


def uniqueness_chain(
    space: MetricSurface,
    mu1: AtomicMeasure,
    mu2: AtomicMeasure,
    suite: Sequence[BiLipMap],
    epsilon: float,
    unit_ball: RegionSpec,
    test_balls: Sequence[Iterable[int]] | None = None,
) -> UniquenessReport:
    """Empirical beta between two measures next to the constructive constant m alpha s.

    s is the worse of h1/k2 and h2/k1 from :func:`ball_measure_bounds`, m the
    largest greedy count of eps/L balls covering B(p, L eps) over the unit
    ball and alpha the worse quasi-invariance constant of the two measures.
    Test balls default to radii 2 and 4 eps about spread unit-ball points.
    """
    b1 = ball_measure_bounds(space, mu1, suite, epsilon, unit_ball)
    b2 = ball_measure_bounds(space, mu2, suite, epsilon, unit_ball)
    s = max(b1.h / b2.k if b2.k > 0 else math.inf, b2.h / b1.k if b1.k > 0 else math.inf)
    L = b1.L
    unit = unit_ball.validate(space)
    # with L = 1 the single ball B(p, eps) covers itself
    m = max(covering_number(space, p, L * epsilon, epsilon / L) for p in unit) if L > 1 else 1
    alpha = max(b1.alpha, b2.alpha)
    if test_balls is None:
        test_balls = ball_family(space, _spread(unit, 9), [2 * epsilon, 4 * epsilon])
    beta = quasi_equivalence(mu1, mu2, test_balls).alpha
    return UniquenessReport(beta, max(1.0, m * alpha * s), s, m, alpha, L)


@dataclass(frozen=True)
class CurveNullityReport:
    epsilons: list[float]
    fractions: list[float]  # mu_eps(curve) / mu_eps(r-neighbourhood of the curve)
    decreasing: bool


def curve_nullity(space: MetricSurface, curve, epsilons: Sequence[float], unit_ball, r: float, seed: int = 0) -> CurveNullityReport:
    """Share of the net measure carried by a curve inside its r-neighbourhood, coarse to fine.

    ``curve`` is a Geodesic or a vertex collection.  ``decreasing`` holds when
    the share never grows as eps shrinks and ends below where it started.
    """
    eps = sorted((float(e) for e in epsilons), reverse=True)
    if len(eps) < 3 or eps[-1] <= 0:
        raise errors.InsufficientScales("need at least 3 positive epsilons")
    verts = sorted(getattr(curve, "vertices", curve))
    if not verts:
        raise errors.InputError("empty curve")
    if not r > 0:
        raise errors.BadRadii(f"neighbourhood radius must be positive, got {r}")
    d = space.multi_source_distance(verts)
    hood = np.flatnonzero(d <= r * (1 + 1e-12)).tolist()
    unit = _members(space, unit_ball)
    fractions = []
    for e in eps:
        mu = net_measure(space, maximal_net(space, e, seed=seed), unit)
        whole = mu(hood)
        fractions.append(float(mu(verts) / whole) if whole else math.nan)
    steps = all(b <= a * (1 + 1e-12) for a, b in zip(fractions, fractions[1:]))
    return CurveNullityReport(eps, fractions, bool(steps and fractions[-1] < fractions[0]))


# -- measure files -------------------------------------------------------------

def measure_to_json(space: MetricSurface, measure: AtomicMeasure) -> dict:
    out = {}
    for v, x in measure.weights.items():
        q = Fraction(x).limit_denominator(10**12) if isinstance(x, float) else Fraction(x)
        out[str(space.labels[v])] = f"{q.numerator}/{q.denominator}"
    return {"weights": out}


def measure_from_json(space: MetricSurface, data: Mapping) -> AtomicMeasure:
    index = {str(lab): i for i, lab in enumerate(space.labels)}
    weights = {}
    for key, val in data["weights"].items():
        if str(key) not in index:
            raise errors.UnknownVertex(f"unknown vertex {key!r}")
        weights[index[str(key)]] = Fraction(str(val))
    return AtomicMeasure(weights)


def write_measure(path, space: MetricSurface, measure: AtomicMeasure) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_json(space, measure), fh, indent=1, sort_keys=True)


def read_measure(path, space: MetricSurface) -> AtomicMeasure:
    with open(path) as fh:
        return measure_from_json(space, json.load(fh))
