"""Maximal separated nets and covering numbers."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import errors
from .space import REL_TOL, MetricSurface, RegionSpec

EXACT_COVER_LIMIT = 20


@dataclass(frozen=True)
class Net:
    epsilon: float
    members: frozenset[int]
    order: tuple[int, ...]
    seed_order: str = "identity"

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, v) -> bool:
        return v in self.members


def vertex_order(space: MetricSurface, seed: int | None = None) -> tuple[list[int], str]:
    """Construction order for nets: identity for seed None or 0, else a seeded permutation."""
    if not seed:
        return list(range(space.n)), "identity"
    perm = np.random.default_rng(seed).permutation(space.n)
    return [int(v) for v in perm], f"seed:{seed}"


def _greedy_separated(space: MetricSurface, order: Sequence[int], epsilon: float, strict: bool) -> list[int]:
    """Greedy sweep admitting v iff its distance to every admitted vertex is >= epsilon (> when strict)."""
    mind = np.full(space.n, np.inf)
    slack = REL_TOL * max(1.0, epsilon)
    admitted = []
    for v in order:
        dv = mind[v]
        ok = dv > epsilon + slack if strict else dv >= epsilon - slack
        if ok:
            admitted.append(v)
            np.minimum(mind, space.dist_within(v, epsilon), out=mind)
    return admitted


def maximal_net(space: MetricSurface, epsilon: float, order: Sequence[int] | None = None, seed: int | None = None) -> Net:
    """Greedy maximal epsilon-separated net, sweeping vertices in ``order``.

    Without an explicit order the sweep follows :func:`vertex_order` for ``seed``.
    """
    if not epsilon > 0:
        raise errors.BadEpsilon(f"epsilon must be positive, got {epsilon}")
    if order is None:
        order, label = vertex_order(space, seed)
    else:
        order = [space.check_vertex(v) for v in order]
        if sorted(order) != list(range(space.n)):
            raise errors.InputError("order must be a permutation of the vertices")
        label = "custom"
    if space.is_geodesic and epsilon <= space.min_edge * (1 - REL_TOL):
        admitted = list(order)  # every pair is at least one edge apart
    else:
        admitted = _greedy_separated(space, order, epsilon, strict=False)
    return Net(float(epsilon), frozenset(admitted), tuple(admitted), label)


def is_separated(space: MetricSurface, members: Iterable[int], epsilon: float) -> bool:
    m = sorted(members)
    if len(m) < 2:
        return True
    d = space.dist_rows(m)[:, m]
    np.fill_diagonal(d, np.inf)
    return bool(d.min() >= epsilon * (1 - REL_TOL))


def is_net_of(space: MetricSurface, members: Iterable[int], epsilon: float, region: Iterable[int] | None = None) -> bool:
    """True when every vertex of ``region`` (default: all) lies within epsilon of ``members``."""
    d = space.multi_source_distance(members)
    idx = list(region) if region is not None else slice(None)
    return bool(np.all(d[idx] <= epsilon * (1 + REL_TOL) + REL_TOL))


def _check_radii(R, r):
    if not 0 < r < R:
        raise errors.BadRadii(f"need 0 < r < R, got r={r}, R={R}")


def greedy_cover(space: MetricSurface, p: int, R: float, r: float) -> list[int]:
    """Maximal r-separated (strictly) subset of ball(p, R), swept outward from p."""
    _check_radii(R, r)
    d = space.dist_within(p, R)
    members = np.flatnonzero(np.isfinite(d))
    order = sorted(members.tolist(), key=lambda v: (d[v], v))
    return _greedy_separated(space, order, r, strict=True)


def covering_number(space: MetricSurface, p: int, R: float, r: float) -> int:
    """Greedy upper bound on the number of closed r-balls needed to cover ball(p, R).

    The vertices of ball(p, R) are swept by distance from p and a vertex is
    kept when it lies farther than r from every kept one; the kept vertices'
    r-balls cover ball(p, R).
    """
    return len(greedy_cover(space, p, R, r))


def exact_covering_number(space: MetricSurface, p: int, R: float, r: float, limit: int = EXACT_COVER_LIMIT) -> int | None:
    """Least number of closed r-balls (any centers) covering ball(p, R); None above ``limit`` vertices."""
    _check_radii(R, r)
    target = sorted(space.ball(p, R))
    if len(target) > limit:
        return None
    bit = {v: 1 << i for i, v in enumerate(target)}
    rows = space.dist_rows(target)
    near = np.flatnonzero(np.any(rows <= r * (1 + REL_TOL) + REL_TOL, axis=0))
    masks = set()
    for c in near.tolist():
        dc = space.dist_within(c, r)
        m = 0
        for v in target:
            if np.isfinite(dc[v]):
                m |= bit[v]
        masks.add(m)
    # keep only maximal masks
    masks = [m for m in masks if not any(o != m and o & m == m for o in masks)]
    full = (1 << len(target)) - 1
    best = [len(target)]

    def search(covered, used):
        if covered == full:
            best[0] = min(best[0], used)
            return
        if used + 1 >= best[0]:
            return
        low = ~covered & (covered + 1)  # lowest uncovered bit
        for m in masks:
            if m & low:
                search(covered | m, used + 1)

    search(0, 0)
    return best[0]


@dataclass(frozen=True)
class CoverReport:
    greedy: int
    exact: int | None


def covering_report(space: MetricSurface, p: int, R: float, r: float) -> CoverReport:
    return CoverReport(covering_number(space, p, R, r), exact_covering_number(space, p, R, r))


@dataclass(frozen=True)
class ProfileRow:
    epsilon: float
    seed: int
    cardinality: int
    region_id: str


def net_cardinality_profile(
    space: MetricSurface,
    epsilons: Sequence[float],
    region,
    seeds: Sequence[int] = (0,),
    region_id: str = "region",
) -> list[ProfileRow]:
    """c_eps = |N_eps ∩ region| for every epsilon and seed order; ``region`` is a vertex set or RegionSpec.

    The sweep visits region vertices first (in seed order), so N_eps ∩ region is
    itself a maximal eps-separated subset of the region and is never empty.
    """
    members = region.validate(space) if isinstance(region, RegionSpec) else frozenset(region)
    if not members:
        raise errors.InputError("region is empty")
    rows = []
    for eps in epsilons:
        if not eps > 0:
            raise errors.BadEpsilon(f"epsilon must be positive, got {eps}")
        for seed in seeds:
            order, _ = vertex_order(space, seed)
            order = [v for v in order if v in members] + [v for v in order if v not in members]
            net = maximal_net(space, eps, order=order)
            rows.append(ProfileRow(float(eps), int(seed), len(net.members & members), region_id))
    return rows


def write_profile_csv(rows: Sequence[ProfileRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "seed", "cardinality", "region_id"])
        for row in rows:
            w.writerow([row.epsilon, row.seed, row.cardinality, row.region_id])
