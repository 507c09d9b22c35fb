"""Concrete test spaces, biLipschitz map suites and cutting-through curve families."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import errors
from .bilip import BiLipMap, bilip_constant, certify_bilip
from .space import GRID_KINDS, MetricSurface, RegionSpec

Factor = Callable[[int, int], float]


def _grid_edges(n: int, length: Callable[[int, int], float]):
    edges = []
    for y in range(n):
        for x in range(n):
            v = y * n + x
            if x + 1 < n:
                edges.append((v, v + 1, length(v, v + 1)))
            if y + 1 < n:
                edges.append((v, v + n, length(v, v + n)))
    return edges


def _grid_rotation(n: int) -> list[list[int]]:
    rot = []
    for y in range(n):
        for x in range(n):
            r = []
            # counterclockwise starting east
            for dx, dy in ((1, 0), (0, 1), (-1, 0), (0, -1)):
                if 0 <= x + dx < n and 0 <= y + dy < n:
                    r.append((y + dy) * n + x + dx)
            rot.append(r)
    return rot


def _grid(n: int, s: float, length, family: dict, snowflake: float | None = None) -> MetricSurface:
    coords = [(x * s, y * s) for y in range(n) for x in range(n)]
    return MetricSurface(
        n * n,
        _grid_edges(n, length),
        origin=(n // 2) * n + n // 2,
        rotation=_grid_rotation(n),
        coords=coords,
        snowflake=snowflake,
        family=family,
    )


def _check_grid_args(n, s):
    if not isinstance(n, (int, np.integer)) or n < 3:
        raise errors.BadParameters(f"grid size must be an integer >= 3, got {n!r}")
    if not s > 0:
        raise errors.BadParameters(f"spacing must be positive, got {s!r}")


def euclidean_grid(n: int, s: float = 1.0) -> MetricSurface:
    """n x n four-neighbour grid with edge length s; the path metric is s times l1."""
    _check_grid_args(n, s)
    return _grid(n, s, lambda u, v: s, {"kind": "euclidean_grid", "n": int(n), "s": float(s)})


def _linear(n):
    return lambda x, y: 1.0 + x / n


def _wave(n):
    return lambda x, y: 2.0 + math.sin(2 * math.pi * x / n) * math.cos(2 * math.pi * y / n)


# named factors usable from the CLI and from space files
NAMED_FACTORS: dict[str, Callable[[int], Factor]] = {
    "one": lambda n: (lambda x, y: 1.0),
    "linear": _linear,
    "wave": _wave,
}


def resolve_factor(factor, n: int) -> tuple[Factor, str]:
    if callable(factor):
        return factor, getattr(factor, "__name__", "custom")
    if isinstance(factor, (int, float)):
        c = float(factor)
        return (lambda x, y: c), f"const:{c:g}"
    if isinstance(factor, str):
        if factor.startswith("const:"):
            c = float(factor.split(":", 1)[1])
            return (lambda x, y: c), factor
        if factor in NAMED_FACTORS:
            return NAMED_FACTORS[factor](n), factor
    raise errors.BadParameters(f"unknown conformal factor {factor!r}")


def conformal_grid(n: int, s: float, factor, bound: float | None = None, kind: str = "conformal_grid") -> MetricSurface:
    """Grid whose edge (u, v) has length s * (factor(u) + factor(v)) / 2.

    ``bound`` is the declared F with factor values in [1/F, F]; when omitted it
    is taken from the sampled values.  The metric is then F-biLipschitz to the
    euclidean grid with the same spacing.
    """
    _check_grid_args(n, s)
    fn, name = resolve_factor(factor, n)
    vals = np.array([[fn(x, y) for x in range(n)] for y in range(n)], dtype=float).ravel()
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise errors.UnboundedFactor("factor must be positive and finite on the grid")
    observed = float(max(vals.max(), 1.0 / vals.min()))
    if bound is not None and observed > bound * (1 + 1e-12):
        raise errors.UnboundedFactor(f"factor leaves [1/{bound}, {bound}] (reaches {observed:.4g})")
    family = {"kind": kind, "n": int(n), "s": float(s), "factor": name, "bound": float(bound or observed)}
    return _grid(n, s, lambda u, v: s * (vals[u] + vals[v]) / 2.0, family)


def poincare_disk_factor(n: int, curvature_scale: float, cap: float = 0.9) -> Factor:
    c = (n - 1) / 2.0
    rho_max = curvature_scale * c

    def factor(x, y):
        q = min(math.hypot(x - c, y - c) / rho_max, cap)
        return 2.0 / (1.0 - q * q)

    return factor


def hyperbolic_grid(n: int, curvature_scale: float = 1.0) -> MetricSurface:
    """Unit grid with the Poincare-disk weight 2/(1 - q^2), q = radius/rho_max capped at 0.9.

    rho_max = curvature_scale * (n - 1) / 2, so scale 1 puts the cap near the
    inscribed circle of the grid.
    """
    if not curvature_scale > 0:
        raise errors.BadParameters("curvature scale must be positive")
    _check_grid_args(n, 1.0)
    space = conformal_grid(n, 1.0, poincare_disk_factor(n, curvature_scale), kind="hyperbolic_grid")
    space.family.update(factor="poincare_disk", curvature_scale=float(curvature_scale))
    return space


def tree(branching: int, depth: int, s: float = 1.0) -> MetricSurface:
    """Complete rooted tree in breadth-first numbering; the root is vertex 0 and the origin."""
    if branching < 2 or depth < 1 or not s > 0:
        raise errors.BadParameters("tree needs branching >= 2, depth >= 1 and s > 0")
    count = sum(branching**k for k in range(depth + 1))
    edges = [((v - 1) // branching, v, s) for v in range(1, count)]
    return MetricSurface(count, edges, origin=0, family={"kind": "tree", "branching": int(branching), "depth": int(depth), "s": float(s)})


def snowflake_grid(n: int, s: float, theta: float) -> MetricSurface:
    """Grid vertex set with distance (s * l1)^theta; flagged non-geodesic."""
    _check_grid_args(n, s)
    if not 0 < theta < 1:
        raise errors.BadParameters(f"theta must lie in the open interval (0, 1), got {theta}")
    return _grid(n, s, lambda u, v: s, {"kind": "snowflake_grid", "n": int(n), "s": float(s), "theta": float(theta)}, snowflake=theta)


FAMILIES = {
    "euclidean_grid": euclidean_grid,
    "conformal_grid": conformal_grid,
    "hyperbolic_grid": hyperbolic_grid,
    "tree": tree,
    "snowflake_grid": snowflake_grid,
}


def generate(family: str, **params) -> MetricSurface:
    if family not in FAMILIES:
        raise errors.BadParameters(f"unknown family {family!r}")
    return FAMILIES[family](**params)


# -- map suites ---------------------------------------------------------------

def _grid_side(space: MetricSurface) -> int:
    if space.family.get("kind") not in GRID_KINDS[:3]:
        raise errors.UnsupportedFamily(f"map suites need a geodesic grid-family space, got {space.family.get('kind')!r}")
    return space.family["n"]


def _affine_map(space, domain, center, target, transform):
    n = _grid_side(space)
    cx, cy = space.grid_coord(center)
    tx, ty = space.grid_coord(target)
    out = {}
    for v in domain:
        x, y = space.grid_coord(v)
        dx, dy = transform(x - cx, y - cy)
        X, Y = tx + dx, ty + dy
        if not (0 <= X < n and 0 <= Y < n):
            return None
        out[v] = Y * n + X
    return out


_ROTATIONS = {
    90: lambda dx, dy: (-dy, dx),
    180: lambda dx, dy: (-dx, -dy),
    270: lambda dx, dy: (dy, -dx),
}


def map_suite(space: MetricSurface, kind: str, domain_region: RegionSpec, target_region: RegionSpec | None = None) -> list[BiLipMap]:
    """Certified maps sending the domain region's center to every reachable target vertex.

    ``translations`` translate; ``rotations`` turn the domain by 90, 180 and 270
    degrees about its center and then translate; ``shears`` apply
    (x, y) -> (x, y + floor(x/2)) in coordinates relative to the center, then
    translate.  Targets whose image would leave the grid are skipped.
    """
    _grid_side(space)
    domain = sorted(domain_region.validate(space))
    targets = sorted((target_region or domain_region).validate(space))
    if kind == "translations":
        transforms = [("translate", lambda dx, dy: (dx, dy))]
    elif kind == "rotations":
        transforms = [(f"rotate{a}", f) for a, f in _ROTATIONS.items()]
    elif kind == "shears":
        transforms = [("shear", lambda dx, dy: (dx, dy + dx // 2))]
    else:
        raise errors.UnsupportedFamily(f"unknown map kind {kind!r}")
    maps = []
    for name, tr in transforms:
        for t in targets:
            amap = _affine_map(space, domain, domain_region.center, t, tr)
            if amap is None:
                continue
            maps.append(certify_bilip(space, amap, domain, label=f"{name}->{t}"))
    return maps


# -- cutting-through curves ----------------------------------------------------

@dataclass(frozen=True)
class CuttingFamily:
    curves: Mapping[int, tuple[int, ...]]
    constant: float
    per_curve: Mapping[int, float]


def curve_constant(space: MetricSurface, waypoints) -> float:
    """biLipschitz constant of the arc-length parametrisation of a vertex path."""
    t = np.concatenate([[0.0], np.cumsum([space.weight[(a, b)] for a, b in zip(waypoints, waypoints[1:])])])
    d_param = np.abs(t[:, None] - t[None, :])
    pts = list(waypoints)
    d_space = space.dist_rows(pts)[:, pts]
    return bilip_constant(d_param, d_space)


def _grid_row_through(space, members, p):
    n = space.family["n"]
    x, y = space.grid_coord(p)
    lo = x
    while lo >= 0 and y * n + lo in members:
        lo -= 1
    hi = x
    while hi < n and y * n + hi in members:
        hi += 1
    if lo < 0 or hi >= n:
        raise errors.BadRegion(f"row through vertex {p} cannot exit the region inside the space")
    return tuple(y * n + i for i in range(lo, hi + 1))


def _tree_curve_through(space, members, p):
    b = space.family["branching"]
    n = space.n

    def descend(v, first_child_index=0):
        c = v * b + 1 + first_child_index
        v = c if c < n else v
        while v in members:
            c = v * b + 1
            if c >= n:
                raise errors.BadRegion(f"leaf {v} below vertex {p} lies inside the region")
            v = c
        return v

    down = descend(p) if p * b + 1 < n else None
    if down is None:
        raise errors.BadRegion(f"vertex {p} is a leaf inside the region")
    up = p
    while up in members and up != 0:
        up = (up - 1) // b
    if up in members:
        # reached the root inside the region: leave through a different branch
        branch = p
        while branch != 0 and (branch - 1) // b != 0:
            branch = (branch - 1) // b
        # the root's downward ray uses its first child, so leave through the second
        other = 2 if p == 0 or branch == 1 else 1
        up = descend(0, other - 1)
    path_up = space.geodesic(p, up).waypoints
    path_down = space.geodesic(down, p).waypoints
    return path_down + path_up[1:]


def cutting_family(space: MetricSurface, region: RegionSpec) -> CuttingFamily:
    """For each region vertex, a geodesic row (grids) or ray pair (trees) through it exiting the region."""
    members = region.validate(space)
    kind = space.family.get("kind")
    if kind in GRID_KINDS[:3]:
        builder = _grid_row_through
    elif kind == "tree":
        builder = _tree_curve_through
    else:
        raise errors.UnsupportedFamily(f"no cutting curves for family {kind!r}")
    curves, consts = {}, {}
    for p in sorted(members):
        c = builder(space, members, p)
        curves[p] = c
        consts[p] = curve_constant(space, c)
    return CuttingFamily(curves, max(consts.values()), consts)
