"""The surrounding function Sur(p, r): shortest loops separating a ball from the outer face."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import errors
from .bilip import BiLipMap
from .space import REL_TOL, Loop, MetricSurface, RegionSpec


@dataclass(frozen=True)
class SurResult:
    value: float
    witness: Loop
    local_radius: float | None = None


@dataclass(frozen=True)
class SurConstants:
    """Constants derived from the cutting constant K."""

    K: float

    @property
    def C0(self) -> float:
        return 2 / self.K**2

    @property
    def C1(self) -> float:
        return 2 * self.K**2

    @property
    def C2(self) -> float:
        return 4 * self.K**2


def _check_surface(space: MetricSurface) -> None:
    space.require_geodesic("the surrounding function")
    if len(space.edges) == space.n - 1:
        raise errors.NoSurroundingLoop("the space is a tree; it has no loops")
    space.require_embedding()


def _edge_index(space: MetricSurface) -> dict[tuple[int, int], int]:
    idx = getattr(space, "_edge_index", None)
    if idx is None:
        idx = {}
        for i, (u, v, _) in enumerate(space.edges):
            idx[(u, v)] = idx[(v, u)] = i
        space._edge_index = idx
    return idx


def region_reach(space: MetricSurface, loop_vertices: Iterable[int], loop_edges: Iterable[tuple[int, int]], start: Iterable[int]) -> tuple[set[int], bool]:
    """Vertices reachable from ``start`` in the surface with the loop removed, and whether the outer face is.

    The surface is the 2-complex of vertices, open edges and open faces.  The
    loop removes its vertices and the edges it traverses; every other cell
    stays, so an edge whose two ends lie on the loop but which the loop does
    not use still connects its two faces.
    """
    blocked_v = set(loop_vertices)
    eidx = _edge_index(space)
    blocked_e = {eidx[(a, b)] for a, b in loop_edges}
    face_darts = space.faces
    outer = space.outer_face

    seen_v: set[int] = set()
    seen_e: set[int] = set()
    seen_f: set[int] = set()
    queue: deque[tuple[int, int]] = deque()  # (kind, id): 0 vertex, 1 edge, 2 face
    for v in start:
        if v not in blocked_v and v not in seen_v:
            seen_v.add(v)
            queue.append((0, v))
    while queue:
        kind, x = queue.popleft()
        if kind == 0:
            for u in space.neighbors[x]:
                e = eidx[(x, u)]
                if e not in blocked_e and e not in seen_e:
                    seen_e.add(e)
                    queue.append((1, e))
                f = space.dart_face[(x, u)]
                if f not in seen_f:
                    seen_f.add(f)
                    queue.append((2, f))
        elif kind == 1:
            a, b, _ = space.edges[x]
            for v in (a, b):
                if v not in blocked_v and v not in seen_v:
                    seen_v.add(v)
                    queue.append((0, v))
            for f in (space.dart_face[(a, b)], space.dart_face[(b, a)]):
                if f not in seen_f:
                    seen_f.add(f)
                    queue.append((2, f))
        else:
            for a, b in face_darts[x]:
                if a not in blocked_v and a not in seen_v:
                    seen_v.add(a)
                    queue.append((0, a))
                e = eidx[(a, b)]
                if e not in blocked_e and e not in seen_e:
                    seen_e.add(e)
                    queue.append((1, e))
    return seen_v, outer in seen_f


def surrounds(space: MetricSurface, loop: Loop, target: Iterable[int]) -> bool:
    """True iff every path in the surface from ``target`` to the outer face meets ``loop``."""
    space.require_embedding()
    target = {space.check_vertex(v) for v in target}
    if not target:
        raise errors.InputError("empty target")
    if target & loop.vertices:
        raise errors.LoopMeetsTarget("the loop passes through the target")
    if len(loop.waypoints) < 3:
        return False
    _, escaped = region_reach(space, loop.vertices, loop.edges(), target)
    return not escaped


# -- exact Sur by crossing parity ------------------------------------------------

def _crossing_edges(space: MetricSurface, start_face: int, allowed: np.ndarray) -> list[int]:
    """Edges crossed by a dual path from ``start_face`` to the outer face, counting only usable edges.

    0-1 BFS over faces: crossing an edge with both ends allowed costs 1,
    crossing any other edge is free, so the returned set is as small as possible.
    """
    eidx = _edge_index(space)
    nf = len(space.faces)
    dist = [math.inf] * nf
    via: list[tuple[int, int] | None] = [None] * nf
    dist[start_face] = 0
    dq = deque([start_face])
    while dq:
        f = dq.popleft()
        if f == space.outer_face:
            break
        for a, b in space.faces[f]:
            g = space.dart_face[(b, a)]
            cost = 1 if (allowed[a] and allowed[b]) else 0
            nd = dist[f] + cost
            if nd < dist[g]:
                dist[g] = nd
                via[g] = (f, eidx[(a, b)])
                if cost:
                    dq.append(g)
                else:
                    dq.appendleft(g)
    crossed = []
    g = space.outer_face
    while g != start_face:
        f, e = via[g]
        a, b, _ = space.edges[e]
        if allowed[a] and allowed[b]:
            crossed.append(e)
        g = f
    return crossed


def _odd_simple_cycle(walk: list[int], parity: dict[tuple[int, int], int], weight) -> list[int]:
    """Split a closed walk into simple cycles and return the shortest one with odd crossing parity."""
    best, best_len = None, math.inf
    stack: list[int] = []
    pos: dict[int, int] = {}
    for v in walk + [walk[0]]:
        if v in pos:
            i = pos[v]
            cyc = stack[i:]
            for u in cyc[1:]:
                del pos[u]
            del stack[i + 1:]
            if len(cyc) >= 3:  # a 2-cycle is an edge walked twice, always even
                par = sum(parity.get((cyc[j], cyc[(j + 1) % len(cyc)]), 0) for j in range(len(cyc))) % 2
                ln = sum(weight[(cyc[j], cyc[(j + 1) % len(cyc)])] for j in range(len(cyc)))
                if par and ln < best_len:
                    best, best_len = cyc, ln
        else:
            pos[v] = len(stack)
            stack.append(v)
    if best is None:  # pragma: no cover - an odd closed walk always contains an odd cycle
        raise RuntimeError("odd walk without odd cycle")
    return best


def sur(space: MetricSurface, p: int, r: float, local_radius: float | None = None) -> SurResult:
    """Exact Sur(p, r), or Sur_R(p, r) with ``local_radius`` R.

    Loops live on vertices outside the closed ball B(p, r) (and inside B(p, R)
    when R is given).  A loop surrounds the ball exactly when it crosses a
    fixed dual path from a face at p to the outer face an odd number of
    times, so the minimum is a shortest path in the two-sheeted cover that
    switches sheet at the crossed edges.  The returned witness is a simple
    cycle of the optimal length.
    """
    _check_surface(space)
    p = space.check_vertex(p)
    if r < 0:
        raise errors.NegativeRadius(f"negative radius {r}")
    if local_radius is not None and not r < local_radius:
        raise errors.BadRadii(f"need r < R, got r={r}, R={local_radius}")
    ball = space.ball(p, r)
    if ball & space.outer_vertices:
        raise errors.BallTouchesOuterFace(f"B({p}, {r}) reaches the outer face")
    allowed = np.ones(space.n, dtype=bool)
    allowed[list(ball)] = False
    if local_radius is not None:
        allowed &= np.isfinite(space.dist_within(p, local_radius))

    start_face = space.dart_face[(p, space.rotation[p][0])]
    crossed = _crossing_edges(space, start_face, allowed)
    if not crossed:
        raise errors.NoSurroundingLoop(f"no loop in the search region surrounds B({p}, {r})")
    crossed_set = set(crossed)

    verts = np.flatnonzero(allowed)
    local = {int(v): i for i, v in enumerate(verts)}
    k = len(verts)
    rows, cols, vals = [], [], []
    eidx = _edge_index(space)
    for u, v, w in space.edges:
        if allowed[u] and allowed[v]:
            a, b = local[u], local[v]
            flip = 1 if eidx[(u, v)] in crossed_set else 0
            for s in (0, 1):
                rows += [a + s * k, b + ((s ^ flip) * k)]
                cols += [b + ((s ^ flip) * k), a + s * k]
                vals += [w, w]
    cover = csr_matrix((vals, (rows, cols)), shape=(2 * k, 2 * k))

    # an odd loop uses some crossed edge a -> b and returns from b to a with an even number of crossings
    darts = []
    for e in crossed:
        u, v, w = space.edges[e]
        darts += [(u, v, w), (v, u, w)]
    sources = sorted({local[b] for _, b, _ in darts})
    dist, pred = dijkstra(cover, directed=False, indices=sources, return_predecessors=True)
    row_of = {s: i for i, s in enumerate(sources)}
    best = (math.inf, None)
    for a, b, w in darts:
        i = row_of[local[b]]
        total = w + dist[i, local[a]]
        if total < best[0] * (1 - REL_TOL) or (close_enough(total, best[0]) and (a, b) < best[1][:2]):
            best = (total, (a, b, i))
    value, (a, b, i) = best
    if not math.isfinite(value):
        raise errors.NoSurroundingLoop(f"no loop in the search region surrounds B({p}, {r})")

    # walk back from (a, sheet 0) to (b, sheet 0)
    path = []
    node = local[a]
    target = local[b]
    while node != target:
        path.append(int(verts[node % k]))
        node = pred[i, node]
    path.append(b)
    walk = path[::-1]  # b ... a, closed by the edge a -> b
    parity = {}
    for e in crossed:
        u, v, _ = space.edges[e]
        parity[(u, v)] = parity[(v, u)] = 1
    cycle = _odd_simple_cycle(walk, parity, space.weight)
    loop = space.make_loop(_canonical_cycle(cycle))
    return SurResult(float(loop.length), loop, local_radius)


def close_enough(a: float, b: float) -> bool:
    return math.isfinite(b) and abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


def _canonical_cycle(cycle: list[int]) -> list[int]:
    """Rotate a cycle to start at its least vertex, oriented toward the smaller neighbour."""
    i = cycle.index(min(cycle))
    c = cycle[i:] + cycle[:i]
    if len(c) > 2 and c[-1] < c[1]:
        c = [c[0]] + c[1:][::-1]
    return c


# -- diagnostics built on Sur ---------------------------------------------------

@dataclass(frozen=True)
class QuasiInvarianceSur:
    lhs_ok: bool
    rhs_ok: bool
    ratios: tuple[float, float]
    values: dict


def sur_quasi_invariance(space: MetricSurface, f: BiLipMap, p: int, p_prime: int, r: float, R: float) -> QuasiInvarianceSur:
    """Evaluate (1/L) Sur_LR(p', r/L) <= Sur_R(p, r) <= L Sur_R/L(p', L r).

    The two ratios are Sur_R(p, r) / ((1/L) Sur_LR(p', r/L)) and
    L Sur_R/L(p', L r) / Sur_R(p, r); an inequality holds when its ratio is >= 1.
    """
    L = f.constant
    if f(p) != p_prime:
        raise errors.InputError(f"the map sends {p} to {f(p)}, not {p_prime}")
    mid = sur(space, p, r, R).value
    low = sur(space, p_prime, r / L, L * R).value
    high = sur(space, p_prime, L * r, R / L).value
    q1 = mid / (low / L)
    q2 = (L * high) / mid
    tol = 1 - REL_TOL
    return QuasiInvarianceSur(q1 >= tol, q2 >= tol, (q1, q2), {"Sur_R(p,r)": mid, "Sur_LR(p',r/L)": low, "Sur_R/L(p',Lr)": high, "L": L})


@dataclass(frozen=True)
class SurBoundReport:
    k_emp: float
    passed: bool
    values: dict = field(default_factory=dict)  # (p, r) -> Sur
    reason: str = ""


def sur_bound_scan(space: MetricSurface, region: RegionSpec, radii: Sequence[float], points: Sequence[int] | None = None) -> SurBoundReport:
    """k_emp = max of Sur(p, r)/r over region points and radii.

    A space without surrounding loops (a tree, say) yields an infinite k_emp,
    ``passed`` false and the reason recorded.
    """
    members = region.validate(space)
    pts = sorted(points) if points is not None else sorted(members)
    values, k = {}, 0.0
    try:
        for p in pts:
            for r in radii:
                if not r > 0:
                    raise errors.BadRadii("radii must be positive")
                s = sur(space, p, r).value
                values[(p, float(r))] = s
                k = max(k, s / r)
    except errors.NoSurroundingLoop as exc:
        if isinstance(exc, errors.BallTouchesOuterFace):
            raise
        return SurBoundReport(math.inf, False, values, str(exc))
    return SurBoundReport(k, math.isfinite(k), values)


def component_of_center(space: MetricSurface, loop: Loop, p: int) -> set[int]:
    """Vertices in the component of p in the surface minus the loop."""
    comp, _ = region_reach(space, loop.vertices, loop.edges(), [p])
    return comp


def _loop_diameter(space: MetricSurface, loop: Loop) -> float:
    vs = sorted(loop.vertices)
    return float(space.dist_rows(vs)[:, vs].max())


def length_within(space: MetricSurface, loop: Loop, center: int, radius: float) -> float:
    """Length of the part of the loop (as a curve on the metric graph) inside the closed ball B(center, radius)."""
    d = space.dist_from(center)
    total = 0.0
    for a, b in loop.edges():
        w = space.weight[(a, b)]
        da, db = d[a], d[b]
        # a point at arc length t from a is at distance min(da + t, db + w - t) from the centre
        from_a = min(max(radius - da, 0.0), w)
        from_b = min(max(radius - db, 0.0), w)
        total += min(w, from_a + from_b)
    return total


@dataclass(frozen=True)
class VariousCheck:
    p: int
    r: float
    length: float
    clauses: dict  # clause number -> bool
    details: dict

    @property
    def passed(self) -> bool:
        return all(self.clauses.values())


def various_bounds_check(space: MetricSurface, constants: SurConstants, samples: Sequence[tuple[int, float]], local_radius: float | None = None) -> list[VariousCheck]:
    """Check the five geometric bounds on shortest surrounding loops.

    For each sample (p, r) with witness loop g:
    (1) diam(g) >= C0 r; (2) |g| >= C0 r; (3) for every p' on g, the length
    of g inside B(p', r') is at least r' at r' = C0 r / 2; (4) g lies in
    B(p, C1 |g|); (5) the component of p off g lies in B(p, C2 |g|).
    """
    out = []
    for p, r in samples:
        res = sur(space, p, r, local_radius)
        g = res.witness
        L = res.value
        diam = _loop_diameter(space, g)
        r_loc = constants.C0 * r / 2
        local_min = min(length_within(space, g, q, r_loc) for q in g.vertices)
        dp = space.dist_from(p)
        far_loop = float(max(dp[v] for v in g.vertices))
        comp = component_of_center(space, g, p)
        far_comp = float(max(dp[v] for v in comp))
        slack = REL_TOL * max(1.0, L)
        clauses = {
            1: diam >= constants.C0 * r - slack,
            2: L >= constants.C0 * r - slack,
            3: local_min >= r_loc - slack,
            4: far_loop <= constants.C1 * L + slack,
            5: far_comp <= constants.C2 * L + slack,
        }
        details = {"diam": diam, "local_radius": r_loc, "local_min_length": local_min, "loop_reach": far_loop, "component_reach": far_comp}
        out.append(VariousCheck(p, float(r), L, clauses, details))
    return out


@dataclass(frozen=True)
class LayeredCover:
    centers: tuple[int, ...]
    cover_radius: float
    verified: bool
    layer_counts: tuple[int, ...]
    C: float
    count_bound: float  # (4 K^2 C)^(k+1)


def _loop_net(space: MetricSurface, loop: Loop, separation: float) -> list[int]:
    """Greedy separation-separated subset of the loop vertices, swept along the loop."""
    chosen: list[int] = []
    mind = np.full(space.n, np.inf)
    for v in loop.waypoints:
        if mind[v] >= separation * (1 - REL_TOL):
            chosen.append(v)
            np.minimum(mind, space.dist_within(v, separation), out=mind)
    return chosen


def layered_cover(
    space: MetricSurface,
    p: int,
    r: float,
    k: int,
    net_separation: float | None = None,
    K: float = 1.0,
    local_radius: float | None = None,
) -> LayeredCover:
    """Build k layers of shortest surrounding loops and nets on them, then check the resulting cover.

    Layer 0 is {p}.  Each new layer surrounds the r-ball of every fresh centre of
    the previous layer by a shortest loop (searched inside B(q, local_radius),
    default 4r + 2 mesh) and keeps a net_separation-separated subset (default r/2)
    of each loop.  With C the largest loop length over r, the cover radius is
    C2 C r, and ``verified`` states that B(p, k r / 2) lies in the union of the
    cover balls around all centres.
    """
    if k < 0:
        raise errors.BadParameters("k must be nonnegative")
    _check_surface(space)
    p = space.check_vertex(p)
    sep = net_separation if net_separation is not None else r / 2
    R = local_radius if local_radius is not None else 4 * r + 2 * space.mesh
    consts = SurConstants(K)
    centers = [p]
    seen = {p}
    frontier = [p]
    counts = [1]
    C = 0.0
    for _ in range(k):
        fresh = []
        for q in frontier:
            try:
                res = sur(space, q, r, R)
            except errors.BallTouchesOuterFace as exc:
                raise errors.LayerEscapedRegion(f"layer around {q} reaches the outer face") from exc
            except errors.NoSurroundingLoop as exc:
                raise errors.LayerEscapedRegion(f"no loop around B({q}, {r}) fits in the space") from exc
            C = max(C, res.value / r) if r > 0 else C
            for v in _loop_net(space, res.witness, sep):
                if v not in seen:
                    seen.add(v)
                    fresh.append(v)
        centers += fresh
        counts.append(len(fresh))
        frontier = fresh
    cover_radius = consts.C2 * C * r
    target = space.ball(p, k * r / 2)
    covered = space.multi_source_distance(centers)
    verified = bool(all(covered[v] <= cover_radius * (1 + REL_TOL) + REL_TOL for v in target))
    bound = (4 * K**2 * C) ** (k + 1) if C > 0 else 1.0
    return LayeredCover(tuple(centers), cover_radius, verified, tuple(counts), C, bound)


def contractibility_constant(space: MetricSurface, samples: Sequence[tuple[int, float]], local_radius: float | None = None) -> float:
    """Largest (reach of the component of p off the Sur witness) / r over the samples.

    The reach is the largest distance from p to a vertex of that component.
    A zero reach counts as ratio 0, including at r = 0; a positive reach at
    r = 0 gives an infinite ratio.
    """
    worst = 0.0
    for p, r in samples:
        g = sur(space, p, r, local_radius).witness
        comp = component_of_center(space, g, p)
        reach = float(max(space.dist_from(p)[v] for v in comp))
        if reach == 0:
            ratio = 0.0
        elif r == 0:
            ratio = math.inf
        else:
            ratio = reach / r
        worst = max(worst, ratio)
    return worst
