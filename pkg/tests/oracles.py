"""Independent reference computations used to freeze and cross-check expected values.

Nothing here calls the package's algorithms for the quantity being checked:
the surrounding oracle enumerates simple cycles and decides enclosure
geometrically from vertex coordinates, the cover oracle tries all centre sets.
"""
from __future__ import annotations

import heapq
import itertools
import math
import random
from collections import deque

import numpy as np

from geosurf.space import MetricSurface


def adjacency(space):
    adj = {v: {} for v in range(space.n)}
    for u, v, w in space.edges:
        adj[u][v] = w
        adj[v][u] = w
    return adj


def dijkstra_dict(adj, sources, allowed=None):
    """Plain heap Dijkstra; ``sources`` maps vertex -> initial distance."""
    dist = dict(sources)
    heap = [(d, v) for v, d in dist.items()]
    heapq.heapify(heap)
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist.get(v, math.inf):
            continue
        for u, w in adj[v].items():
            if allowed is not None and u not in allowed:
                continue
            nd = d + w
            if nd < dist.get(u, math.inf) - 1e-12:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def point_in_polygon(pt, poly):
    x, y = pt
    inside = False
    k = len(poly)
    for i in range(k):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % k]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def bfs_path(adj, src, dst):
    prev = {src: None}
    q = deque([src])
    while q:
        v = q.popleft()
        if v == dst:
            break
        for u in sorted(adj[v]):
            if u not in prev:
                prev[u] = v
                q.append(u)
    path = [dst]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def enclosing_walk_bound(space: MetricSurface, p: int, allowed, adj=None):
    """Length of the shortest face walk of the allowed straight-line subgraph around p, or None.

    Faces are traced from the coordinates alone.  A closed walk with odd
    crossing parity around p contains a simple cycle enclosing p, so the
    result bounds the shortest enclosing cycle; None means no cycle of the
    subgraph encloses p.
    """
    adj = adj or adjacency(space)
    xy = space.coords
    nbrs = {}
    for v in allowed:
        around = [u for u in adj[v] if u in allowed]
        nbrs[v] = sorted(around, key=lambda u: math.atan2(xy[u][1] - xy[v][1], xy[u][0] - xy[v][0]))
    used = set()
    best = None
    for v in sorted(nbrs):
        for u in nbrs[v]:
            if (v, u) in used:
                continue
            walk, length = [], 0.0
            a, b = v, u
            while (a, b) not in used:
                used.add((a, b))
                walk.append(a)
                length += adj[a][b]
                ring = nbrs[b]
                a, b = b, ring[(ring.index(a) - 1) % len(ring)]
            if point_in_polygon(xy[p], [xy[x] for x in walk]) and (best is None or length < best):
                best = length
    return best


def min_enclosing_cycle(space: MetricSurface, p: int, r: float, R: float | None = None, bound: float = math.inf, n_rays: int = 8):
    """Shortest simple cycle avoiding B(p, r) (inside B(p, R)) whose polygon contains p.

    Branch and bound over simple cycles.  Every enclosing cycle meets each
    ray (a graph path from p to the outer boundary); roots are the vertices of
    one ray, each removed once processed.  Returns (length, cycle) or
    (None, None) when no enclosing cycle of length <= bound exists.
    """
    adj = adjacency(space)
    dp = dijkstra_dict(adj, {p: 0.0})
    ball = {v for v, d in dp.items() if d <= r + 1e-9}
    allowed = {v for v in range(space.n) if v not in ball and (R is None or dp[v] <= R + 1e-9)}
    xy = space.coords
    outer = sorted(space.outer_vertices, key=lambda v: math.atan2(xy[v][1] - xy[p][1], xy[v][0] - xy[p][0]))
    picks = [outer[int(i)] for i in np.linspace(0, len(outer) - 1, min(n_rays, len(outer))).round()]
    rays = []
    for t in dict.fromkeys(picks):
        part = [v for v in bfs_path(adj, p, t) if v in allowed]
        if not part:
            return None, None
        rays.append(part)
    rays.sort(key=len)
    roots = rays[0]
    walk_bound = enclosing_walk_bound(space, p, allowed, adj)
    if walk_bound is None:
        return None, None
    bound = min(bound, walk_bound)
    best = [bound * (1 + 1e-9) + 1e-9, None]
    removed: set[int] = set()
    for s in roots:
        live = allowed - removed
        if s not in live:
            continue
        ds = dijkstra_dict(adj, {s: 0.0}, live)
        hs = []
        for ray in rays[1:]:
            starts = {x: ds[x] for x in ray if x in ds}
            hs.append(dijkstra_dict(adj, starts, live) if starts else {})
        path = [s]
        on_path = {s}
        ray_sets = [set(ray) for ray in rays[1:]]

        def lower(v, hit):
            lb = ds.get(v, math.inf)
            for j, h in enumerate(hs):
                if not hit >> j & 1:
                    lb = max(lb, h.get(v, math.inf))
            return lb

        def hits(v):
            m = 0
            for j, rs in enumerate(ray_sets):
                if v in rs:
                    m |= 1 << j
            return m

        full = (1 << len(hs)) - 1

        def dfs(v, length, hit):
            for u in sorted(adj[v]):
                if u not in live:
                    continue
                w = adj[v][u]
                if u == s:
                    if len(path) >= 3 and hit == full and length + w <= best[0]:
                        poly = [xy[x] for x in path]
                        if point_in_polygon(xy[p], poly):
                            best[0] = length + w
                            best[1] = list(path)
                    continue
                if u in on_path:
                    continue
                nh = hit | hits(u)
                if length + w + lower(u, nh) > best[0]:
                    continue
                path.append(u)
                on_path.add(u)
                dfs(u, length + w, nh)
                path.pop()
                on_path.discard(u)

        dfs(s, 0.0, hits(s))
        removed.add(s)
    if best[1] is None:
        return None, None
    return best[0], best[1]


def min_cover_bruteforce(space: MetricSurface, p: int, R: float, r: float) -> int:
    """Least number of closed r-balls (centres anywhere) covering B(p, R), by trying all centre sets."""
    adj = adjacency(space)
    target = sorted(v for v, d in dijkstra_dict(adj, {p: 0.0}).items() if d <= R + 1e-9)
    balls = {}
    for c in range(space.n):
        dc = dijkstra_dict(adj, {c: 0.0})
        cov = frozenset(v for v in target if dc.get(v, math.inf) <= r + 1e-9)
        if cov:
            balls[c] = cov
    need = frozenset(target)
    cands = list(set(balls.values()))
    for k in range(1, len(target) + 1):
        for combo in itertools.combinations(cands, k):
            if frozenset().union(*combo) >= need:
                return k
    raise AssertionError("unreachable")


def random_planar_space(seed: int, side: int | None = None) -> MetricSurface:
    """Perturbed-weight grid with random diagonals and deletions, straight-line embedded."""
    rng = random.Random(seed)
    m = side or rng.randint(7, 14)
    xy = [(x, y) for y in range(m) for x in range(m)]
    edges = {}
    for y in range(m):
        for x in range(m):
            v = y * m + x
            if x + 1 < m:
                edges[(v, v + 1)] = None
            if y + 1 < m:
                edges[(v, v + m)] = None
            if x + 1 < m and y + 1 < m and rng.random() < 0.4:
                if rng.random() < 0.5:
                    edges[(v, v + m + 1)] = None
                else:
                    edges[(v + 1, v + m)] = None
    keys = list(edges)
    rng.shuffle(keys)
    adj = {v: set() for v in range(m * m)}
    for u, v in keys:
        adj[u].add(v)
        adj[v].add(u)

    def connected():
        seen = {0}
        q = [0]
        while q:
            v = q.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    q.append(u)
        return len(seen) == m * m

    for u, v in keys[: len(keys) // 8]:
        adj[u].discard(v)
        adj[v].discard(u)
        if not connected():
            adj[u].add(v)
            adj[v].add(u)
        else:
            del edges[(u, v)]
    out = []
    for (u, v) in sorted(edges):
        geo = math.dist(xy[u], xy[v])
        out.append((u, v, round(geo * rng.uniform(0.6, 1.8), 3)))
    rotation = []
    for v in range(m * m):
        nb = sorted(adj[v], key=lambda u: math.atan2(xy[u][1] - xy[v][1], xy[u][0] - xy[v][0]))
        rotation.append(nb)
    origin = (m // 2) * m + m // 2
    return MetricSurface(m * m, out, origin=origin, rotation=rotation, coords=xy, family={"kind": "random_planar", "seed": seed, "n": m})
