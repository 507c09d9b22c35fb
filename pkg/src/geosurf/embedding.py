"""Combinatorial planar-embedding helpers: components, faces around a set, exterior boundaries."""
from __future__ import annotations

from collections import deque
from typing import Iterable

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import errors
from .space import Loop, MetricSurface


def components_without(space: MetricSurface, removed: Iterable[int]) -> np.ndarray:
    """Component label of each vertex of G - removed; removed vertices get -1."""
    removed = np.fromiter(set(removed), dtype=int)
    keep = np.ones(space.n, dtype=bool)
    keep[removed] = False
    idx = np.flatnonzero(keep)
    labels = np.full(space.n, -1, dtype=int)
    if idx.size:
        sub = space.csr[idx][:, idx]
        _, lab = connected_components(sub, directed=False)
        labels[idx] = lab
    return labels


def component_of(space: MetricSurface, removed: Iterable[int], v: int) -> frozenset[int]:
    labels = components_without(space, removed)
    if labels[v] < 0:
        raise errors.InputError(f"vertex {v} was removed")
    return frozenset(np.flatnonzero(labels == labels[v]).tolist())


def faces_around(space: MetricSurface, vertices: Iterable[int]) -> set[int]:
    """Indices of faces incident to any of ``vertices``."""
    return {space.dart_face[(v, u)] for v in vertices for u in space.rotation[v]}


def exterior_boundary(space: MetricSurface, ball_set: Iterable[int]) -> Loop:
    """Boundary walk between the faces spanned by ``ball_set`` (holes filled) and the unbounded side.

    The region is the union of the closed faces incident to ``ball_set``; every
    face not reachable from the outer face through edges avoiding that region
    counts as a filled hole.  The walk keeps the region on its left.
    """
    space.require_embedding()
    ball_set = frozenset(space.check_vertex(v) for v in ball_set)
    if not ball_set:
        raise errors.InputError("ball set is empty")
    if ball_set & space.outer_vertices:
        raise errors.BallTouchesOuterFace("the set reaches the outer face; its exterior boundary is undefined")

    region = faces_around(space, ball_set)
    outside = {space.outer_face}
    queue = deque([space.outer_face])
    while queue:
        f = queue.popleft()
        for a, b in space.faces[f]:
            g = space.dart_face[(b, a)]
            if g not in region and g not in outside:
                outside.add(g)
                queue.append(g)

    boundary = sorted(d for d, f in space.dart_face.items() if f not in outside and space.dart_face[(d[1], d[0])] in outside)
    pos = [{u: i for i, u in enumerate(r)} for r in space.rotation]
    start = boundary[0]
    walk, seen = [], set()
    dart = start
    while True:
        seen.add(dart)
        walk.append(dart[0])
        a, b = dart
        rot = space.rotation[b]
        w = rot[(pos[b][a] - 1) % len(rot)]
        while space.dart_face[(w, b)] not in outside:
            w = rot[(pos[b][w] - 1) % len(rot)]
        dart = (b, w)
        if dart == start:
            break
    if len(seen) != len(boundary):  # pragma: no cover - a filled region has one boundary walk
        raise RuntimeError("exterior boundary split into several walks")
    return space.make_loop(walk)
