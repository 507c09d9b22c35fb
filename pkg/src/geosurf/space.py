"""Finite geodesic surfaces: edge-weighted graphs with an optional planar embedding.

Vertices are the integers ``0..n-1``.  Spaces read from files may carry other
ids; they are relabelled in sorted order, so the integer order agrees with the
order of the original ids and lexicographic tie-breaking is unaffected.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from . import errors

# relative tolerance for comparing sums of float edge lengths
REL_TOL = 1e-9


def close(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class Geodesic:
    waypoints: tuple[int, ...]
    length: float

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(self.waypoints)

    @property
    def start(self) -> int:
        return self.waypoints[0]

    @property
    def end(self) -> int:
        return self.waypoints[-1]


@dataclass(frozen=True)
class Loop:
    """Closed edge walk; ``waypoints`` lists each vertex once per visit, without repeating the start."""

    waypoints: tuple[int, ...]
    length: float
    simple: bool

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(self.waypoints)

    def edges(self) -> list[tuple[int, int]]:
        w = self.waypoints
        if len(w) < 2:
            return []
        return [(w[i], w[(i + 1) % len(w)]) for i in range(len(w))]


@dataclass(frozen=True)
class RegionSpec:
    center: int
    radius: float

    def validate(self, space: "MetricSurface") -> frozenset[int]:
        space.check_vertex(self.center)
        if not self.radius > 0:
            raise errors.BadRegion(f"region radius must be positive, got {self.radius}")
        members = space.ball(self.center, self.radius)
        if len(members) >= space.n:
            raise errors.BadRegion("region ball covers the whole space; no margin to the boundary")
        return members

    def margin_ratio(self, space: "MetricSurface") -> float:
        """Ratio between the space radius around the center and the region radius."""
        return float(np.max(space.dist_from(self.center))) / self.radius


def _trace_faces(rotation: Sequence[Sequence[int]]):
    """Trace the faces of a rotation system (counterclockwise neighbour order).

    The successor of dart (u, v) is (v, w) with w the neighbour preceding u
    around v, which keeps each face on the left.  Returns the list of faces as
    dart tuples and the dart -> face index map.
    """
    pos = [{u: i for i, u in enumerate(rot)} for rot in rotation]
    dart_face: dict[tuple[int, int], int] = {}
    faces: list[tuple[tuple[int, int], ...]] = []
    for v, rot in enumerate(rotation):
        for u in rot:
            if (v, u) in dart_face:
                continue
            face = []
            dart = (v, u)
            while dart not in dart_face:
                dart_face[dart] = len(faces)
                face.append(dart)
                a, b = dart
                rb = rotation[b]
                dart = (b, rb[(pos[b][a] - 1) % len(rb)])
            if dart != (v, u):
                raise errors.InvalidEmbedding("face tracing did not close up")
            faces.append(tuple(face))
    return faces, dart_face


class MetricSurface:
    """Connected edge-weighted graph standing in for a geodesic surface.

    Immutable after construction.  Distances come from single-source shortest
    paths and are cached per source; the cache is guarded by a lock so a space
    can be shared between threads.
    """

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int, float]],
        origin: int = 0,
        rotation: Sequence[Sequence[int]] | None = None,
        outer_face: Sequence[tuple[int, int]] | None = None,
        coords: Sequence[Sequence[float]] | None = None,
        labels: Sequence[Any] | None = None,
        snowflake: float | None = None,
        family: Mapping[str, Any] | None = None,
    ):
        if n < 1:
            raise errors.InputError("a space needs at least one vertex")
        self.n = int(n)
        self.labels = tuple(labels) if labels is not None else tuple(range(self.n))
        if not 0 <= origin < self.n:
            raise errors.MissingOrigin(f"origin {origin!r} is not a vertex")
        self.origin = int(origin)

        weight: dict[tuple[int, int], float] = {}
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise errors.UnknownVertex(f"edge ({u}, {v}) uses an unknown vertex")
            if u == v:
                raise errors.InputError(f"self-loop at vertex {u}")
            if not (w > 0 and math.isfinite(w)):
                raise errors.NonPositiveEdge(f"edge ({u}, {v}) has length {w}")
            if (u, v) in weight:
                raise errors.InputError(f"duplicate edge ({u}, {v})")
            weight[(u, v)] = weight[(v, u)] = w
            nbrs[u].append(v)
            nbrs[v].append(u)
        self.weight = weight
        self.edges = tuple(sorted((u, v, w) for (u, v), w in weight.items() if u < v))
        self.neighbors = tuple(tuple(sorted(x)) for x in nbrs)
        self.mesh = max((w for _, _, w in self.edges), default=0.0)
        self.min_edge = min((w for _, _, w in self.edges), default=0.0)

        rows = [u for u, v, _ in self.edges] + [v for u, v, _ in self.edges]
        cols = [v for u, v, _ in self.edges] + [u for u, v, _ in self.edges]
        vals = [w for *_, w in self.edges] * 2
        self.csr = csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        ncomp, _ = connected_components(self.csr, directed=False)
        if ncomp != 1:
            raise errors.DisconnectedGraph(f"graph has {ncomp} connected components")

        if snowflake is not None and not 0 < snowflake < 1:
            raise errors.BadParameters(f"snowflake exponent must lie in (0, 1), got {snowflake}")
        self.snowflake = snowflake
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self.family = dict(family or {})

        self.rotation = None
        self.faces: tuple = ()
        self.dart_face: dict[tuple[int, int], int] = {}
        self.outer_face: int | None = None
        self.outer_vertices: frozenset[int] = frozenset()
        if rotation is not None:
            self._set_embedding(rotation, outer_face)

        self._rows: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        self._geodesics: dict[tuple[int, int], Geodesic] = {}

    # -- embedding -------------------------------------------------------
    def _set_embedding(self, rotation, outer_face) -> None:
        if len(rotation) != self.n:
            raise errors.InvalidEmbedding("rotation system must list every vertex")
        rot = tuple(tuple(int(u) for u in r) for r in rotation)
        for v, r in enumerate(rot):
            if sorted(r) != list(self.neighbors[v]):
                raise errors.InvalidEmbedding(f"rotation at vertex {v} is not a permutation of its neighbours")
        faces, dart_face = _trace_faces(rot)
        euler = self.n - len(self.edges) + len(faces)
        if euler != 2:
            raise errors.InvalidEmbedding(f"traced complex has Euler characteristic {euler}, expected 2")
        self.rotation = rot
        self.faces = tuple(faces)
        self.dart_face = dart_face
        self.outer_face = self._pick_outer_face(outer_face)
        self.outer_vertices = frozenset(u for u, _ in self.faces[self.outer_face])

    def _pick_outer_face(self, outer_face) -> int:
        if outer_face is not None:
            wanted = {frozenset((int(a), int(b))) for a, b in outer_face}
            for i, face in enumerate(self.faces):
                if {frozenset(d) for d in face} == wanted:
                    return i
            raise errors.InvalidEmbedding("declared outer face is not one of the traced faces")
        if self.coords is not None:
            # faces traced with the face on the left: bounded faces are counterclockwise
            def area(face):
                return sum(self.coords[a][0] * self.coords[b][1] - self.coords[b][0] * self.coords[a][1] for a, b in face)

            return min(range(len(self.faces)), key=lambda i: (area(self.faces[i]), i))
        return max(range(len(self.faces)), key=lambda i: (len(self.faces[i]), -i))

    @property
    def has_embedding(self) -> bool:
        return self.rotation is not None

    @property
    def bounded_faces(self) -> list[int]:
        return [i for i in range(len(self.faces)) if i != self.outer_face]

    @property
    def is_geodesic(self) -> bool:
        return self.snowflake is None

    def require_geodesic(self, what: str = "this operation") -> None:
        if not self.is_geodesic:
            raise errors.NonGeodesicSpace(f"{what} needs a geodesic space; this one is snowflaked")

    def require_embedding(self) -> None:
        if self.rotation is None:
            raise errors.NoEmbedding("space has no rotation system")

    # -- distances ---------------------------------------------------------
    def check_vertex(self, p) -> int:
        if isinstance(p, (bool, np.bool_)) or not isinstance(p, (int, np.integer)) or not 0 <= p < self.n:
            raise errors.UnknownVertex(f"unknown vertex {p!r}")
        return int(p)

    def _postprocess(self, d: np.ndarray) -> np.ndarray:
        if self.snowflake is not None:
            d = np.power(d, self.snowflake)
        return d

    def dist_from(self, p: int) -> np.ndarray:
        """Distances from ``p`` to every vertex (read-only array)."""
        p = self.check_vertex(p)
        row = self._rows.get(p)
        if row is None:
            row = self._postprocess(dijkstra(self.csr, directed=False, indices=p))
            row.flags.writeable = False
            with self._lock:
                self._rows[p] = row
        return row

    def dist_rows(self, sources: Sequence[int]) -> np.ndarray:
        """Stacked distance rows for ``sources``; missing rows are computed in one batch."""
        sources = [self.check_vertex(p) for p in sources]
        missing = sorted({p for p in sources if p not in self._rows})
        if missing:
            block = self._postprocess(dijkstra(self.csr, directed=False, indices=missing))
            with self._lock:
                for p, row in zip(missing, block):
                    row = row.copy()
                    row.flags.writeable = False
                    self._rows[p] = row
        if not sources:
            return np.zeros((0, self.n))
        return np.vstack([self._rows[p] for p in sources])

    def dist_within(self, p: int, limit: float) -> np.ndarray:
        """Distances from ``p`` with every value above ``limit`` reported as inf."""
        p = self.check_vertex(p)
        row = self._rows.get(p)
        if row is not None:
            out = row.copy()
            out[out > limit * (1 + REL_TOL) + REL_TOL] = np.inf
            return out
        base = limit if self.snowflake is None else limit ** (1.0 / self.snowflake)
        d = dijkstra(self.csr, directed=False, indices=p, limit=base * (1 + 1e-12) + 1e-12)
        d = self._postprocess(d)
        d[d > limit * (1 + REL_TOL) + REL_TOL] = np.inf
        return d

    def distance(self, p: int, q: int) -> float:
        self.check_vertex(q)
        return float(self.dist_from(p)[q])

    def multi_source_distance(self, sources: Iterable[int]) -> np.ndarray:
        """d(v, S) for every vertex v, S a nonempty vertex set."""
        sources = sorted({self.check_vertex(s) for s in sources})
        if not sources:
            raise errors.InputError("source set is empty")
        d = dijkstra(self.csr, directed=False, indices=sources, min_only=True)
        return self._postprocess(d)

    def ball(self, p: int, r: float) -> frozenset[int]:
        """Closed ball {q : d(p, q) <= r}."""
        if r < 0:
            raise errors.NegativeRadius(f"negative radius {r}")
        d = self.dist_within(p, r)
        return frozenset(np.flatnonzero(np.isfinite(d)).tolist())

    def diameter(self) -> float:
        rows = self.dist_rows(range(self.n))
        return float(rows.max())

    # -- geodesics -----------------------------------------------------
    def geodesic(self, p: int, q: int) -> Geodesic:
        """Lexicographically least shortest path from p to q."""
        self.require_geodesic("geodesic")
        p, q = self.check_vertex(p), self.check_vertex(q)
        key = (p, q)
        hit = self._geodesics.get(key)
        if hit is not None:
            return hit
        dq = self.dist_from(q)
        path = [p]
        v = p
        while v != q:
            for u in self.neighbors[v]:
                if close(self.weight[(v, u)] + dq[u], dq[v]) and dq[u] < dq[v]:
                    path.append(u)
                    v = u
                    break
            else:  # pragma: no cover - distances from dijkstra always admit a step
                raise RuntimeError("no shortest-path step found")
        g = Geodesic(tuple(path), float(dq[p]))
        with self._lock:
            self._geodesics[key] = g
        return g

    def path_length(self, waypoints: Sequence[int], closed: bool = False) -> float:
        total = 0.0
        pairs = list(zip(waypoints, waypoints[1:]))
        if closed and len(waypoints) > 1:
            pairs.append((waypoints[-1], waypoints[0]))
        for a, b in pairs:
            w = self.weight.get((a, b))
            if w is None:
                raise errors.InvalidCurve(f"({a}, {b}) is not an edge")
            total += w
        return total

    def make_loop(self, waypoints: Sequence[int]) -> Loop:
        waypoints = tuple(int(v) for v in waypoints)
        length = self.path_length(waypoints, closed=True) if len(waypoints) > 1 else 0.0
        return Loop(waypoints, length, len(set(waypoints)) == len(waypoints))

    # -- misc --------------------------------------------------------------
    def grid_index(self, x: int, y: int) -> int:
        """Vertex id of grid coordinate (x, y) for grid-family spaces."""
        side = self.family.get("n")
        if side is None or self.family.get("kind") not in GRID_KINDS:
            raise errors.UnsupportedFamily("not a grid-family space")
        if not (0 <= x < side and 0 <= y < side):
            raise errors.UnknownVertex(f"grid coordinate ({x}, {y}) outside the grid")
        return y * side + x

    def grid_coord(self, v: int) -> tuple[int, int]:
        side = self.family.get("n")
        if side is None or self.family.get("kind") not in GRID_KINDS:
            raise errors.UnsupportedFamily("not a grid-family space")
        return v % side, v // side

    def __repr__(self) -> str:
        kind = self.family.get("kind", "custom")
        return f"MetricSurface({kind}, n={self.n}, edges={len(self.edges)}, mesh={self.mesh:g})"


GRID_KINDS = ("euclidean_grid", "conformal_grid", "hyperbolic_grid", "snowflake_grid")


# -- module-level operations ---------------------------------------------------

def build_space(spec: Mapping[str, Any]) -> MetricSurface:
    """Validate a space description (the JSON space-file shape) and build the space.

    ``vertices`` holds ids, or objects ``{"id": .., "xy": [x, y]}``; ``edges`` holds
    ``[u, v, length]``; ``rotation`` maps each id to its neighbours in counterclockwise
    order; ``outer_face`` is a list of ``[u, v]`` pairs; ``origin`` is an id.
    """
    raw_vertices = spec.get("vertices")
    if not raw_vertices:
        raise errors.InputError("space description lists no vertices")
    ids, xy = [], {}
    for item in raw_vertices:
        if isinstance(item, Mapping):
            ids.append(item["id"])
            if item.get("xy") is not None:
                xy[item["id"]] = item["xy"]
        else:
            ids.append(item)
    if len(set(ids)) != len(ids):
        raise errors.InputError("duplicate vertex ids")
    try:
        labels = sorted(ids)
    except TypeError as exc:
        raise errors.InputError("vertex ids must be mutually comparable") from exc
    index = {v: i for i, v in enumerate(labels)}

    def idx(v):
        v = _json_key(v, index)
        if v not in index:
            raise errors.UnknownVertex(f"unknown vertex {v!r}")
        return index[v]

    edges = [(idx(u), idx(v), w) for u, v, w in spec.get("edges", [])]
    if "origin" not in spec or _json_key(spec["origin"], index) not in index:
        raise errors.MissingOrigin(f"origin {spec.get('origin')!r} is not a vertex")
    rotation = None
    if spec.get("rotation") is not None:
        rot_in = {_json_key(k, index): v for k, v in spec["rotation"].items()}
        rotation = [[idx(u) for u in rot_in.get(v, [])] for v in labels]
    outer = None
    if spec.get("outer_face") is not None:
        outer = [(idx(a), idx(b)) for a, b, *_ in spec["outer_face"]]
    coords = None
    if xy and len(xy) == len(labels):
        coords = [xy[v] for v in labels]
    metric = spec.get("metric") or {}
    snowflake = metric.get("theta") if metric.get("kind") == "snowflake" else None
    return MetricSurface(
        len(labels),
        edges,
        origin=idx(spec["origin"]),
        rotation=rotation,
        outer_face=outer,
        coords=coords,
        labels=labels,
        snowflake=snowflake,
        family=spec.get("family"),
    )


def _json_key(v, index):
    # JSON object keys are strings; map them back to integer ids when needed
    if v in index:
        return v
    if isinstance(v, str):
        try:
            iv = int(v)
        except ValueError:
            return v
        if iv in index:
            return iv
    return v


def describe_space(space: MetricSurface) -> dict[str, Any]:
    """Inverse of :func:`build_space`: the JSON-ready space description."""
    lab = space.labels
    vertices: list[Any] = []
    for i in range(space.n):
        if space.coords is not None:
            vertices.append({"id": lab[i], "xy": [float(c) for c in space.coords[i]]})
        else:
            vertices.append(lab[i])
    out: dict[str, Any] = {
        "vertices": vertices,
        "edges": [[lab[u], lab[v], w] for u, v, w in space.edges],
        "origin": lab[space.origin],
    }
    if space.rotation is not None:
        out["rotation"] = {str(lab[v]): [lab[u] for u in r] for v, r in enumerate(space.rotation)}
        out["outer_face"] = [[lab[a], lab[b]] for a, b in space.faces[space.outer_face]]
    if space.snowflake is not None:
        out["metric"] = {"kind": "snowflake", "theta": space.snowflake}
    if space.family:
        out["family"] = dict(space.family)
    return out


def loop_edge_list(space: MetricSurface, loop: Loop) -> list[list[Any]]:
    """A loop in the space file's ``[u, v, length]`` edge syntax."""
    lab = space.labels
    return [[lab[a], lab[b], space.weight[(a, b)]] for a, b in loop.edges()]


def distance(space: MetricSurface, p: int, q: int) -> float:
    return space.distance(p, q)


def geodesic(space: MetricSurface, p: int, q: int) -> Geodesic:
    return space.geodesic(p, q)


def ball(space: MetricSurface, p: int, r: float) -> frozenset[int]:
    return space.ball(p, r)
