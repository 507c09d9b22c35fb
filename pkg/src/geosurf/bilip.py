"""Vertex maps between regions of a space and their certified biLipschitz constants."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import errors
from .space import MetricSurface

EXACT_LIMIT = 2000
DEFAULT_SAMPLES = 200_000


@dataclass(frozen=True)
class BiLipMap:
    domain: frozenset[int]
    assignment: Mapping[int, int] = field(hash=False)
    constant: float
    exact: bool = True
    sample_size: int | None = None
    label: str = ""

    def __call__(self, v: int) -> int:
        return self.assignment[v]

    @property
    def image(self) -> frozenset[int]:
        return frozenset(self.assignment[v] for v in self.domain)

    def inverse(self) -> "BiLipMap":
        inv = {w: v for v, w in self.assignment.items() if v in self.domain}
        return BiLipMap(self.image, inv, self.constant, self.exact, self.sample_size, self.label + "^-1")


def bilip_constant(d_dom: np.ndarray, d_img: np.ndarray) -> float:
    """Least L with d_dom/L <= d_img <= L d_dom over the off-diagonal entries."""
    mask = ~np.eye(d_dom.shape[0], dtype=bool) if d_dom.ndim == 2 else np.ones_like(d_dom, dtype=bool)
    a, b = d_dom[mask], d_img[mask]
    if a.size == 0:
        return 1.0
    if np.any(b <= 0):
        return float("inf")
    return float(max(1.0, np.max(b / a), np.max(a / b)))


def certify_bilip(
    space: MetricSurface,
    assignment: Mapping[int, int],
    domain=None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    label: str = "",
) -> BiLipMap:
    """Certify the biLipschitz constant of ``assignment`` restricted to ``domain``.

    All pairs are checked when the domain has at most 2000 vertices; larger
    domains are checked on ``samples`` random pairs and flagged as sampled.
    """
    if domain is None:
        domain = assignment.keys()
    dom = sorted({space.check_vertex(v) for v in domain})
    if not dom:
        raise errors.EmptyDomain("empty domain")
    missing = [v for v in dom if v not in assignment]
    if missing:
        raise errors.InputError(f"assignment undefined on {missing[:5]}")
    img = [space.check_vertex(assignment[v]) for v in dom]
    if len(set(img)) != len(img):
        raise errors.NotInjective("assignment is not injective on the domain")
    amap = {v: assignment[v] for v in dom}
    if len(dom) <= EXACT_LIMIT:
        d_dom = space.dist_rows(dom)[:, dom]
        d_img = space.dist_rows(img)[:, img]
        return BiLipMap(frozenset(dom), amap, bilip_constant(d_dom, d_img), True, None, label)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(dom), samples)
    j = rng.integers(0, len(dom), samples)
    keep = i != j
    i, j = i[keep], j[keep]
    dom_a, img_a = np.asarray(dom), np.asarray(img)
    a = np.array([space.distance(x, y) for x, y in zip(dom_a[i], dom_a[j])])
    b = np.array([space.distance(x, y) for x, y in zip(img_a[i], img_a[j])])
    return BiLipMap(frozenset(dom), amap, bilip_constant(a, b), False, int(keep.sum()), label)
