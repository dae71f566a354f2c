"""Synthetic 2D locations near planted points of interest (POIs).

POIs are planted uniformly in the unit box, each with a category.  Actual
points are drawn by picking a POI with category-dependent weight (so dense
areas are picked more often) and jittering around it.  Semantic functions
count POIs within a radius, overall and per category.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..discretization import DiscretizationSchema, project, representative
from ..engine import SemanticFunction
from .base import Domain, rng_of

# relative pick weight per category; category 0 plays the "commercial" role
CATEGORY_WEIGHTS = (6.0, 1.0, 1.0, 0.3)
JITTER = 0.03


@dataclass(frozen=True)
class Point2DSample:
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class POIField:
    positions: np.ndarray  # (m, 2)
    categories: np.ndarray  # (m,)


def points2d_dataset(n: int, n_poi: int = 150, seed=0, jitter: float = JITTER):
    rng = rng_of(seed)
    n_cat = len(CATEGORY_WEIGHTS)
    field = POIField(rng.uniform(0.0, 1.0, size=(n_poi, 2)), rng.integers(0, n_cat, size=n_poi))
    w = np.array(CATEGORY_WEIGHTS)[field.categories]
    picks = rng.choice(n_poi, size=n, p=w / w.sum())
    pts = np.clip(field.positions[picks] + rng.normal(0.0, jitter, size=(n, 2)), 0.0, 1.0)
    return [Point2DSample(float(a), float(b)) for a, b in pts], field


def _coords(samples) -> np.ndarray:
    return np.array([[s.x, s.y] for s in samples], dtype=float).reshape(-1, 2)


def count_within(field: POIField, points: np.ndarray, radius: float, category=None) -> np.ndarray:
    pos = field.positions if category is None else field.positions[field.categories == category]
    if len(pos) == 0:
        return np.zeros(len(points))
    d2 = ((points[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
    return (d2 <= radius * radius).sum(axis=1).astype(float)


def points2d_semantic_functions(field: POIField, radii=(0.02, 0.05, 0.1, 0.2)) -> list:
    fns = []
    cats = [None] + sorted(set(int(c) for c in field.categories))
    for r in radii:
        for c in cats:
            tag = "all" if c is None else f"cat{c}"
            name = f"poi_{tag}_within_{r:g}"

            def batch(samples, r=r, c=c):
                return count_within(field, _coords(samples), r, c)

            def single(s, batch=batch):
                return float(batch([s])[0])

            fns.append(SemanticFunction(name, single, batch))
    return fns


class Points2DDomain(Domain):
    name = "points2d"
    kind = "categorical"

    def __init__(self, n=200, n_poi=150, grid=20, radii=(0.02, 0.05, 0.1, 0.2), jitter=JITTER, seed=0):
        self.actual, self.field = points2d_dataset(n, n_poi, seed, jitter)
        self.schema = DiscretizationSchema((0.0, 0.0), (1.0, 1.0), (grid, grid))
        self.functions = points2d_semantic_functions(self.field, radii)
        self.radii = tuple(radii)

    @property
    def n_outputs(self) -> int:
        return self.schema.n_bins

    def decode(self, output, rng):
        x, y = representative(self.schema, int(output), rng_of(rng))
        return Point2DSample(float(x), float(y))

    def reverse_discretize(self, sample, rng):
        return self.decode(project(self.schema, (sample.x, sample.y)), rng)

    def bins_of(self, samples) -> np.ndarray:
        return project(self.schema, _coords(samples))

    def invariants(self, samples) -> dict:
        pts = _coords(samples)
        out = {}
        for r in self.radii:
            out[f"mean_poi_within_{r:g}"] = float(count_within(self.field, pts, r).mean())
        return out

    def format_sample(self, sample) -> str:
        return f"{sample.x:.5f} {sample.y:.5f}"
