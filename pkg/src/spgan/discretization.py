"""Uniform-grid discretization of a bounded box.

A schema maps points to bin indices (``project``) and bins back to random
points inside their cell (``representative``).  Composing the two gives
``reverse_discretize``, which re-randomizes real data within its cell so that
a discriminator cannot key on raw-value artifacts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

# Keeps representatives strictly inside their cell despite float rounding.
_EDGE_MARGIN = 1e-9


class OutOfBoxError(ValueError):
    pass


@dataclass(frozen=True)
class DiscretizationSchema:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    bins_per_dim: tuple[int, ...]
    out_of_bounds: str = "clip"  # or "error"

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        bins = np.atleast_1d(self.bins_per_dim).astype(int)
        if bins.size == 1 and len(lower) > 1:
            bins = np.repeat(bins, len(lower))
        bins = tuple(int(b) for b in bins)
        if not (len(lower) == len(upper) == len(bins)):
            raise ValueError("lower, upper and bins_per_dim must have equal length")
        if len(lower) not in (1, 2):
            raise ValueError("only 1D and 2D schemas are supported")
        if any(b < 1 for b in bins):
            raise ValueError("bins_per_dim must be positive")
        if any(not hi > lo for lo, hi in zip(lower, upper)):
            raise ValueError("upper bound must exceed lower bound in every dim")
        if self.out_of_bounds not in ("clip", "error"):
            raise ValueError("out_of_bounds must be 'clip' or 'error'")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "bins_per_dim", bins)

    @classmethod
    def uniform(cls, lower, upper, bins, dims=1, out_of_bounds="clip"):
        return cls((lower,) * dims, (upper,) * dims, (bins,) * dims, out_of_bounds)

    @property
    def dims(self) -> int:
        return len(self.lower)

    @property
    def n_bins(self) -> int:
        return int(np.prod(self.bins_per_dim))

    def to_dict(self) -> dict:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "bins_per_dim": list(self.bins_per_dim),
            "out_of_bounds": self.out_of_bounds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscretizationSchema":
        return cls(tuple(d["lower"]), tuple(d["upper"]), tuple(d["bins_per_dim"]),
                   d.get("out_of_bounds", "clip"))


def _as_points(schema: DiscretizationSchema, x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if schema.dims == 1:
        return pts.reshape(-1, 1)
    return pts.reshape(-1, schema.dims)


def project(schema: DiscretizationSchema, x):
    """Bin index of ``x`` (scalar/point or array of them).

    Cells are half-open except the last one, which also owns the upper edge.
    2D indices are row-major: ``i0 * bins[1] + i1``.
    """
    pts = _as_points(schema, x)
    lo = np.array(schema.lower)
    hi = np.array(schema.upper)
    bins = np.array(schema.bins_per_dim)
    outside = np.any((pts < lo) | (pts > hi) | ~np.isfinite(pts), axis=1)
    if outside.any():
        if schema.out_of_bounds == "error":
            raise OutOfBoxError(f"{int(outside.sum())} point(s) outside the schema box")
        logger.warning("clipping %d point(s) into the schema box", int(outside.sum()))
        pts = np.clip(np.nan_to_num(pts, nan=0.0), lo, hi)
    cell = np.floor((pts - lo) / (hi - lo) * bins).astype(np.int64)
    cell = np.clip(cell, 0, bins - 1)
    if schema.dims == 1:
        idx = cell[:, 0]
    else:
        idx = cell[:, 0] * bins[1] + cell[:, 1]
    if np.ndim(x) == 0 or (schema.dims == 2 and np.ndim(x) == 1):
        return int(idx[0])
    return idx


def cell_bounds(schema: DiscretizationSchema, bin_index: int):
    """(lower corner, upper corner) of a cell."""
    cells = _unravel(schema, np.atleast_1d(bin_index))[0]
    lo = np.array(schema.lower)
    w = (np.array(schema.upper) - lo) / np.array(schema.bins_per_dim)
    return lo + cells * w, lo + (cells + 1) * w


def _unravel(schema, bins_idx: np.ndarray) -> np.ndarray:
    bins_idx = np.asarray(bins_idx, dtype=np.int64)
    if np.any(bins_idx < 0) or np.any(bins_idx >= schema.n_bins):
        raise IndexError(f"bin index out of range [0, {schema.n_bins})")
    if schema.dims == 1:
        return bins_idx.reshape(-1, 1)
    b1 = schema.bins_per_dim[1]
    return np.stack([bins_idx // b1, bins_idx % b1], axis=1)


def representative(schema: DiscretizationSchema, bin_index, seed=None):
    """Uniform random point inside the cell of each bin.

    ``seed`` may be an int or a ``numpy.random.Generator``.  Returns a float
    (1D, scalar bin), a point (2D, scalar bin), or an array of those.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cells = _unravel(schema, np.atleast_1d(bin_index))
    lo = np.array(schema.lower)
    w = (np.array(schema.upper) - lo) / np.array(schema.bins_per_dim)
    u = rng.uniform(_EDGE_MARGIN, 1.0 - _EDGE_MARGIN, size=cells.shape)
    pts = lo + (cells + u) * w
    if schema.dims == 1:
        pts = pts[:, 0]
        return float(pts[0]) if np.ndim(bin_index) == 0 else pts
    return pts[0] if np.ndim(bin_index) == 0 else pts


def reverse_discretize(schema: DiscretizationSchema, x, seed=None):
    """representative(project(x)): same bin, fresh position inside it."""
    return representative(schema, project(schema, x), seed)
