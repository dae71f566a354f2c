"""Noisy straight lines y_t = beta * t + noise, generated as increment tokens."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..discretization import DiscretizationSchema, project, representative
from ..engine import SemanticFunction
from .base import SequenceDomain, rng_of, strip_end


@dataclass(frozen=True, eq=False)
class LineSample:
    y: np.ndarray
    beta: float | None = None  # ground truth slope, evaluation only


def lines_dataset(n: int, T: int = 8, sigma: float = 0.01, seed=0) -> list:
    if n < 1 or T < 3:
        raise ValueError("lines_dataset needs n >= 1 and T >= 3")
    rng = rng_of(seed)
    t = np.arange(T)
    out = []
    for _ in range(n):
        beta = rng.uniform(0.0, 1.0)
        out.append(LineSample(beta * t + rng.normal(0.0, sigma, size=T), float(beta)))
    return out


def _diffs(s) -> np.ndarray:
    y = s.y if isinstance(s, LineSample) else np.asarray(s, dtype=float)
    return np.diff(y)


def std_of_diffs(s) -> float:
    """Population std of consecutive differences; the lines invariant."""
    d = _diffs(s)
    if not d.size:
        return float("nan")
    # differences equal up to rounding count as constant
    if np.ptp(d) <= 8 * np.finfo(float).eps * np.max(np.abs(d)):
        return 0.0
    return float(np.std(d))


def mean_of_diffs(s) -> float:
    d = _diffs(s)
    return float(np.mean(d)) if d.size else float("nan")


def length(s) -> float:
    y = s.y if isinstance(s, LineSample) else np.asarray(s)
    return float(len(y))


def lines_semantic_functions() -> list:
    return [
        SemanticFunction("std_diff", std_of_diffs),
        SemanticFunction("mean_diff", mean_of_diffs),
        SemanticFunction("length", length),
    ]


class LinesDomain(SequenceDomain):
    name = "lines"

    def __init__(self, n=16, T=8, sigma=0.01, bins=49, seed=0):
        self.T = T
        self.schema = DiscretizationSchema((0.0,), (1.0,), (bins,))
        self.symbols = tuple(str(k) for k in range(bins))
        self.max_len = T - 1  # fixed length: the generator never emits the end marker
        self.emit_end = False
        self.actual = lines_dataset(n, T, sigma, seed)
        self.functions = lines_semantic_functions()
        self.actual_sequences = [self.tokens_of(s) for s in self.actual]

    def tokens_of(self, sample) -> list:
        inc = np.clip(_diffs(sample), 0.0, 1.0)
        return [self.symbols[k] for k in project(self.schema, inc)]

    def _increments(self, tokens, rng):
        syms, _ = strip_end(tokens)
        if not syms:
            return np.zeros(0)
        return np.atleast_1d(representative(self.schema, np.array([int(s) for s in syms]), rng))

    def decode(self, tokens, rng, y0=0.0):
        inc = self._increments(tokens, rng_of(rng))
        return LineSample(np.r_[y0, y0 + np.cumsum(inc)])

    def reverse_discretize(self, sample, rng):
        return self.decode(self.tokens_of(sample), rng, y0=float(sample.y[0]))

    def views(self, tokens, rng) -> list:
        inc = self._increments(tokens, rng_of(rng))
        y = np.r_[0.0, np.cumsum(inc)]
        out = []
        for t in range(1, len(tokens) + 1):
            k = min(t, len(inc))
            out.append(LineSample(y[:k + 1]))
        return out

    def invariants(self, samples) -> dict:
        f = np.array([std_of_diffs(s) for s in samples])
        m = np.array([mean_of_diffs(s) for s in samples])
        return {"f_mean": float(np.nanmean(f)), "mean_diff_mean": float(np.nanmean(m)),
                "length_mean": float(np.mean([len(s.y) for s in samples]))}

    def format_sample(self, sample) -> str:
        return " ".join(f"{v:.4f}" for v in sample.y)
