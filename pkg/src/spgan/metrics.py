"""Evaluation metrics: rank AUC, validity/uniqueness/novelty, property alignment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=float)
    # tie groups: runs of equal values share the mean of their 1-based ranks
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(values)]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    return ranks


def auc(pos_scores, neg_scores) -> float:
    """Pr[pos > neg] + 0.5 * Pr[pos == neg], via average ranks over tie groups."""
    pos = np.asarray(pos_scores, dtype=float).ravel()
    neg = np.asarray(neg_scores, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("auc needs at least one positive and one negative score")
    ranks = _average_ranks(np.concatenate([pos, neg]))
    n_pos, n_neg = pos.size, neg.size
    u = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class VUN:
    validity: float
    uniqueness: float
    novelty: float
    no_valid: bool = False


def validity_uniqueness_novelty(generated, train, validity_fn) -> VUN:
    """Validity over all samples; uniqueness and novelty over the retained valid set.

    The retained set is the first ceil(n/2) valid samples (or all valid ones if
    fewer).  Uniqueness is distinct/retained and novelty is
    (distinct and absent from train)/retained.  Samples must be hashable.
    """
    generated = list(generated)
    if not generated:
        raise ValueError("generated must be non-empty")
    valid = [g for g in generated if validity_fn(g)]
    validity = len(valid) / len(generated)
    if not valid:
        return VUN(validity, 0.0, 0.0, no_valid=True)
    retained = valid[: math.ceil(0.5 * len(generated))]
    distinct = set(retained)
    train_set = set(train)
    k = len(retained)
    return VUN(validity, len(distinct) / k, len(distinct - train_set) / k)


@dataclass
class PropertyAlignmentScore:
    kl: dict = field(default_factory=dict)  # property name -> KL(real || generated), nats
    score: float = 1.0  # mean of exp(-KL)


def histogram_kl(real_values, gen_values, n_bins: int = 20) -> float:
    """KL(real || generated) of add-one smoothed histograms on shared edges."""
    real = np.asarray(real_values, dtype=float)
    gen = np.asarray(gen_values, dtype=float)
    real = real[np.isfinite(real)]
    gen = gen[np.isfinite(gen)]
    pooled = np.concatenate([real, gen])
    if pooled.size == 0:
        return 0.0
    lo, hi = pooled.min(), pooled.max()
    if lo == hi:
        return 0.0
    edges = np.linspace(lo, hi, n_bins + 1)
    c_real, _ = np.histogram(real, bins=edges)
    c_gen, _ = np.histogram(gen, bins=edges)
    p = (c_real + 1.0) / (c_real.sum() + n_bins)
    q = (c_gen + 1.0) / (c_gen.sum() + n_bins)
    return float(np.sum(p * np.log(p / q)))


def property_alignment(real_samples, generated_samples, functions, n_bins: int = 20) -> PropertyAlignmentScore:
    if len(real_samples) < 10 or len(generated_samples) < 10:
        raise ValueError("property_alignment needs at least 10 samples per side")
    kls = {}
    for fn in functions:
        r = [fn(s) for s in real_samples]
        g = [fn(s) for s in generated_samples]
        kls[fn.name] = histogram_kl(r, g, n_bins)
    score = float(np.mean([math.exp(-v) for v in kls.values()])) if kls else 1.0
    return PropertyAlignmentScore(kls, score)
