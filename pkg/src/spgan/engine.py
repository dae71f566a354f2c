"""Semantic engine: candidate features from semantic functions, information-gain
selection with a multiple-comparison floor, and a regularized logistic
discriminator whose output is read as the probability that a sample is real.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .metrics import auc

logger = logging.getLogger(__name__)

SCORE_CLIP = 35.0  # keeps sigmoid strictly inside (0, 1) in float64


class SkippedFunctionWarning(UserWarning):
    pass


class DiscriminatorFitError(RuntimeError):
    def __init__(self, message, grad_norm):
        super().__init__(f"{message} (final gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


@dataclass(frozen=True, eq=False)
class SemanticFunction:
    """Named black-box map from a sample to a real number.

    Exceptions and non-finite results are reported as NaN (missing).
    ``batch`` is an optional vectorized equivalent used when present.
    """

    name: str
    fn: Callable[[Any], float]
    batch: Callable[[Sequence[Any]], np.ndarray] | None = None

    def __call__(self, sample) -> float:
        try:
            v = float(self.fn(sample))
        except Exception:
            return math.nan
        return v if math.isfinite(v) else math.nan

    def evaluate(self, samples) -> np.ndarray:
        if self.batch is not None:
            out = np.asarray(self.batch(samples), dtype=float)
            return np.where(np.isfinite(out), out, np.nan)
        return np.array([self(s) for s in samples], dtype=float)


def evaluate_functions(functions, samples) -> np.ndarray:
    """(rows x functions) value matrix; NaN marks missing."""
    if not functions:
        return np.zeros((len(samples), 0))
    return np.column_stack([f.evaluate(samples) for f in functions])


@dataclass(frozen=True, eq=False)
class FeaturePredicate:
    """Binary feature over one function (threshold) or two (ratio sign)."""

    kind: str  # "above", "below", "ratio_negative"
    sources: tuple
    threshold: float = 0.0

    @property
    def name(self) -> str:
        if self.kind == "above":
            return f"{self.sources[0].name} > {self.threshold:.6g}"
        if self.kind == "below":
            return f"{self.sources[0].name} < {self.threshold:.6g}"
        return f"{self.sources[0].name} / {self.sources[1].name} < 0"

    def column(self, values: dict) -> np.ndarray:
        """Evaluate on precomputed function values keyed by function name."""
        a = values[self.sources[0].name]
        with np.errstate(invalid="ignore"):
            if self.kind == "above":
                out = a > self.threshold
            elif self.kind == "below":
                out = a < self.threshold
            else:
                b = values[self.sources[1].name]
                # zero denominator evaluates to 0
                out = (a * b < 0) & (b != 0)
        return out.astype(np.int8)

    def __call__(self, sample) -> int:
        vals = {f.name: np.array([f(sample)]) for f in self.sources}
        return int(self.column(vals)[0])

    def to_record(self) -> dict:
        return {"name": self.name, "kind": self.kind,
                "sources": [f.name for f in self.sources], "threshold": self.threshold}


@dataclass
class LabeledDataset:
    """Real samples (label 1) followed by generated samples (label 0).

    ``train_idx``/``val_idx`` index the concatenated rows and are disjoint.
    Function values are cached per function name.
    """

    positives: list
    negatives: list
    train_idx: np.ndarray
    val_idx: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
        self.val_idx = np.asarray(self.val_idx, dtype=np.int64)
        if np.intersect1d(self.train_idx, self.val_idx).size:
            raise ValueError("train and validation partitions overlap")

    @classmethod
    def split(cls, positives, negatives, val_fraction=0.25, rng=None, groups=None):
        """Random per-class split; rows sharing a group id stay on one side."""
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        n_pos = len(positives)
        n = n_pos + len(negatives)
        if groups is None:
            groups = np.arange(n)
        groups = np.asarray(groups)
        labels = np.r_[np.ones(n_pos, int), np.zeros(n - n_pos, int)]
        val_mask = np.zeros(n, dtype=bool)
        for lab in (1, 0):
            ids = np.unique(groups[labels == lab])
            k = int(math.ceil(val_fraction * len(ids))) if val_fraction > 0 else 0
            k = min(k, len(ids) - 1) if len(ids) > 1 else 0
            chosen = rng.permutation(ids)[:k]
            val_mask |= (labels == lab) & np.isin(groups, chosen)
        return cls(list(positives), list(negatives),
                   np.flatnonzero(~val_mask), np.flatnonzero(val_mask))

    @property
    def rows(self) -> list:
        return self.positives + self.negatives

    @property
    def labels(self) -> np.ndarray:
        return np.r_[np.ones(len(self.positives), int), np.zeros(len(self.negatives), int)]

    def __len__(self):
        return len(self.positives) + len(self.negatives)

    def values(self, functions) -> dict:
        rows = None
        for f in functions:
            if f.name not in self._cache:
                rows = rows if rows is not None else self.rows
                self._cache[f.name] = f.evaluate(rows)
        return {f.name: self._cache[f.name] for f in functions}


def generate_features(functions, data: LabeledDataset, quantiles_per_function: int,
                      ratio_pairs: bool = False) -> list:
    """Quantile threshold predicates (both directions) per function, optional
    pairwise ratio-sign predicates, deduplicated on the pooled rows."""
    if quantiles_per_function < 1:
        raise ValueError("quantiles_per_function must be >= 1")
    if len(data) == 0:
        raise ValueError("cannot generate features from an empty dataset")
    values = data.values(functions)
    usable = []
    for f in functions:
        v = values[f.name]
        if np.mean(np.isnan(v)) > 0.5:
            warnings.warn(f"semantic function {f.name!r} is missing on >50% of rows; skipped",
                          SkippedFunctionWarning, stacklevel=2)
            continue
        usable.append(f)
    levels = np.arange(1, quantiles_per_function + 1) / (quantiles_per_function + 1)
    raw = []
    for f in usable:
        v = values[f.name]
        qs = np.quantile(v[~np.isnan(v)], levels)
        raw += [FeaturePredicate("above", (f,), float(t)) for t in qs]
        raw += [FeaturePredicate("below", (f,), float(t)) for t in qs]
    if ratio_pairs:
        for f, g in itertools.permutations(usable, 2):
            raw.append(FeaturePredicate("ratio_negative", (f, g)))
    return _dedup(raw, values)


def _dedup(predicates, values) -> list:
    seen = set()
    out = []
    for p in predicates:
        col = p.column(values)
        if col.min() == col.max():
            continue
        key = col.tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(p)
    return out


def candidate_matrix(predicates, data: LabeledDataset) -> np.ndarray:
    if not predicates:
        return np.zeros((len(data), 0), dtype=np.int8)
    funcs = {f.name: f for p in predicates for f in p.sources}
    values = data.values(list(funcs.values()))
    return np.column_stack([p.column(values) for p in predicates])


def _entropy_bits(counts: np.ndarray, axis=0) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=axis, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=axis)


def conditional_gains(X: np.ndarray, y: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
    """H(y | cells) - H(y | cells, x_j) in bits for every column of X."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n = len(y)
    if n == 0:
        return np.zeros(X.shape[1])
    if cells is None:
        cells = np.zeros(n, dtype=np.int64)
    _, cells = np.unique(cells, return_inverse=True)
    k = cells.max() + 1
    onehot = np.zeros((n, 2 * k))
    onehot[np.arange(n), 2 * cells + y] = 1.0
    n_cl = onehot.sum(axis=0)  # (2k,)
    ones = onehot.T @ X  # (2k, C): rows with x=1 per (cell, label)
    zeros = n_cl[:, None] - ones
    # entropy of y inside cell, before the split
    base = 0.0
    for c in range(k):
        nc = n_cl[2 * c] + n_cl[2 * c + 1]
        base += nc / n * _entropy_bits(np.array([n_cl[2 * c], n_cl[2 * c + 1]]))
    after = np.zeros(X.shape[1])
    for c in range(k):
        for part in (ones, zeros):
            cnt = np.stack([part[2 * c], part[2 * c + 1]])  # (2, C)
            after += cnt.sum(axis=0) / n * _entropy_bits(cnt, axis=0)
    return np.maximum(base - after, 0.0)


def information_gain(predicate: FeaturePredicate, data: LabeledDataset) -> float:
    """H(label) - H(label | predicate) in bits over the train partition."""
    y = data.labels[data.train_idx]
    if y.min() == y.max():
        raise ValueError("information gain needs both labels in the train partition")
    col = candidate_matrix([predicate], data)[data.train_idx]
    return float(conditional_gains(col, y)[0])


def significance_floor(n_candidates: int, n_validation: int) -> float:
    """Minimum validation gain (bits) for admitting a feature."""
    if n_candidates == 0 or n_validation == 0:
        return math.inf
    return (math.log2(n_candidates) + 1.0) / n_validation


@dataclass
class SelectionRecord:
    predicate: FeaturePredicate
    candidate_index: int
    train_ig: float
    validation_ig: float


def select_features(candidates, data: LabeledDataset, k_max: int, return_records=False):
    """Greedy forward selection by conditional information gain.

    The best train-gain candidate is admitted only if its gain on the
    validation rows clears ``significance_floor``; the first failure ends the
    search.  Ties go to the lower candidate index.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    records = []
    if candidates:
        X = candidate_matrix(candidates, data)
        y = data.labels
        tr, va = data.train_idx, data.val_idx
        floor = significance_floor(len(candidates), len(va))
        cells_tr = np.zeros(len(tr), dtype=np.int64)
        cells_va = np.zeros(len(va), dtype=np.int64)
        taken = np.zeros(len(candidates), dtype=bool)
        while len(records) < k_max:
            g_tr = conditional_gains(X[tr], y[tr], cells_tr)
            g_tr[taken] = -1.0
            j = int(np.argmax(g_tr))
            if g_tr[j] <= 0:
                break
            g_va = float(conditional_gains(X[va][:, [j]], y[va], cells_va)[0])
            if not g_va > floor:
                break
            records.append(SelectionRecord(candidates[j], j, float(g_tr[j]), g_va))
            taken[j] = True
            cells_tr = cells_tr * 2 + X[tr, j]
            cells_va = cells_va * 2 + X[va, j]
    chosen = [r.predicate for r in records]
    return (chosen, records) if return_records else chosen


def _sigmoid(z):
    z = np.clip(z, -SCORE_CLIP, SCORE_CLIP)
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True, eq=False)
class CalibratedDiscriminator:
    features: tuple
    weights: np.ndarray  # one per feature, intercept last
    validation_auc: float
    train_auc: float = 0.5
    selected_feature_report: tuple = ()
    objective_trace: tuple = ()

    @property
    def intercept(self) -> float:
        return float(self.weights[-1])

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        return X @ self.weights[:-1] + self.weights[-1]

    def feature_columns(self, samples) -> np.ndarray:
        if not self.features:
            return np.zeros((len(samples), 0))
        funcs = {f.name: f for p in self.features for f in p.sources}
        values = {name: f.evaluate(samples) for name, f in funcs.items()}
        return np.column_stack([p.column(values) for p in self.features])

    def predict_proba(self, samples) -> np.ndarray:
        return _sigmoid(self.score(self.feature_columns(samples)))


def predict_real_probability(disc: CalibratedDiscriminator, sample) -> float:
    return float(disc.predict_proba([sample])[0])


def _objective(w, X, y, reg):
    z = X @ w
    # log(1 + e^z) - y z, stable
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    return loss + 0.5 * reg * np.dot(w[:-1], w[:-1])


def fit_logistic(X, y, reg_strength: float, tol: float = 1e-8, max_iter: int = 100):
    """Newton's method with backtracking on mean log-loss + reg/2 * |w|^2.

    The intercept (last weight) is not penalized.  Returns (weights, trace).
    """
    X = np.asarray(X, dtype=float)
    n = len(y)
    Xb = np.column_stack([X, np.ones(n)])
    y = np.asarray(y, dtype=float)
    d = Xb.shape[1]
    penal = np.r_[np.full(d - 1, reg_strength), 0.0]
    w = np.zeros(d)
    f = _objective(w, Xb, y, reg_strength)
    trace = [f]
    for _ in range(max_iter):
        p = _sigmoid(Xb @ w)
        grad = Xb.T @ (p - y) / n + penal * w
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            return w, trace
        s = p * (1 - p)
        H = (Xb * s[:, None]).T @ Xb / n + np.diag(penal) + 1e-12 * np.eye(d)
        step = np.linalg.solve(H, grad)
        t = 1.0
        while True:
            w_new = w - t * step
            f_new = _objective(w_new, Xb, y, reg_strength)
            if f_new <= f - 1e-4 * t * np.dot(grad, step) or t < 1e-10:
                break
            t *= 0.5
        if f_new > f:
            break
        w, f = w_new, f_new
        trace.append(f)
    p = _sigmoid(Xb @ w)
    gnorm = float(np.linalg.norm(Xb.T @ (p - y) / n + penal * w))
    if gnorm < tol:
        return w, trace
    raise DiscriminatorFitError("logistic fit did not converge", gnorm)


def train_discriminator(features, data: LabeledDataset, reg_strength: float,
                        records=None) -> CalibratedDiscriminator:
    """Fit on the train partition; AUC measured on the validation partition."""
    features = tuple(features)
    y = data.labels
    X = candidate_matrix(list(features), data).astype(float)
    tr, va = data.train_idx, data.val_idx
    w, trace = fit_logistic(X[tr], y[tr], reg_strength)
    if features:
        scores = X @ w[:-1] + w[-1]
        val_auc = auc(scores[va][y[va] == 1], scores[va][y[va] == 0]) if _both(y[va]) else 0.5
        train_auc = auc(scores[tr][y[tr] == 1], scores[tr][y[tr] == 0]) if _both(y[tr]) else 0.5
    else:
        val_auc = train_auc = 0.5
    rec_by_name = {r.predicate.name: r for r in (records or [])}
    report = []
    for p, wt in zip(features, w[:-1]):
        entry = p.to_record()
        r = rec_by_name.get(p.name)
        if r is not None:
            entry["train_ig"] = r.train_ig
            entry["validation_ig"] = r.validation_ig
        else:
            entry["train_ig"] = information_gain(p, data)
            entry["validation_ig"] = None
        entry["weight"] = float(wt)
        report.append(entry)
    return CalibratedDiscriminator(features, w, float(val_auc), float(train_auc),
                                   tuple(report), tuple(trace))


def _both(y):
    return len(y) > 0 and y.min() == 0 and y.max() == 1


@dataclass
class EngineSettings:
    quantiles_per_function: int = 16
    k_max: int = 4
    reg_strength: float = 0.01
    ratio_pairs: bool = False

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class EngineFit:
    discriminator: CalibratedDiscriminator
    candidates: list
    records: list
    floor: float


def fit_engine(functions, data: LabeledDataset, settings: EngineSettings) -> EngineFit:
    candidates = generate_features(functions, data, settings.quantiles_per_function,
                                   settings.ratio_pairs)
    chosen, records = select_features(candidates, data, settings.k_max, return_records=True)
    disc = train_discriminator(chosen, data, settings.reg_strength, records)
    floor = significance_floor(len(candidates), len(data.val_idx))
    return EngineFit(disc, candidates, records, floor)


def max_feature_gap(predicates, real_samples, generated_samples) -> float:
    """max over predicates of |mean on real - mean on generated|."""
    if not predicates:
        return 0.0
    funcs = {f.name: f for p in predicates for f in p.sources}
    rv = {n: f.evaluate(real_samples) for n, f in funcs.items()}
    gv = {n: f.evaluate(generated_samples) for n, f in funcs.items()}
    gaps = [abs(p.column(rv).mean() - p.column(gv).mean()) for p in predicates]
    return float(max(gaps))


def max_candidate_ig(candidates, data: LabeledDataset) -> float:
    if not candidates:
        return 0.0
    X = candidate_matrix(candidates, data)
    tr = data.train_idx
    return float(conditional_gains(X[tr], data.labels[tr]).max())
