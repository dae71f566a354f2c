"""Adversarial co-training: discriminator retraining rounds with REINFORCE
phases in between, stopped by validation AUC."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import generator as G
from .engine import (DiscriminatorFitError, EngineSettings, LabeledDataset, fit_engine,
                     max_candidate_ig, max_feature_gap)
from .metrics import property_alignment

logger = logging.getLogger(__name__)


class GeneratorDivergedError(FloatingPointError):
    pass


@dataclass
class TrainingConfig:
    epsilon: float = 0.05
    max_generations: int = 10
    inner_steps_cap: int = 50
    batch_size: int = 64
    prev_mix_fraction: float = 0.5
    extrapolation_fraction: float = 0.0
    learning_rate: float = 0.1
    baseline: bool = False
    val_fraction: float = 0.25
    views_per_sample: int = 4
    min_class_size: int = 0  # real samples are re-randomized repeatedly up to this count
    min_view_len: int = 1
    snapshot_size: int = 512
    probe_size: int = 1000

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")
        for name in ("prev_mix_fraction", "extrapolation_fraction", "val_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.max_generations < 1 or self.inner_steps_cap < 1 or self.batch_size < 1:
            raise ValueError("max_generations, inner_steps_cap and batch_size must be >= 1")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class GenerationReport:
    generation: int
    validation_auc: float
    train_auc: float
    n_candidates: int
    floor: float
    features: list
    top_feature_ig: float
    max_candidate_ig: float
    feature_gap: float
    invariants: dict
    alignment: float
    reward_trace: list = field(default_factory=list)
    inner_steps: int = 0
    stopped_by: str | None = None
    snapshot: list = field(default_factory=list)
    error: str | None = None


@dataclass
class SPGANResult:
    generator: object
    reports: list
    probe_candidates: list

    @property
    def stopped_by_auc(self) -> bool:
        return bool(self.reports) and self.reports[-1].stopped_by == "auc"


# --------------------------------------------------------------------------
# data assembly


def _choose_views(n_views, k, min_len, rng):
    """Indices of the views used for one sequence: the full one plus random prefixes."""
    chosen = [n_views - 1]
    lo = min(max(min_len, 1), n_views) - 1
    hi = n_views - 1  # exclusive: proper prefixes only
    for _ in range(k - 1):
        chosen.append(int(rng.integers(lo, hi)) if hi > lo else n_views - 1)
    return chosen


def _sequence_rows(domain, token_lists, config, rng, group_offset):
    rows, groups = [], []
    for i, toks in enumerate(token_lists):
        views = domain.views(toks, rng)
        for v in _choose_views(len(views), config.views_per_sample, config.min_view_len, rng):
            rows.append(views[v])
            groups.append(group_offset + i)
    return rows, groups


def _draw_outputs(gen, n, rng):
    batch = G.sample_batch(gen, n, rng)
    if isinstance(gen, G.CategoricalGenerator):
        return [int(o) for o in batch.outputs]
    return [gen.tokens(o) for o in batch.outputs]


def build_training_sets(domain, prev_pool, gen, config: TrainingConfig, rng):
    """Balanced dataset: re-randomized actual data vs. mixed generated data.

    Returns the dataset and the generator outputs used as negatives.
    """
    actual = domain.actual
    if len(actual) == 0:
        raise ValueError("actual data is empty")
    reps = max(1, math.ceil(config.min_class_size / len(actual)))
    n = len(actual) * reps
    n_prev = int(round(config.prev_mix_fraction * n)) if prev_pool else 0
    outputs = []
    if n_prev:
        pick = rng.choice(len(prev_pool), size=n_prev, replace=len(prev_pool) < n_prev)
        outputs += [prev_pool[i] for i in pick]
    if n - n_prev:
        outputs += _draw_outputs(gen, n - n_prev, rng)
    if domain.kind == "sequence":
        seqs = [s for s in domain.actual_sequences for _ in range(reps)]
        pos, gpos = _sequence_rows(domain, seqs, config, rng, 0)
        gpos = [g // reps for g in gpos]  # copies of one actual sample share a group
        neg, gneg = _sequence_rows(domain, outputs, config, rng, n)
        data = LabeledDataset.split(pos, neg, config.val_fraction, rng, np.r_[gpos, gneg])
    else:
        pos = [domain.reverse_discretize(s, rng) for s in actual for _ in range(reps)]
        neg = [domain.decode(o, rng) for o in outputs]
        groups = np.r_[np.arange(n) // reps, len(actual) + np.arange(n)]
        data = LabeledDataset.split(pos, neg, config.val_fraction, rng, groups)
    return data, outputs


def _full_samples(domain, outputs, rng):
    return [domain.decode(o, rng) for o in outputs]


# --------------------------------------------------------------------------
# inner phase


def sequence_rewards(domain, disc, gen, batch, rng):
    """Per-step rewards: real-probability of every prefix of each sequence."""
    token_lists = [gen.tokens(o) for o in batch.outputs]
    views, sizes = [], []
    for toks in token_lists:
        v = domain.views(toks, rng)
        views += v
        sizes.append(len(v))
    probs = disc.predict_proba(views)
    out, off = [], 0
    for s in sizes:
        out.append(probs[off:off + s])
        off += s
    return out


def inner_phase(gen, reward_fn, config: TrainingConfig, rng, extrapolation_prefixes=None):
    """REINFORCE steps until batch mean reward reaches 0.5 - epsilon or the cap.

    ``reward_fn(gen, batch) -> (rewards, batch_mean)``.  For sequence
    generators, ``extrapolation_prefixes(rng, n)`` supplies forced prefixes for
    the fraction of steps set by ``config.extrapolation_fraction``.
    """
    trace = []
    pool = []
    steps = 0
    for _ in range(config.inner_steps_cap):
        prefixes = None
        if (extrapolation_prefixes is not None and config.extrapolation_fraction > 0
                and rng.random() < config.extrapolation_fraction):
            prefixes = extrapolation_prefixes(rng, config.batch_size)
        if prefixes is None:
            batch = G.sample_batch(gen, config.batch_size, rng)
        else:
            batch = gen.sample(config.batch_size, rng, prefixes=prefixes)
        rewards, mean_reward = reward_fn(gen, batch)
        batch.rewards = rewards
        gen = G.reinforce_update(gen, batch, config.learning_rate, config.baseline)
        _check_params(gen)
        steps += 1
        trace.append(float(mean_reward))
        if prefixes is None:
            pool += list(batch.outputs)
        if mean_reward >= 0.5 - config.epsilon:
            break
    return gen, trace, steps, pool


def _check_params(gen):
    p = gen.theta if isinstance(gen, G.CategoricalGenerator) else gen.params
    if not np.all(np.isfinite(p)):
        raise GeneratorDivergedError("generator parameters became non-finite")


# --------------------------------------------------------------------------
# outer loop


def _snapshot(domain, gen, n, rng):
    return _full_samples(domain, _draw_outputs(gen, n, rng), rng)


def _real_reference(domain, rng, min_size=0):
    reps = max(1, math.ceil(min_size / len(domain.actual)))
    return [domain.reverse_discretize(s, rng) for s in domain.actual for _ in range(reps)]


def _failed_report(g, exc):
    nan = math.nan
    return GenerationReport(g, nan, nan, 0, nan, [], nan, nan, nan, {}, nan, error=str(exc))


def run_spgan(config: TrainingConfig, domain, engine_settings: EngineSettings, generator,
              seed: int = 0, on_report=None) -> SPGANResult:
    """Co-train ``generator`` against semantic-engine discriminators."""
    train_rng, eval_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    gen = generator
    reports = []
    prev_pool = []
    probe = []
    is_seq = domain.kind == "sequence"
    actual_ids = [gen.token_ids(t) for t in domain.actual_sequences] if is_seq else None

    def extrapolation_prefixes(rng, n):
        out = []
        for i in rng.integers(0, len(actual_ids), size=n):
            ids = actual_ids[i][:-1] if domain.emit_end else actual_ids[i]
            if len(ids) < 2:
                out.append(ids[:0])
                continue
            out.append(ids[:int(rng.integers(1, len(ids)))])
        return out

    for g in range(config.max_generations):
        data, negatives = build_training_sets(domain, prev_pool, gen, config, train_rng)
        try:
            fit = fit_engine(domain.functions, data, engine_settings)
        except DiscriminatorFitError as exc:
            # the generation is abandoned; the next one retrains on fresh data
            logger.warning("generation %d: discriminator fit failed: %s", g, exc)
            report = _failed_report(g, exc)
            reports.append(report)
            if g == config.max_generations - 1:
                report.stopped_by = "max_generations"
            if on_report:
                on_report(report)
            prev_pool = negatives
            continue
        disc = fit.discriminator
        if not probe:
            probe = list(fit.candidates)

        snapshot = _snapshot(domain, gen, config.snapshot_size, eval_rng)
        real_ref = _real_reference(domain, eval_rng, config.min_class_size)
        probe_gen = _snapshot(domain, gen, config.probe_size, eval_rng)
        gap = max_feature_gap(probe, real_ref, probe_gen)
        align = property_alignment(real_ref, snapshot, domain.functions).score
        report = GenerationReport(
            generation=g,
            validation_auc=disc.validation_auc,
            train_auc=disc.train_auc,
            n_candidates=len(fit.candidates),
            floor=fit.floor,
            features=list(disc.selected_feature_report),
            top_feature_ig=fit.records[0].train_ig if fit.records else 0.0,
            max_candidate_ig=max_candidate_ig(fit.candidates, data),
            feature_gap=gap,
            invariants=domain.invariants(snapshot),
            alignment=align,
            snapshot=[domain.format_sample(s) for s in snapshot[:20]],
        )
        reports.append(report)
        logger.info("generation %d: auc=%.3f features=%d", g, disc.validation_auc, len(disc.features))

        if disc.validation_auc <= 0.5 + config.epsilon:
            report.stopped_by = "auc"
        elif g == config.max_generations - 1:
            report.stopped_by = "max_generations"
        if report.stopped_by:
            if on_report:
                on_report(report)
            break

        if is_seq:
            def reward_fn(gen_, batch, disc=disc):
                r = sequence_rewards(domain, disc, gen_, batch, train_rng)
                return r, float(np.mean([x[-1] for x in r]))
            gen, trace, steps, pool = inner_phase(gen, reward_fn, config, train_rng,
                                                  extrapolation_prefixes)
            prev_pool = [gen.tokens(o) for o in pool] or negatives
        else:
            def reward_fn(gen_, batch, disc=disc):
                samples = [domain.decode(o, train_rng) for o in batch.outputs]
                r = disc.predict_proba(samples)
                return r, float(r.mean())
            gen, trace, steps, pool = inner_phase(gen, reward_fn, config, train_rng)
            prev_pool = [int(o) for o in pool] or negatives
        report.reward_trace = trace
        report.inner_steps = steps
        if on_report:
            on_report(report)
    return SPGANResult(gen, reports, probe)


def pretrain_sequence(domain, gen, epochs, learning_rate, patience, validation_sequences=None):
    data = [gen.token_ids(t) for t in domain.actual_sequences]
    val = [gen.token_ids(t) for t in validation_sequences] if validation_sequences else None
    return G.mle_pretrain(gen, data, epochs, learning_rate, val, patience)


def mean_or_nan(xs):
    xs = [x for x in xs if x is not None and math.isfinite(x)]
    return float(np.mean(xs)) if xs else math.nan
