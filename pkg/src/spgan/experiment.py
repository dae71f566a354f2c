"""One seeded run of a configured experiment, and the quantities judged afterwards."""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import generator as G
from .config import ExperimentConfig
from .domains import build_domain
from .training import SPGANResult, pretrain_sequence, run_spgan

# held-out MLE validation data is drawn from the same builder under a shifted seed
VALIDATION_SEED_OFFSET = 1000


@dataclass
class SeedRun:
    seed: int
    variant: str | None
    domain: object
    result: SPGANResult
    mle_trace: G.MLETrace | None
    summary: dict


def initial_generator(cfg: ExperimentConfig, domain, domain_params: dict, seed: int):
    """Fresh generator, MLE-pretrained for sequence domains."""
    if domain.kind != "sequence":
        return G.init_categorical(domain.n_outputs, seed), None
    gs = cfg.generator
    gen = G.init_sequence(domain.symbols, gs.hidden_size, domain.max_len, seed,
                          scale=gs.init_scale, emit_end=domain.emit_end)
    val_params = {**domain_params, "n": gs.validation_size}
    held_out = build_domain(cfg.domain, val_params, seed + VALIDATION_SEED_OFFSET).actual_sequences
    return pretrain_sequence(domain, gen, gs.mle_epochs, gs.mle_learning_rate, gs.mle_patience,
                             held_out)


def run_seed(cfg: ExperimentConfig, seed: int, variant=None, domain_params=None,
             on_report=None) -> SeedRun:
    params = dict(cfg.domain_params if domain_params is None else domain_params)
    domain = build_domain(cfg.domain, params, seed)
    gen, trace = initial_generator(cfg, domain, params, seed)
    result = run_spgan(cfg.training, domain, cfg.engine, gen, seed, on_report)
    return SeedRun(seed, variant, domain, result, trace, summarize(domain, result, trace))


def _ratio(a, b):
    if b == 0:
        return math.inf if a > 0 else math.nan
    return a / b


def summarize(domain, result: SPGANResult, mle_trace=None) -> dict:
    done = [r for r in result.reports if r.error is None]
    if not done:
        raise RuntimeError("no generation produced a discriminator")
    first, last = done[0], done[-1]
    s = {
        "domain": domain.name,
        "generations": len(result.reports),
        "stopped_by": result.reports[-1].stopped_by,
        "auc_gen0": first.validation_auc,
        "auc_final": last.validation_auc,
        "gap_gen0": first.feature_gap,
        "gap_final": last.feature_gap,
        "alignment_gen0": first.alignment,
        "alignment_final": last.alignment,
        "top_ig_gen0": first.top_feature_ig,
        "max_candidate_ig_final": last.max_candidate_ig,
        "failed_generations": len(result.reports) - len(done),
    }
    if mle_trace is not None:
        s["mle_best_epoch"] = mle_trace.best_epoch
        s["mle_epochs_run"] = len(mle_trace.train_nll)
    if domain.name == "lines":
        f0, f1 = first.invariants["f_mean"], last.invariants["f_mean"]
        s.update(f_mle=f0, f_final=f1, improvement_factor=_ratio(f0, f1))
    elif domain.name == "brackets":
        for key in ("validity", "uniqueness", "novelty"):
            s[f"{key}_mle"] = first.invariants[key]
            s[f"{key}_final"] = last.invariants[key]
    elif domain.name == "points2d":
        s["ig_ratio"] = _ratio(first.top_feature_ig, last.max_candidate_ig)
    s["verdicts"] = verdicts(s)
    return s


def verdicts(s: dict) -> dict:
    """Pass/fail checks on a per-seed summary."""
    v = {}
    if s["stopped_by"] == "auc":
        v["stopping_soundness"] = (s["gap_final"] < s["gap_gen0"]
                                   and s["alignment_final"] > s["alignment_gen0"])
    if s["domain"] == "lines":
        v["f_mle_in_band"] = 0.1 <= s["f_mle"] <= 0.4
        v["improved_2x"] = s["improvement_factor"] >= 2.0
        v["f_final_le_0.12"] = s["f_final"] <= 0.12
    elif s["domain"] == "brackets":
        v["validity_improved"] = s["validity_final"] > s["validity_mle"]
        v["novelty_kept"] = s["novelty_final"] >= s["novelty_mle"]
    elif s["domain"] == "points2d":
        v["coarse_to_fine_2x"] = s["ig_ratio"] >= 2.0
    return v
