"""End-to-end acceptance checks; each test records one pass/fail line.

The experiment-backed criteria run the bundled configs and take several
minutes in total on one CPU.
"""
import math
from dataclasses import replace

import numpy as np
import pytest

from spgan.cli import main
from spgan.discretization import DiscretizationSchema, project, representative
from spgan.engine import FeaturePredicate, LabeledDataset, SemanticFunction, information_gain
from spgan.generator import (CategoricalGenerator, exact_categorical_gradient, init_sequence,
                             sequence_step_gradients, softmax)
from spgan.metrics import auc

# --------------------------------------------------------------------------
# experiment-backed criteria


@pytest.mark.slow
def test_c1_lines_headline(verdict, runs_for):
    rows = runs_for("lines-16")
    passed = 0
    parts = []
    for run, secs in rows:
        s = run.summary
        ok = (0.1 <= s["f_mle"] <= 0.4 and s["improvement_factor"] >= 2.0
              and s["f_final"] <= 0.12 and secs <= 600)
        passed += ok
        parts.append(f"seed {run.seed}: {s['f_mle']:.3f}->{s['f_final']:.3f} "
                     f"x{s['improvement_factor']:.2f} {secs:.0f}s")
    assert verdict(1, "lines-16 MLE band, factor >= 2, f <= 0.12 in >= 3/4 seeds",
                   passed >= 3, f"{passed}/{len(rows)}; " + "; ".join(parts))


@pytest.mark.slow
def test_c2_scale_sweep(verdict, runs_for):
    by_n = {}
    for run, _ in runs_for("lines-sweep"):
        by_n.setdefault(run.variant, []).append(run.summary["improvement_factor"])
    ok = len(by_n) == 3 and all(sum(f >= 2.0 for f in fs) >= 2 for fs in by_n.values())
    detail = "; ".join(f"{k}: " + ",".join(f"{f:.2f}" for f in fs) for k, fs in by_n.items())
    assert verdict(2, "factor >= 2 at n in {8, 64, 200} in >= 2/3 seeds each", ok, detail)


@pytest.mark.slow
def test_c3_stopping_soundness(verdict, runs_for):
    names = ["lines-16", "lines-sweep", "brackets-100", "points2d-200"]
    stopped = [(n, run) for n in names for run, _ in runs_for(n)
               if run.summary["stopped_by"] == "auc"]
    bad = [f"{n} {run.variant or ''} seed {run.seed}" for n, run in stopped
           if not run.summary["verdicts"]["stopping_soundness"]]
    assert verdict(3, "AUC-stopped runs shrink the max feature gap and raise alignment",
                   not bad and bool(stopped),
                   f"{len(stopped) - len(bad)}/{len(stopped)} AUC-stopped runs sound"
                   + (f"; unsound: {', '.join(bad)}" if bad else ""))


@pytest.mark.slow
def test_c4_coarse_to_fine(verdict, runs_for):
    rows = runs_for("points2d-200")
    ratios = [run.summary["ig_ratio"] for run, _ in rows]
    detail = "; ".join(f"seed {run.seed}: {run.summary['top_ig_gen0']:.3f} / "
                       f"{run.summary['max_candidate_ig_final']:.3f}" for run, _ in rows)
    assert verdict(4, "points2d-200 gen-0 top IG >= 2x final max candidate IG",
                   all(r >= 2.0 for r in ratios), detail)


@pytest.mark.slow
def test_c5_sequence_direction(verdict, runs_for):
    rows = runs_for("brackets-100")
    passed = sum(run.summary["verdicts"]["validity_improved"]
                 and run.summary["verdicts"]["novelty_kept"] for run, _ in rows)
    detail = "; ".join(
        f"seed {run.seed}: validity {run.summary['validity_mle']:.3f}->"
        f"{run.summary['validity_final']:.3f}, novelty {run.summary['novelty_mle']:.3f}->"
        f"{run.summary['novelty_final']:.3f}" for run, _ in rows)
    assert verdict(5, "brackets-100 validity up and novelty kept in >= 2/3 seeds",
                   passed >= 2, detail)


# --------------------------------------------------------------------------
# oracle criteria


def test_c6_gradient_oracle(verdict):
    rng = np.random.default_rng(6)
    worst_cat = 0.0
    for _ in range(20):
        theta = rng.normal(size=5)
        rewards = rng.uniform(0, 1, size=5)
        g = exact_categorical_gradient(CategoricalGenerator(theta), rewards)
        h = 1e-5
        for i in range(5):
            e = np.zeros(5)
            e[i] = h
            fd = (softmax(theta + e) @ rewards - softmax(theta - e) @ rewards) / (2 * h)
            worst_cat = max(worst_cat, abs(g[i] - fd) / max(abs(fd), 1e-12))
    worst_seq = 0.0
    for seed in range(5):
        # vocabulary: start, end and two symbols
        gen = init_sequence(("a", "b"), 3, 3, seed, scale=0.7)
        seq = np.array([2, 3, 1])
        r = rng.uniform(0, 1, size=3)
        g = sequence_step_gradients(gen, seq, r)

        def J(p):
            return float(r @ replace(gen, params=p).sequence_log_probs([seq])[0])

        h = 1e-6
        for i in range(len(gen.params)):
            e = np.zeros_like(gen.params)
            e[i] = h
            fd = (J(gen.params + e) - J(gen.params - e)) / (2 * h)
            if abs(fd) > 1e-7:
                worst_seq = max(worst_seq, abs(g[i] - fd) / abs(fd))
            else:
                worst_seq = max(worst_seq, abs(g[i] - fd))
    ok = worst_cat <= 1e-6 and worst_seq <= 1e-5
    assert verdict(6, "REINFORCE gradients match central differences",
                   ok, f"categorical rel err {worst_cat:.1e}, sequence rel err {worst_seq:.1e}")


def _pairwise_auc(pos, neg):
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_c7_auc_oracle(verdict):
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(100):
        pos = rng.integers(0, 6, size=rng.integers(1, 40)).astype(float)
        neg = rng.integers(0, 6, size=rng.integers(1, 40)).astype(float)
        if auc(pos, neg) != _pairwise_auc(pos, neg):
            mismatches += 1
    assert verdict(7, "rank AUC equals pairwise counting on 100 tied cases",
                   mismatches == 0, f"{mismatches} mismatches")


def test_c8_discretization_contract(verdict):
    rng = np.random.default_rng(8)
    violations = 0
    for schema, dims in ((DiscretizationSchema((0.0,), (1.0,), (49,)), 1),
                         (DiscretizationSchema((0.0, 0.0), (1.0, 1.0), (7, 7)), 2)):
        x = rng.uniform(0, 1, size=(10_000, dims))
        x = x[:, 0] if dims == 1 else x
        bins = project(schema, x)
        again = project(schema, representative(schema, bins, rng))
        violations += int(np.sum(again != bins))
    assert verdict(8, "projection of a representative returns the same bin",
                   violations == 0, f"{violations} violations over 20000 points")


def test_c9_determinism(verdict, tmp_path):
    digests = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "lines-16", "--seed-override", "0", "--out", str(out), "--no-plots"]) == 0
        digests.append((out / "lines-16" / "seed-0" / "metrics.csv").read_bytes())
    assert verdict(9, "identical lines-16 runs give byte-identical metrics.csv",
                   digests[0] == digests[1] and len(digests[0]) > 0)


def _entropy(counts):
    n = sum(counts)
    return -sum(c / n * math.log2(c / n) for c in counts if c)


def test_c10_information_gain_oracle(verdict):
    rng = np.random.default_rng(10)
    ident = SemanticFunction("x", lambda v: v)
    pred = FeaturePredicate("above", (ident,), 0.5)
    worst = 0.0
    for _ in range(50):
        # contingency table [[pos & h, pos & !h], [neg & h, neg & !h]], both labels present
        while True:
            t = rng.integers(0, 12, size=(2, 2))
            if t[0].sum() and t[1].sum():
                break
        pos = [1.0] * t[0, 0] + [0.0] * t[0, 1]
        neg = [1.0] * t[1, 0] + [0.0] * t[1, 1]
        data = LabeledDataset(pos, neg, np.arange(len(pos) + len(neg)), np.array([], dtype=int))
        n = t.sum()
        cond = sum(t[:, j].sum() / n * _entropy(t[:, j]) for j in range(2) if t[:, j].sum())
        expected = _entropy(t.sum(axis=1)) - cond
        worst = max(worst, abs(information_gain(pred, data) - expected))
    assert verdict(10, "information gain equals the entropy oracle on 50 tables",
                   worst <= 1e-12, f"max abs err {worst:.1e}")
