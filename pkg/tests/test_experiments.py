"""Directional checks on the bundled experiment runs (shared with the acceptance suite)."""
import numpy as np
import pytest

from spgan.domains import LineSample
from spgan.generator import extrapolate

pytestmark = pytest.mark.slow


def test_lines_alignment_increases(runs_for):
    rows = runs_for("lines-16")
    up = sum(r.summary["alignment_final"] > r.summary["alignment_gen0"] for r, _ in rows)
    assert up >= 3


def test_lines_final_f_below_generation_zero(runs_for):
    for run, _ in runs_for("lines-16"):
        assert run.summary["f_final"] < run.summary["f_mle"]
        assert run.summary["stopped_by"] in ("auc", "max_generations")


def test_points2d_top_ig_falls(runs_for):
    for run, _ in runs_for("points2d-200"):
        assert run.summary["top_ig_gen0"] > run.summary["max_candidate_ig_final"]


def test_points2d_validation_auc_tracks_train(runs_for):
    for run, _ in runs_for("points2d-200"):
        first = run.result.reports[0]
        assert abs(first.validation_auc - first.train_auc) <= 0.1


def _continuation_mean(domain, gen, beta, prefix_len=3, draws=200):
    rng = np.random.default_rng(99)
    line = LineSample(beta * np.arange(domain.T) + rng.normal(0, 0.01, domain.T), beta)
    tokens = domain.tokens_of(line)
    incs = []
    for k in range(draws):
        out = extrapolate(gen, tokens[:prefix_len], 1000 + k)
        incs += [(int(t) + 0.5) / len(domain.symbols) for t in out[prefix_len:]]
    return float(np.mean(incs))


@pytest.mark.xfail(reason="continuations ignore the prefix slope; see the decisions ledger", strict=False)
def test_lines_extrapolation_follows_prefix_slope(runs_for):
    means = [_continuation_mean(run.domain, run.result.generator, 0.8) for run, _ in runs_for("lines-16")]
    print("continuation increment means:", ", ".join(f"{m:.3f}" for m in means))
    assert sum(abs(m - 0.8) <= 0.15 for m in means) >= 3
