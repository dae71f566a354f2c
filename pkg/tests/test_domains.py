import numpy as np
import pytest

from spgan.domains import (BracketSample, BracketsDomain, LineSample, LinesDomain, Points2DDomain,
                           build_domain, brackets_dataset, lines_dataset,
                           lines_semantic_functions, points2d_dataset,
                           points2d_semantic_functions)
from spgan.domains.brackets import brackets_semantic_functions, max_depth, validity
from spgan.domains.lines import mean_of_diffs, std_of_diffs
from spgan.domains.points2d import Point2DSample, count_within
from spgan.generator import END
from spgan.metrics import validity_uniqueness_novelty


def test_lines_std_convention_pinned():
    assert std_of_diffs(LineSample(np.array([0.0, 1.0, 0.0]))) == 1.0
    assert std_of_diffs(LineSample(np.array([0.0, 0.5, 1.0]))) == 0.0
    assert mean_of_diffs(LineSample(np.array([0.0, 0.5, 1.0]))) == 0.5


def test_lines_noiseless_have_zero_f():
    for s in lines_dataset(50, 8, 0.0, 1):
        assert std_of_diffs(s) == 0.0


def test_lines_mean_difference_concentrates():
    lines = lines_dataset(10_000, 8, 0.01, 2)
    assert abs(np.mean([mean_of_diffs(s) for s in lines]) - 0.5) < 0.02


def test_lines_data_floor_near_sigma_sqrt2():
    sigma = 0.01
    lines = lines_dataset(5000, 8, sigma, 3)
    # E[population std] over 7 correlated diffs sits a bit below sigma*sqrt(2)
    f = np.mean([std_of_diffs(s) for s in lines])
    assert abs(f - sigma * np.sqrt(2)) / (sigma * np.sqrt(2)) < 0.10


def test_lines_functions_are_exactly_three():
    assert [f.name for f in lines_semantic_functions()] == ["std_diff", "mean_diff", "length"]


def test_lines_builders_seed_deterministic():
    a, b = lines_dataset(5, seed=9), lines_dataset(5, seed=9)
    assert all(np.array_equal(x.y, y.y) for x, y in zip(a, b))


def test_lines_domain_tokens_and_views():
    dom = LinesDomain(n=16, seed=0)
    assert dom.max_len == 7 and not dom.emit_end
    assert all(len(s) == 7 and END not in s for s in dom.actual_sequences)
    views = dom.views(dom.actual_sequences[0], 0)
    assert [len(v.y) for v in views] == list(range(2, 9))
    # reverse discretization keeps the token sequence
    s = dom.actual[0]
    assert dom.tokens_of(dom.reverse_discretize(s, 1)) == dom.tokens_of(s)


def test_brackets_examples():
    fns = {f.name: f for f in brackets_semantic_functions()}
    assert fns["validity"]("(()a)") == 1.0
    assert fns["max_depth"]("(()a)") == 2.0
    assert fns["length"]("(()a)") == 5.0
    assert fns["validity"]("(()") == 0.0
    assert fns["count_a"]("(()a)") == 1.0


def test_bracket_prefix_validity():
    assert validity(BracketSample("((a", complete=False)) == 1.0
    assert validity(BracketSample("())", complete=False)) == 0.0
    assert validity(BracketSample("((a", complete=True)) == 0.0
    # two openers need two more characters
    assert validity(BracketSample("((a", complete=False, max_len=5)) == 1.0
    assert validity(BracketSample("((a", complete=False, max_len=4)) == 0.0


def stack_checker(text):
    stack = []
    for ch in text:
        if ch == "(":
            stack.append(ch)
        elif ch == ")":
            if not stack:
                return 0.0
            stack.pop()
    return 0.0 if stack else 1.0


def test_validity_matches_stack_machine():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        text = "".join(rng.choice(list("()ab"), size=rng.integers(0, 12)))
        assert validity(text) == stack_checker(text)


def test_brackets_dataset_quality():
    data = brackets_dataset(100, 14, 0)
    texts = [s.text for s in data]
    r = validity_uniqueness_novelty(texts, [], lambda t: stack_checker(t) == 1.0)
    assert r.validity == 1.0
    assert len(set(texts)) / len(texts) >= 0.9
    assert all(len(t) <= 14 for t in texts)


def test_brackets_domain_views_mark_completion():
    dom = BracketsDomain(n=20, seed=1)
    toks = dom.actual_sequences[0]
    views = dom.views(toks)
    assert views[-1].complete and not any(v.complete for v in views[:-1])
    assert views[-1].text == dom.actual[0].text
    assert max_depth(views[-1]) == max_depth(dom.actual[0])


def test_count_within_matches_brute_force():
    pts, field = points2d_dataset(60, 40, 5)
    xy = np.array([[p.x, p.y] for p in pts])
    for r in (0.02, 0.1, 0.3):
        got = count_within(field, xy, r)
        for i, (x, y) in enumerate(xy):
            brute = sum(1 for px, py in field.positions if (px - x) ** 2 + (py - y) ** 2 <= r * r)
            assert got[i] == brute


def test_isolated_sample_has_zero_features():
    _, field = points2d_dataset(10, 30, 0)
    fns = points2d_semantic_functions(field, (0.01, 0.05))
    far = Point2DSample(50.0, 50.0)
    assert all(f(far) == 0.0 for f in fns)


def test_planted_positives_denser_than_uniform():
    pts, field = points2d_dataset(500, 150, 1)
    rng = np.random.default_rng(2)
    uni = rng.uniform(0, 1, size=(500, 2))
    xy = np.array([[p.x, p.y] for p in pts])
    for r in (0.01, 0.05):
        assert count_within(field, xy, r).mean() > count_within(field, uni, r).mean()


def test_points_domain_decode_inside_cell():
    dom = Points2DDomain(n=50, seed=0)
    for b in (0, 17, 399):
        assert dom.bins_of([dom.decode(b, b)])[0] == b


def test_build_domain_registry():
    assert isinstance(build_domain("lines", {"n": 8}, 0), LinesDomain)
    with pytest.raises(KeyError):
        build_domain("molecules", {}, 0)
