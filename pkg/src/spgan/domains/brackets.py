"""Balanced bracket strings with letter noise: a small sequence-generation domain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import SemanticFunction
from ..generator import END
from ..metrics import validity_uniqueness_novelty
from .base import SequenceDomain, rng_of, strip_end

SYMBOLS = ("(", ")", "a", "b")
MIN_LEN = 4  # keeps one-letter strings from crowding the corpus


@dataclass(frozen=True)
class BracketSample:
    text: str
    complete: bool = True
    max_len: int | None = None  # character budget an unfinished prefix must close within


def _text(s) -> str:
    return s.text if isinstance(s, BracketSample) else str(s)


def _complete(s) -> bool:
    return s.complete if isinstance(s, BracketSample) else True


def is_balanced(text: str) -> bool:
    depth = 0
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def validity(s) -> float:
    """1 for a balanced complete string; for an unfinished prefix, 1 while it
    can still be completed (no unmatched closer, and room left to close)."""
    text = _text(s)
    if _complete(s):
        return float(is_balanced(text))
    depth = 0
    for ch in text:
        depth += (ch == "(") - (ch == ")")
        if depth < 0:
            return 0.0
    budget = getattr(s, "max_len", None)
    if budget is not None and depth > budget - len(text):
        return 0.0
    return 1.0


def max_depth(s) -> float:
    depth = best = 0
    for ch in _text(s):
        depth += (ch == "(") - (ch == ")")
        best = max(best, depth)
    return float(best)


def brackets_semantic_functions() -> list:
    fns = [
        SemanticFunction("validity", validity),
        SemanticFunction("max_depth", max_depth),
        SemanticFunction("length", lambda s: float(len(_text(s)))),
    ]
    names = {"(": "open", ")": "close", "a": "a", "b": "b"}
    for ch in SYMBOLS:
        fns.append(SemanticFunction(f"count_{names[ch]}", lambda s, ch=ch: float(_text(s).count(ch))))
    return fns


def _grammar_string(rng, L: int) -> str:
    text = []
    depth = 0
    while True:
        remaining = L - len(text)
        moves, weights = [], []
        if remaining >= depth + 2:
            moves.append("("); weights.append(0.3)
        if depth > 0:
            moves.append(")"); weights.append(0.3)
        if remaining >= depth + 1:
            moves += ["a", "b"]; weights += [0.15, 0.15]
        if depth == 0 and len(text) >= MIN_LEN:
            moves.append(None); weights.append(0.12)
        w = np.array(weights) / sum(weights)
        m = moves[rng.choice(len(moves), p=w)]
        if m is None:
            return "".join(text)
        text.append(m)
        depth += (m == "(") - (m == ")")


def brackets_dataset(n: int, L: int = 14, seed=0) -> list:
    rng = rng_of(seed)
    return [BracketSample(_grammar_string(rng, L)) for _ in range(n)]


class BracketsDomain(SequenceDomain):
    name = "brackets"

    def __init__(self, n=100, L=14, seed=0):
        self.L = L
        self.symbols = SYMBOLS
        self.max_len = L + 1
        self.actual = brackets_dataset(n, L, seed)
        self.functions = brackets_semantic_functions()
        self.actual_sequences = [self.tokens_of(s) + [END] for s in self.actual]
        self._train_texts = {s.text for s in self.actual}

    def tokens_of(self, sample) -> list:
        return list(_text(sample))

    def decode(self, tokens, rng=None):
        syms, ended = strip_end(tokens)
        return BracketSample("".join(syms), ended or len(tokens) >= self.max_len)

    def reverse_discretize(self, sample, rng):
        return BracketSample(sample.text, True)

    def views(self, tokens, rng=None) -> list:
        out = []
        for t in range(1, len(tokens) + 1):
            out.append(self.decode(tokens[:t]) if t == len(tokens) else
                       BracketSample("".join(s for s in tokens[:t] if s != END), False, self.L))
        return out

    def invariants(self, samples) -> dict:
        texts = [s.text for s in samples]
        vun = validity_uniqueness_novelty(texts, self._train_texts, is_balanced)
        return {"validity": vun.validity, "uniqueness": vun.uniqueness, "novelty": vun.novelty,
                "length_mean": float(np.mean([len(t) for t in texts]))}

    def format_sample(self, sample) -> str:
        return sample.text
