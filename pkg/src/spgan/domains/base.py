"""Common domain surface used by the training loop."""
from __future__ import annotations

import numpy as np

from ..generator import END


class Domain:
    """A sample space with actual data, semantic functions and a generator map.

    Categorical domains map a bin index to a sample via ``decode``.  Sequence
    domains map a token list (symbols, optionally ending in ``END``) to a
    sample and expose its prefixes through ``views``.
    """

    name = "domain"
    kind = "categorical"
    actual: list
    functions: list

    def reverse_discretize(self, sample, rng):
        raise NotImplementedError

    def decode(self, output, rng):
        raise NotImplementedError

    def invariants(self, samples) -> dict:
        return {}

    def format_sample(self, sample) -> str:
        return str(sample)


class SequenceDomain(Domain):
    kind = "sequence"
    symbols: tuple
    max_len: int
    emit_end: bool = True
    actual_sequences: list  # symbol lists, ending with END when emit_end

    def views(self, tokens, rng) -> list:
        """Samples for every prefix length 1..len(tokens), sharing one draw."""
        raise NotImplementedError

    def reverse_discretize(self, sample, rng):
        return self.decode(self.tokens_of(sample), rng)

    def tokens_of(self, sample) -> list:
        raise NotImplementedError


def strip_end(tokens):
    tokens = list(tokens)
    ended = bool(tokens) and tokens[-1] == END
    return (tokens[:-1] if ended else tokens), ended


def rng_of(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
