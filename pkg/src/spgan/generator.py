"""Generators trained by REINFORCE against discriminator rewards.

Two families:

* ``CategoricalGenerator`` -- softmax over ``b`` logits, one draw per sample.
* ``SequenceGenerator`` -- single-layer GRU over a token vocabulary with
  manually derived backpropagation through time.

Updates are plain gradient steps with global-norm clipping; generators are
treated as values (updates return new objects).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

CLIP_NORM = 5.0
START = "<s>"
END = "</s>"
FORMAT_VERSION = 1


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, index):
        super().__init__(f"non-finite gradient at parameter component {index}")
        self.index = index


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def softmax(z, axis=-1):
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z, axis=-1):
    z = z - np.max(z, axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def clip_by_norm(g, max_norm=CLIP_NORM):
    n = float(np.linalg.norm(g))
    if n > max_norm:
        g = g * (max_norm / n)
    return g


def _check_finite(g):
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        raise NonFiniteGradientError(int(bad[0]))


@dataclass
class SampleBatch:
    outputs: list  # bin indices (categorical) or token-id arrays (sequence)
    log_probs: list  # per output: float, or per-step array for sequences
    rewards: list | None = None  # per output: float, or per-step array
    step_weights: list | None = None  # sequences: 1 where the step is trained, 0 for forced prefixes


# --------------------------------------------------------------------------
# categorical


@dataclass(frozen=True, eq=False)
class CategoricalGenerator:
    theta: np.ndarray

    @property
    def b(self) -> int:
        return len(self.theta)

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.theta)

    def log_prob(self, k) -> np.ndarray:
        return log_softmax(self.theta)[k]


def init_categorical(b: int, seed=0, scale: float = 0.01) -> CategoricalGenerator:
    if b < 2:
        raise ValueError("categorical generator needs b >= 2")
    return CategoricalGenerator(_rng(seed).normal(0.0, scale, size=b))


def categorical_gradient(gen: CategoricalGenerator, outputs, rewards, baseline=False) -> np.ndarray:
    """mean_j r_j * grad log pi(b_j), with grad log pi(k) = e_k - pi."""
    outputs = np.asarray(outputs, dtype=np.int64)
    r = np.asarray(rewards, dtype=float)
    if baseline:
        r = r - r.mean()
    pi = gen.probs
    g = np.bincount(outputs, weights=r, minlength=gen.b) - r.sum() * pi
    return g / len(outputs)


def exact_categorical_gradient(gen: CategoricalGenerator, rewards_per_bin) -> np.ndarray:
    """sum_k p_k pi_k grad log pi_k: the batch estimator with the batch
    replaced by the full enumeration weighted by pi."""
    pi = gen.probs
    p = np.asarray(rewards_per_bin, dtype=float)
    return pi * p - (pi @ p) * pi


# --------------------------------------------------------------------------
# sequence (GRU)


@dataclass(frozen=True, eq=False)
class SequenceGenerator:
    """GRU language model.

    Vocabulary index 0 is the start marker (input only) and index 1 the end
    marker (output only).  Output logits cover indices 1..V-1.
    """

    token_vocab: tuple
    hidden_size: int
    max_len: int
    params: np.ndarray
    seed_lineage: tuple = ()
    emit_end: bool = True  # False: fixed-length sequences of max_len tokens

    @property
    def V(self) -> int:
        return len(self.token_vocab)

    @property
    def n_out(self) -> int:
        return self.V - 1

    def shapes(self):
        H, V = self.hidden_size, self.V
        return param_shapes(H, V)

    def unpack(self) -> dict:
        out = {}
        off = 0
        for name, shp in self.shapes():
            size = int(np.prod(shp))
            out[name] = self.params[off:off + size].reshape(shp)
            off += size
        return out

    def token_ids(self, tokens) -> np.ndarray:
        index = {t: i for i, t in enumerate(self.token_vocab)}
        try:
            return np.array([index[t] for t in tokens], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"token {exc.args[0]!r} is not in the vocabulary") from None

    def tokens(self, ids) -> list:
        return [self.token_vocab[i] for i in ids]

    # ---- forward / backward

    def _step(self, P, x_ids, h):
        """One GRU step for a batch of input token ids."""
        Wx, Uzr, Un, bz, br, bn = P["Wx"], P["Uzr"], P["Un"], P["bz"], P["br"], P["bn"]
        H = self.hidden_size
        xin = Wx[:, x_ids].T  # (B, 3H) input embedding lookup
        zr = xin[:, :2 * H] + h @ Uzr.T
        z = _sigm(zr[:, :H] + bz)
        r = _sigm(zr[:, H:] + br)
        rh = r * h
        n = np.tanh(xin[:, 2 * H:] + rh @ Un.T + bn)
        h_new = (1 - z) * n + z * h
        return h_new, (x_ids, h, z, r, rh, n)

    def _logits(self, P, h):
        z = h @ P["Wo"].T + P["bo"]
        if not self.emit_end:
            z[:, 0] = -1e30
        return z

    def forward(self, padded: np.ndarray, lengths: np.ndarray):
        """Teacher-forced pass. Returns per-step log-probs (B, T) and a cache."""
        P = self.unpack()
        B, T = padded.shape
        h = np.zeros((B, self.hidden_size))
        prev = np.zeros(B, dtype=np.int64)  # start marker
        logp = np.zeros((B, T))
        caches, probs = [], []
        for t in range(T):
            h, c = self._step(P, prev, h)
            lp = log_softmax(self._logits(P, h))
            tgt = np.clip(padded[:, t] - 1, 0, self.n_out - 1)
            logp[:, t] = lp[np.arange(B), tgt]
            caches.append((c, h))
            probs.append(np.exp(lp))
            prev = padded[:, t]
        mask = np.arange(T)[None, :] < lengths[:, None]
        logp = np.where(mask, logp, 0.0)
        return logp, (caches, probs, padded, mask)

    def backward(self, cache, weights: np.ndarray) -> np.ndarray:
        """Gradient of sum_{j,t} weights[j,t] * log p(token_jt | prefix) w.r.t. params."""
        caches, probs, padded, mask = cache
        P = self.unpack()
        G = {k: np.zeros_like(v) for k, v in P.items()}
        B, T = padded.shape
        H = self.hidden_size
        weights = np.where(mask, weights, 0.0)
        dh_next = np.zeros((B, H))
        for t in reversed(range(T)):
            (x_ids, h_prev, z, r, rh, n), h = caches[t]
            tgt = np.clip(padded[:, t] - 1, 0, self.n_out - 1)
            dlogits = -probs[t] * weights[:, t:t + 1]
            dlogits[np.arange(B), tgt] += weights[:, t]
            G["Wo"] += dlogits.T @ h
            G["bo"] += dlogits.sum(0)
            dh = dlogits @ P["Wo"] + dh_next
            dn = dh * (1 - z)
            dz = dh * (h_prev - n)
            dh_prev = dh * z
            dan = dn * (1 - n * n)
            G["Un"] += dan.T @ rh
            G["bn"] += dan.sum(0)
            drh = dan @ P["Un"]
            dr = drh * h_prev
            dh_prev += drh * r
            daz = dz * z * (1 - z)
            dar = dr * r * (1 - r)
            dzr = np.concatenate([daz, dar], axis=1)
            G["Uzr"] += dzr.T @ h_prev
            G["bz"] += daz.sum(0)
            G["br"] += dar.sum(0)
            dh_prev += dzr @ P["Uzr"]
            dxin = np.concatenate([dzr, dan], axis=1)  # (B, 3H)
            np.add.at(G["Wx"].T, x_ids, dxin)
            dh_next = dh_prev
        return np.concatenate([G[name].ravel() for name, _ in self.shapes()])

    def sequence_log_probs(self, sequences) -> list:
        padded, lengths = pad(sequences)
        logp, _ = self.forward(padded, lengths)
        return [logp[i, :lengths[i]] for i in range(len(sequences))]

    def step_distribution(self, prefix_ids) -> np.ndarray:
        """Distribution over the full vocabulary after a prefix (start prob is 0)."""
        P = self.unpack()
        h = np.zeros((1, self.hidden_size))
        prev = np.zeros(1, dtype=np.int64)
        for tok in list(prefix_ids) + [None]:
            h, _ = self._step(P, prev, h)
            if tok is None:
                break
            prev = np.array([tok])
        p = softmax(self._logits(P, h))[0]
        return np.r_[0.0, p]

    def sample(self, n: int, seed=None, prefixes=None) -> SampleBatch:
        """Draw ``n`` sequences; optional per-row forced prefixes (token ids).

        Forced prefix steps are recorded with step weight 0.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = _rng(seed)
        P = self.unpack()
        h = np.zeros((n, self.hidden_size))
        prev = np.zeros(n, dtype=np.int64)
        alive = np.ones(n, dtype=bool)
        out = np.zeros((n, self.max_len), dtype=np.int64)
        logp = np.zeros((n, self.max_len))
        forced = np.zeros((n, self.max_len), dtype=bool)
        lengths = np.zeros(n, dtype=np.int64)
        if prefixes is not None:
            for i, pre in enumerate(prefixes):
                if len(pre) >= self.max_len:
                    raise ValueError("prefix must be shorter than max_len")
                forced[i, :len(pre)] = True
                out[i, :len(pre)] = pre
        for t in range(self.max_len):
            h, _ = self._step(P, prev, h)
            lp = log_softmax(self._logits(P, h))
            u = rng.random(n)
            cdf = np.cumsum(np.exp(lp), axis=1)
            draw = np.minimum((cdf < u[:, None]).sum(axis=1), self.n_out - 1) + 1
            tok = np.where(forced[:, t], out[:, t], draw)
            logp[:, t] = lp[np.arange(n), tok - 1]
            out[:, t] = np.where(alive, tok, 0)
            lengths += alive
            alive &= tok != 1
            prev = tok
            if not alive.any():
                break
        seqs = [out[i, :lengths[i]].copy() for i in range(n)]
        lps = [logp[i, :lengths[i]].copy() for i in range(n)]
        wts = [(~forced[i, :lengths[i]]).astype(float) for i in range(n)]
        return SampleBatch(seqs, lps, None, wts)

    # ---- serialization

    def to_dict(self) -> dict:
        return {
            "format": "spgan-generator",
            "version": FORMAT_VERSION,
            "kind": "sequence",
            "vocab": list(self.token_vocab),
            "hidden_size": self.hidden_size,
            "max_len": self.max_len,
            "seed_lineage": list(self.seed_lineage),
            "emit_end": self.emit_end,
            "params": [float(v) for v in self.params],
        }


def param_shapes(H, V):
    n_out = V - 1
    return [("Wx", (3 * H, V)), ("Uzr", (2 * H, H)), ("Un", (H, H)),
            ("bz", (H,)), ("br", (H,)), ("bn", (H,)),
            ("Wo", (n_out, H)), ("bo", (n_out,))]


def _sigm(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60, 60)))


def pad(sequences) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    T = int(lengths.max()) if len(lengths) else 0
    padded = np.ones((len(sequences), max(T, 1)), dtype=np.int64)
    for i, s in enumerate(sequences):
        padded[i, :len(s)] = s
    return padded, lengths


def init_sequence(symbols: Sequence[str], hidden_size: int, max_len: int, seed=0,
                  scale: float = 0.1, emit_end: bool = True) -> SequenceGenerator:
    vocab = (START, END) + tuple(symbols)
    if len(set(vocab)) != len(vocab):
        raise ValueError("duplicate tokens in vocabulary")
    size = sum(int(np.prod(s)) for _, s in param_shapes(hidden_size, len(vocab)))
    params = _rng(seed).normal(0.0, scale, size=size)
    lineage = (seed,) if isinstance(seed, int) else ()
    return SequenceGenerator(vocab, hidden_size, max_len, params, lineage, emit_end)


def sequence_step_gradients(gen: SequenceGenerator, sequence, per_prefix_rewards) -> np.ndarray:
    """Exact gradient of sum_t reward_t * log p(token_t | prefix_<t)."""
    seq = np.asarray(sequence, dtype=np.int64)
    r = np.asarray(per_prefix_rewards, dtype=float)
    if len(r) != len(seq):
        raise ValueError("one reward per sequence step is required")
    padded, lengths = pad([seq])
    _, cache = gen.forward(padded, lengths)
    return gen.backward(cache, r[None, :])


def sequence_batch_gradient(gen: SequenceGenerator, batch: SampleBatch, baseline=False) -> np.ndarray:
    padded, lengths = pad(batch.outputs)
    W = np.zeros(padded.shape)
    rewards = [np.asarray(r, dtype=float) for r in batch.rewards]
    steps = batch.step_weights or [np.ones(len(s)) for s in batch.outputs]
    live = np.zeros(padded.shape, dtype=bool)
    for i, (r, w) in enumerate(zip(rewards, steps)):
        W[i, :len(r)] = r
        live[i, :len(r)] = w > 0
    if baseline:
        # per-timestep batch mean over the sequences still being generated at t
        counts = live.sum(axis=0)
        b = np.where(counts > 0, (W * live).sum(axis=0) / np.maximum(counts, 1), 0.0)
        W = W - b[None, :]
    W = W * live
    _, cache = gen.forward(padded, lengths)
    return gen.backward(cache, W) / len(batch.outputs)


def reinforce_update(gen, batch: SampleBatch, learning_rate: float, baseline: bool = False):
    """One REINFORCE ascent step on mean_j reward_j * grad log l_j."""
    if batch.rewards is None:
        raise ValueError("batch rewards must be filled before an update")
    if isinstance(gen, CategoricalGenerator):
        g = categorical_gradient(gen, batch.outputs, batch.rewards, baseline)
        _check_finite(g)
        return CategoricalGenerator(gen.theta + learning_rate * clip_by_norm(g))
    g = sequence_batch_gradient(gen, batch, baseline)
    _check_finite(g)
    return replace(gen, params=gen.params + learning_rate * clip_by_norm(g))


def sample_batch(gen, n: int, rng_seed=None) -> SampleBatch:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(rng_seed)
    if isinstance(gen, CategoricalGenerator):
        pi = gen.probs
        cdf = np.cumsum(pi)
        idx = np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), gen.b - 1)
        lp = log_softmax(gen.theta)
        return SampleBatch(list(idx), list(lp[idx]))
    return gen.sample(n, rng)


def extrapolate(gen: SequenceGenerator, prefix, rng_seed=None) -> list:
    """Complete a token prefix; the result begins with the prefix verbatim."""
    ids = gen.token_ids(prefix)
    if len(ids) >= gen.max_len:
        raise ValueError("prefix must be shorter than max_len")
    if np.any(ids <= 1):
        raise ValueError("prefix may not contain start or end markers")
    batch = gen.sample(1, rng_seed, prefixes=[ids] if len(ids) else None)
    return gen.tokens(batch.outputs[0])


@dataclass
class MLETrace:
    train_nll: list = field(default_factory=list)
    validation_nll: list = field(default_factory=list)
    best_epoch: int = 0


def mean_token_nll(gen: SequenceGenerator, sequences) -> float:
    padded, lengths = pad(sequences)
    logp, _ = gen.forward(padded, lengths)
    return float(-logp.sum() / lengths.sum())


def mle_pretrain(gen: SequenceGenerator, data, epochs: int, learning_rate: float,
                 validation=None, patience: int = 10):
    """Full-batch gradient descent on mean per-token NLL with norm clipping.

    Stops after ``epochs`` or once validation NLL has not improved for
    ``patience`` epochs; returns the best-validation parameters.
    """
    if not len(data):
        raise ValueError("MLE pretraining needs data")
    padded, lengths = pad(data)
    n_tok = lengths.sum()
    weights = (np.arange(padded.shape[1])[None, :] < lengths[:, None]) / n_tok
    trace = MLETrace()
    best = gen
    best_val = math.inf
    since = 0
    for epoch in range(epochs):
        logp, cache = gen.forward(padded, lengths)
        trace.train_nll.append(float(-logp.sum() / n_tok))
        val = mean_token_nll(gen, validation) if validation is not None and len(validation) else trace.train_nll[-1]
        trace.validation_nll.append(val)
        if val < best_val - 1e-9:
            best_val, best, since = val, gen, 0
            trace.best_epoch = epoch
        else:
            since += 1
            if since >= patience:
                break
        g = gen.backward(cache, weights)
        gen = replace(gen, params=gen.params + learning_rate * clip_by_norm(g))
    else:
        val = mean_token_nll(gen, validation) if validation is not None and len(validation) else mean_token_nll(gen, data)
        if val < best_val:
            best, trace.best_epoch = gen, epochs
    return best, trace


# --------------------------------------------------------------------------
# checkpoints


def save_generator(gen, path) -> None:
    if isinstance(gen, CategoricalGenerator):
        d = {"format": "spgan-generator", "version": FORMAT_VERSION, "kind": "categorical",
             "b": gen.b, "seed_lineage": [], "params": [float(v) for v in gen.theta]}
    else:
        d = gen.to_dict()
    with open(path, "w") as fh:
        json.dump(d, fh)


def load_generator(path):
    with open(path) as fh:
        d = json.load(fh)
    if d.get("format") != "spgan-generator":
        raise ValueError("not a generator checkpoint")
    if d["version"] > FORMAT_VERSION:
        raise ValueError(f"checkpoint version {d['version']} is newer than supported")
    params = np.array(d["params"], dtype=float)
    if d["kind"] == "categorical":
        return CategoricalGenerator(params)
    return SequenceGenerator(tuple(d["vocab"]), int(d["hidden_size"]), int(d["max_len"]),
                             params, tuple(d["seed_lineage"]), bool(d.get("emit_end", True)))
