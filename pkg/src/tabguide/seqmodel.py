"""GRU encoder-decoder with multiplicative attention, written in numpy.

Forward pass, backpropagation through time, Adam/SGD training with global
norm clipping, beam search decoding and a binary checkpoint format. All
arithmetic is float64.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .datagen import PathExample, Vocabulary

__all__ = [
    "ModelConfig", "TrainConfig", "SeqModel", "BeamHypothesis", "Cache",
    "init_model", "forward_loss", "backward", "train", "beam_decode", "greedy_decode",
    "save_checkpoint", "load_checkpoint", "CheckpointError", "VocabularyMismatch",
    "TrainingDiverged", "encode_examples", "parameter_shapes",
]

ATTENTION_MODES = ("multiplicative", "none")


@dataclass
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    embed_dim: int = 64
    hidden_dim: int = 128
    layers: int = 1
    attention: str = "multiplicative"
    seed: int = 0

    def __post_init__(self):
        for name in ("src_vocab_size", "tgt_vocab_size", "embed_dim", "hidden_dim", "layers"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.attention not in ATTENTION_MODES:
            raise ValueError(f"attention must be one of {ATTENTION_MODES}")


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    clip_norm: float = 5.0
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be positive and epochs non-negative")
        if not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive")


class TrainingDiverged(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


class VocabularyMismatch(ValueError):
    pass


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    E, H = cfg.embed_dim, cfg.hidden_dim
    shapes = {"src_embed": (cfg.src_vocab_size, E), "tgt_embed": (cfg.tgt_vocab_size, E)}
    for side in ("enc", "dec"):
        for l in range(cfg.layers):
            inp = E if l == 0 else H
            shapes[f"{side}{l}.W"] = (inp, 3 * H)
            shapes[f"{side}{l}.U"] = (H, 3 * H)
            shapes[f"{side}{l}.b"] = (3 * H,)
    if cfg.attention == "multiplicative":
        shapes["attn.W"] = (H, H)
        shapes["combine.W"] = (2 * H, H)
        shapes["combine.b"] = (H,)
    shapes["out.W"] = (H, cfg.tgt_vocab_size)
    shapes["out.b"] = (cfg.tgt_vocab_size,)
    return shapes


@dataclass
class SeqModel:
    config: ModelConfig
    params: dict
    src_vocab: Vocabulary | None = None
    tgt_vocab: Vocabulary | None = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> SeqModel:
        return SeqModel(self.config, {k: v.copy() for k, v in self.params.items()},
                        self.src_vocab, self.tgt_vocab)

    def require_vocab(self, src_vocab: Vocabulary | None = None, tgt_vocab: Vocabulary | None = None):
        for name, mine, theirs in (("source", self.src_vocab, src_vocab),
                                   ("target", self.tgt_vocab, tgt_vocab)):
            if theirs is None:
                continue
            if mine is None or mine.digest() != theirs.digest():
                raise VocabularyMismatch(f"model {name} vocabulary does not match the corpus")

    @property
    def pad(self):
        return self.src_vocab.pad if self.src_vocab else 0


def init_model(cfg: ModelConfig, src_vocab: Vocabulary | None = None,
               tgt_vocab: Vocabulary | None = None) -> SeqModel:
    """Parameters drawn from U(-s, s), s = 1/sqrt(hidden_dim)."""
    if src_vocab is not None and len(src_vocab) != cfg.src_vocab_size:
        raise ValueError("source vocabulary size does not match config")
    if tgt_vocab is not None and len(tgt_vocab) != cfg.tgt_vocab_size:
        raise ValueError("target vocabulary size does not match config")
    rng = np.random.default_rng(cfg.seed)
    s = 1.0 / math.sqrt(cfg.hidden_dim)
    params = {name: rng.uniform(-s, s, size=shape) for name, shape in parameter_shapes(cfg).items()}
    return SeqModel(cfg, params, src_vocab, tgt_vocab)


# ---------------------------------------------------------------- numerics


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_softmax(x, axis=-1):
    m = x.max(axis=axis, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def _gru_step(x, h, W, U, b, H):
    a = x @ W + b
    u = h @ U
    z = _sigmoid(a[:, :H] + u[:, :H])
    r = _sigmoid(a[:, H:2 * H] + u[:, H:2 * H])
    un = u[:, 2 * H:]
    n = np.tanh(a[:, 2 * H:] + r * un)
    return (1.0 - z) * n + z * h, (z, r, n, un)


def _gru_step_back(dh_new, x, h, gates, W, U, gW, gU, gb):
    z, r, n, un = gates
    dn = dh_new * (1.0 - z)
    dz = dh_new * (h - n)
    dh = dh_new * z
    dn_pre = dn * (1.0 - n * n)
    dr = dn_pre * un
    dz_pre = dz * z * (1.0 - z)
    dr_pre = dr * r * (1.0 - r)
    da = np.concatenate([dz_pre, dr_pre, dn_pre], axis=1)
    du = np.concatenate([dz_pre, dr_pre, dn_pre * r], axis=1)
    gW += x.T @ da
    gb += da.sum(axis=0)
    gU += h.T @ du
    return da @ W.T, dh + du @ U.T


# ---------------------------------------------------------------- forward / backward


@dataclass
class Cache:
    """Everything backward() needs; treated as read-only."""

    X: np.ndarray
    src_mask: np.ndarray
    Y_in: np.ndarray
    Y_out: np.ndarray
    tgt_mask: np.ndarray
    ntok: int
    enc: list = field(default_factory=list)   # per layer: list of (x, h_prev, gates)
    dec: list = field(default_factory=list)
    Hs: np.ndarray | None = None
    Hd: np.ndarray | None = None
    alpha: np.ndarray | None = None
    Q: np.ndarray | None = None
    cat: np.ndarray | None = None
    Ht: np.ndarray | None = None
    probs: np.ndarray | None = None


def _pad(seqs, pad):
    T = max((len(s) for s in seqs), default=0)
    out = np.full((len(seqs), T), pad, dtype=np.int64)
    mask = np.zeros((len(seqs), T))
    for i, s in enumerate(seqs):
        out[i, :len(s)] = s
        mask[i, :len(s)] = 1.0
    return out, mask


def _encode(model: SeqModel, X, src_mask, keep=None):
    P, cfg = model.params, model.config
    H = cfg.hidden_dim
    B, S = X.shape
    inputs = [P["src_embed"][X[:, t]] for t in range(S)]
    finals = []
    for l in range(cfg.layers):
        W, U, b = P[f"enc{l}.W"], P[f"enc{l}.U"], P[f"enc{l}.b"]
        h = np.zeros((B, H))
        outs, steps = [], []
        for t in range(S):
            m = src_mask[:, t:t + 1]
            h_new, gates = _gru_step(inputs[t], h, W, U, b, H)
            if keep is not None:
                steps.append((inputs[t], h, gates))
            h = m * h_new + (1.0 - m) * h
            outs.append(h)
        if keep is not None:
            keep.append(steps)
        finals.append(h)
        inputs = outs
    return np.stack(inputs, axis=1), finals


def _decode_steps(model: SeqModel, Y_in, init, keep=None):
    P, cfg = model.params, model.config
    H = cfg.hidden_dim
    B, T = Y_in.shape
    inputs = [P["tgt_embed"][Y_in[:, t]] for t in range(T)]
    for l in range(cfg.layers):
        W, U, b = P[f"dec{l}.W"], P[f"dec{l}.U"], P[f"dec{l}.b"]
        h = init[l]
        outs, steps = [], []
        for t in range(T):
            h_new, gates = _gru_step(inputs[t], h, W, U, b, H)
            if keep is not None:
                steps.append((inputs[t], h, gates))
            h = h_new
            outs.append(h)
        if keep is not None:
            keep.append(steps)
        inputs = outs
    return np.stack(inputs, axis=1) if T else np.zeros((B, 0, H))


def _attend(model: SeqModel, Hd, Hs, src_mask):
    """Returns (attentional hidden, alpha, Q, cat)."""
    P = model.params
    Q = Hd @ P["attn.W"]
    scores = Q @ Hs.transpose(0, 2, 1)
    mask = src_mask[:, None, :]
    scores = np.where(mask > 0, scores, -np.inf)
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(scores) * mask
    alpha = e / e.sum(axis=-1, keepdims=True)
    C = alpha @ Hs
    cat = np.concatenate([C, Hd], axis=-1)
    Ht = np.tanh(cat @ P["combine.W"] + P["combine.b"])
    return Ht, alpha, Q, cat


def _check_batch(model, batch):
    if not batch:
        raise ValueError("empty batch")
    Vs, Vt = model.config.src_vocab_size, model.config.tgt_vocab_size
    for src, tgt in batch:
        if not len(src):
            raise ValueError("empty source sequence")
        if min(src) < 0 or max(src) >= Vs:
            raise IndexError("source id out of range")
        if len(tgt) and (min(tgt) < 0 or max(tgt) >= Vt):
            raise IndexError("target id out of range")


def forward_loss(model: SeqModel, batch: Sequence[tuple[Sequence[int], Sequence[int]]]) -> tuple[float, Cache]:
    """Mean token cross-entropy of ``batch`` under teacher forcing.

    Each item is (source ids, target ids) where the target ids are exactly
    the tokens to predict, end-of-sequence included. The decoder is fed
    sentence-start followed by the gold prefix.
    """
    _check_batch(model, batch)
    src_vocab, tgt_vocab = model.src_vocab, model.tgt_vocab
    pad_s = src_vocab.pad if src_vocab else 0
    bos = tgt_vocab.bos if tgt_vocab else 0
    X, src_mask = _pad([list(s) for s, _ in batch], pad_s)
    Y_out, tgt_mask = _pad([list(t) for _, t in batch], 0)
    Y_in = np.full_like(Y_out, 0)
    if Y_out.shape[1]:
        Y_in[:, 0] = bos
        Y_in[:, 1:] = Y_out[:, :-1]
    ntok = int(tgt_mask.sum())
    cache = Cache(X, src_mask, Y_in, Y_out, tgt_mask, ntok)
    Hs, finals = _encode(model, X, src_mask, cache.enc)
    Hd = _decode_steps(model, Y_in, finals, cache.dec)
    cache.Hs, cache.Hd = Hs, Hd
    if model.config.attention == "multiplicative" and Hd.shape[1]:
        Ht, cache.alpha, cache.Q, cache.cat = _attend(model, Hd, Hs, src_mask)
    else:
        Ht = Hd
    cache.Ht = Ht
    logits = Ht @ model.params["out.W"] + model.params["out.b"]
    logp = _log_softmax(logits)
    cache.probs = np.exp(logp)
    if ntok == 0:
        return 0.0, cache
    gold = np.take_along_axis(logp, Y_out[..., None], axis=-1)[..., 0]
    loss = -float((gold * tgt_mask).sum()) / ntok
    return loss, cache


def backward(model: SeqModel, cache: Cache) -> dict[str, np.ndarray]:
    """Gradients of the mean loss for every parameter tensor."""
    P, cfg = model.params, model.config
    H = cfg.hidden_dim
    grads = {k: np.zeros_like(v) for k, v in P.items()}
    if cache.Hd is None:
        raise ValueError("cache does not come from forward_loss")
    if cache.ntok == 0:
        return grads
    B, T = cache.Y_out.shape
    S = cache.X.shape[1]

    dlogits = cache.probs.copy()
    np.put_along_axis(dlogits, cache.Y_out[..., None],
                      np.take_along_axis(dlogits, cache.Y_out[..., None], axis=-1) - 1.0, axis=-1)
    dlogits *= cache.tgt_mask[..., None] / cache.ntok
    Ht = cache.Ht
    grads["out.W"] = Ht.reshape(-1, H).T @ dlogits.reshape(B * T, -1)
    grads["out.b"] = dlogits.sum(axis=(0, 1))
    dHt = dlogits @ P["out.W"].T

    Hs = cache.Hs
    dHs = np.zeros_like(Hs)
    if cfg.attention == "multiplicative":
        dpre = dHt * (1.0 - Ht * Ht)
        grads["combine.W"] = cache.cat.reshape(B * T, -1).T @ dpre.reshape(B * T, -1)
        grads["combine.b"] = dpre.sum(axis=(0, 1))
        dcat = dpre @ P["combine.W"].T
        dC, dHd = dcat[..., :H], dcat[..., H:].copy()
        alpha = cache.alpha
        dalpha = dC @ Hs.transpose(0, 2, 1)
        dHs += alpha.transpose(0, 2, 1) @ dC
        dscores = alpha * (dalpha - (dalpha * alpha).sum(axis=-1, keepdims=True))
        dQ = dscores @ Hs
        dHs += dscores.transpose(0, 2, 1) @ cache.Q
        grads["attn.W"] = cache.Hd.reshape(B * T, H).T @ dQ.reshape(B * T, H)
        dHd += dQ @ P["attn.W"].T
    else:
        dHd = dHt

    # decoder BPTT, top layer first; gradients w.r.t. initial states feed the encoder
    d_ext = [dHd[:, t] for t in range(T)]
    d_init = [None] * cfg.layers
    for l in reversed(range(cfg.layers)):
        W, U = P[f"dec{l}.W"], P[f"dec{l}.U"]
        gW, gU, gb = grads[f"dec{l}.W"], grads[f"dec{l}.U"], grads[f"dec{l}.b"]
        dh = np.zeros((B, H))
        below = [None] * T
        for t in reversed(range(T)):
            x, h_prev, gates = cache.dec[l][t]
            dx, dh = _gru_step_back(dh + d_ext[t], x, h_prev, gates, W, U, gW, gU, gb)
            below[t] = dx
        d_init[l] = dh
        d_ext = below
    gE = grads["tgt_embed"]
    for t in range(T):
        np.add.at(gE, cache.Y_in[:, t], d_ext[t])

    # encoder BPTT with masked carry-over
    d_ext = [dHs[:, t] for t in range(S)]
    for l in reversed(range(cfg.layers)):
        W, U = P[f"enc{l}.W"], P[f"enc{l}.U"]
        gW, gU, gb = grads[f"enc{l}.W"], grads[f"enc{l}.U"], grads[f"enc{l}.b"]
        dh = d_init[l]
        below = [None] * S
        for t in reversed(range(S)):
            m = cache.src_mask[:, t:t + 1]
            x, h_prev, gates = cache.enc[l][t]
            dout = dh + d_ext[t]
            dx, dh_prev = _gru_step_back(m * dout, x, h_prev, gates, W, U, gW, gU, gb)
            dh = dh_prev + (1.0 - m) * dout
            below[t] = dx
        d_ext = below
    gE = grads["src_embed"]
    for t in range(S):
        np.add.at(gE, cache.X[:, t], d_ext[t])
    return grads


# ---------------------------------------------------------------- training


def encode_examples(examples: Sequence[PathExample], src_vocab: Vocabulary,
                    tgt_vocab: Vocabulary) -> list[tuple[list[int], list[int]]]:
    """Token ids for training: target ids end with end-of-sequence."""
    return [(src_vocab.encode(e.source), tgt_vocab.encode(e.target) + [tgt_vocab.eos])
            for e in examples]


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _SGD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= self.lr * g


def clip_gradients(grads: dict, max_norm: float) -> float:
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class TrainResult:
    model: SeqModel
    losses: list  # mean training loss per epoch
    steps: int = 0


def train(model: SeqModel, data: Sequence[tuple[Sequence[int], Sequence[int]]],
          tc: TrainConfig | None = None, callback=None) -> TrainResult:
    """Minibatch training on (source ids, target ids) pairs.

    The model is updated in place and also returned. Raises
    TrainingDiverged when the loss stops being finite.
    """
    tc = tc or TrainConfig()
    if not data:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(tc.shuffle_seed)
    opt = _Adam(model.params, tc.learning_rate) if tc.optimizer == "adam" \
        else _SGD(model.params, tc.learning_rate)
    losses, steps = [], 0
    for epoch in range(tc.epochs):
        order = rng.permutation(len(data))
        total, count = 0.0, 0
        for s in range(0, len(order), tc.batch_size):
            batch = [data[i] for i in order[s:s + tc.batch_size]]
            loss, cache = forward_loss(model, batch)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}, step {steps}")
            grads = backward(model, cache)
            clip_gradients(grads, tc.clip_norm)
            opt.step(model.params, grads)
            steps += 1
            total += loss * cache.ntok
            count += cache.ntok
        losses.append(total / max(count, 1))
        if callback is not None:
            callback(epoch, losses[-1])
    return TrainResult(model, losses, steps)


def train_with_selection(model: SeqModel, data, tc: TrainConfig, score, every: int = 5,
                         callback=None) -> tuple[SeqModel, int, TrainResult, list]:
    """Train for ``tc.epochs`` and keep the parameters with the highest
    ``score(model)`` seen every ``every`` epochs and after the last one.
    Ties go to the earlier epoch. Returns (best copy, its epoch count,
    the full training result, [(epochs, score)])."""
    if every < 1:
        raise ValueError("every must be positive")
    history = []
    best = [None, 0, -math.inf]

    def check(epoch, loss):
        if callback is not None:
            callback(epoch, loss)
        done = epoch + 1
        if done % every == 0 or done == tc.epochs:
            sc = score(model)
            history.append((done, sc))
            if sc > best[2]:
                best[:] = [model.copy(), done, sc]

    res = train(model, data, tc, callback=check)
    return best[0], best[1], res, history


# ---------------------------------------------------------------- decoding


@dataclass
class BeamHypothesis:
    tokens: tuple   # token ids, ending with end-of-sequence when complete
    score: float    # sum of token log-probabilities
    complete: bool

    def output(self, eos: int) -> tuple:
        return self.tokens[:-1] if self.complete and self.tokens and self.tokens[-1] == eos else self.tokens


class _Decoder:
    """Incremental decoder for one source sequence."""

    def __init__(self, model: SeqModel, src_ids: Sequence[int]):
        if not len(src_ids):
            raise ValueError("empty source sequence")
        self.model = model
        X = np.asarray([list(src_ids)], dtype=np.int64)
        if X.min() < 0 or X.max() >= model.config.src_vocab_size:
            raise IndexError("source id out of range")
        self.mask = np.ones((1, X.shape[1]))
        Hs, finals = _encode(model, X, self.mask)
        self.Hs = Hs
        self.init = np.stack(finals)  # (L, 1, H)

    def step(self, tokens: np.ndarray, states: np.ndarray):
        """Log-probabilities for the next token of each hypothesis.

        ``states`` has shape (layers, k, hidden)."""
        P, cfg = self.model.params, self.model.config
        H = cfg.hidden_dim
        x = P["tgt_embed"][tokens]
        new = []
        for l in range(cfg.layers):
            h, _ = _gru_step(x, states[l], P[f"dec{l}.W"], P[f"dec{l}.U"], P[f"dec{l}.b"], H)
            new.append(h)
            x = h
        k = len(tokens)
        if cfg.attention == "multiplicative":
            Hs = np.repeat(self.Hs, k, axis=0)
            mask = np.repeat(self.mask, k, axis=0)
            Ht, _, _, _ = _attend(self.model, x[:, None, :], Hs, mask)
            x = Ht[:, 0]
        logits = x @ P["out.W"] + P["out.b"]
        return _log_softmax(logits), np.stack(new)


def _banned(model: SeqModel):
    v = model.tgt_vocab
    if v is None:
        return []
    return [v.pad, v.bos, v.unk]


def greedy_decode(model: SeqModel, src_ids: Sequence[int], max_len: int = 10) -> BeamHypothesis:
    dec = _Decoder(model, src_ids)
    eos = model.tgt_vocab.eos if model.tgt_vocab else None
    bos = model.tgt_vocab.bos if model.tgt_vocab else 0
    banned = _banned(model)
    tok, states = np.array([bos]), dec.init
    out, score = [], 0.0
    for _ in range(max_len):
        logp, states = dec.step(tok, states)
        row = logp[0].copy()
        row[banned] = -np.inf
        t = int(np.argmax(row))
        out.append(t)
        score += float(logp[0, t])
        if t == eos:
            return BeamHypothesis(tuple(out), score, True)
        tok = np.array([t])
    return BeamHypothesis(tuple(out), score, False)


def beam_decode(model: SeqModel, src_ids: Sequence[int], k: int = 10, max_len: int = 10,
                length_norm: bool = False) -> list[BeamHypothesis]:
    """Up to ``k`` hypotheses, best first, with exact summed log-probabilities.

    Hypotheses still open after ``max_len`` steps are returned with
    ``complete=False``. With ``length_norm`` completed hypotheses are ranked
    by score per token; the reported score stays the plain sum.
    """
    if k < 1:
        raise ValueError("beam width must be at least 1")
    dec = _Decoder(model, src_ids)
    eos = model.tgt_vocab.eos if model.tgt_vocab else None
    bos = model.tgt_vocab.bos if model.tgt_vocab else 0
    banned = _banned(model)

    def rank(h: BeamHypothesis):
        return h.score / len(h.tokens) if length_norm and h.tokens else h.score

    live = [((), 0.0)]
    states = dec.init
    finished: list[BeamHypothesis] = []
    for _ in range(max_len):
        if not live or len(finished) >= k:
            break
        toks = np.array([seq[-1] if seq else bos for seq, _ in live])
        logp, new_states = dec.step(toks, states)
        logp = logp.copy()
        logp[:, banned] = -np.inf
        cand = np.array([s for _, s in live])[:, None] + logp
        flat = cand.ravel()
        width = min(k, int(np.isfinite(flat).sum()))
        # stable order: score desc, then (hypothesis, token) index asc
        order = np.lexsort((np.arange(flat.size), -flat))[:width]
        next_live, rows = [], []
        for idx in order:
            h, t = divmod(int(idx), logp.shape[1])
            seq = live[h][0] + (t,)
            score = float(flat[idx])
            if t == eos:
                finished.append(BeamHypothesis(seq, score, True))
            else:
                next_live.append((seq, score))
                rows.append(h)
        live = next_live
        states = new_states[:, rows] if rows else new_states[:, :0]
        if len(finished) >= k and live:
            worst = sorted(finished, key=rank, reverse=True)[k - 1]
            if not length_norm and max(s for _, s in live) <= worst.score:
                break
    finished.extend(BeamHypothesis(seq, s, False) for seq, s in live)
    finished.sort(key=lambda h: (-rank(h), h.tokens))
    return finished[:k]


# ---------------------------------------------------------------- checkpoints

_MAGIC = b"v1 "


def save_checkpoint(model: SeqModel, path):
    names = list(model.params)
    header = {
        "config": asdict(model.config),
        "src_vocab": model.src_vocab.tokens if model.src_vocab else None,
        "tgt_vocab": model.tgt_vocab.tokens if model.tgt_vocab else None,
        "src_vocab_hash": model.src_vocab.digest() if model.src_vocab else None,
        "tgt_vocab_hash": model.tgt_vocab.digest() if model.tgt_vocab else None,
        "tensors": names,
    }
    buf = io.BytesIO()
    buf.write(_MAGIC + json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
    for name in names:
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        nb = name.encode()
        buf.write(struct.pack("<I", len(nb)) + nb)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(struct.pack("<Q", arr.size))
        buf.write(arr.tobytes(order="C"))
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def _vocab_from(tokens):
    if tokens is None:
        return None
    from .datagen import RESERVED
    if tuple(tokens[:len(RESERVED)]) != RESERVED:
        raise CheckpointError("vocabulary in checkpoint lacks reserved tokens")
    return Vocabulary(tokens[len(RESERVED):])


def load_checkpoint(path) -> SeqModel:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(_MAGIC):
        raise CheckpointError("not a v1 checkpoint")
    nl = data.find(b"\n")
    if nl < 0:
        raise CheckpointError("truncated header")
    try:
        header = json.loads(data[len(_MAGIC):nl])
        cfg = ModelConfig(**header["config"])
    except (ValueError, KeyError, TypeError) as e:
        raise CheckpointError(f"bad header: {e}") from None
    src_vocab, tgt_vocab = _vocab_from(header["src_vocab"]), _vocab_from(header["tgt_vocab"])
    for v, h in ((src_vocab, header.get("src_vocab_hash")), (tgt_vocab, header.get("tgt_vocab_hash"))):
        if v is not None and v.digest() != h:
            raise CheckpointError("vocabulary hash mismatch")
    expected = parameter_shapes(cfg)
    pos = nl + 1
    params = {}

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError("truncated checkpoint")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    for name in header["tensors"]:
        (ln,) = struct.unpack("<I", take(4))
        got = take(ln).decode()
        if got != name:
            raise CheckpointError(f"expected tensor {name!r}, found {got!r}")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank))
        (count,) = struct.unpack("<Q", take(8))
        if math.prod(dims) != count:
            raise CheckpointError(f"tensor {name}: dims {dims} do not match length {count}")
        if expected.get(name) != tuple(dims):
            raise CheckpointError(f"tensor {name}: shape {dims} inconsistent with config")
        params[name] = np.frombuffer(take(8 * count), dtype="<f8").reshape(dims).astype(np.float64)
    if pos != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    if set(params) != set(expected):
        raise CheckpointError("checkpoint tensors do not match the config")
    return SeqModel(cfg, params, src_vocab, tgt_vocab)


# ---------------------------------------------------------------- guidance


def clause_scorer(model: SeqModel, is_skolem=None):
    """Scorer for guided proof search: log-probability of each candidate
    clause name as the first decoded token given the normalized path."""
    from .datagen import path_tokens
    from .fol import normalize

    cache: dict[tuple, np.ndarray] = {}

    def score(path_lits, names):
        src = tuple(path_tokens(normalize(l, is_skolem) for l in path_lits))
        logp = cache.get(src)
        if logp is None:
            dec = _Decoder(model, model.src_vocab.encode(src))
            logp, _ = dec.step(np.array([model.tgt_vocab.bos]), dec.init)
            logp = cache[src] = logp[0]
        tv = model.tgt_vocab
        return {n: float(logp[tv.ids[n]]) for n in names if n in tv}

    return score
