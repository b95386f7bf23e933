"""Feature-based multilabel clause scorer.

A path of literals is summarized by a decay-weighted average of per-literal
term-walk features; a one-vs-rest logistic model scores every clause label.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .fol import Fn, Literal, Var

N_BUCKETS = 1 << 20
DEFAULT_DECAY = 0.8


def _sym(t) -> str:
    return "VAR" if isinstance(t, Var) else t.name


def featurize_literal(lit: Literal) -> dict[str, float]:
    """Head symbol plus all downward walks of one and two edges.

    Walks starting at the predicate carry a ``~`` prefix on negative literals.
    """
    feats: Counter = Counter()
    head = ("" if lit.positive else "~") + lit.atom.name
    feats[head] += 1

    def visit(node, label):
        kids = node.args if isinstance(node, Fn) else ()
        for ch in kids:
            feats[f"{label}>{_sym(ch)}"] += 1
            for gch in (ch.args if isinstance(ch, Fn) else ()):
                feats[f"{label}>{_sym(ch)}>{_sym(gch)}"] += 1
        for ch in kids:
            visit(ch, _sym(ch))

    visit(lit.atom, head)
    return {k: float(v) for k, v in feats.items()}


def featurize_path(lits: Sequence[Literal], decay: float = DEFAULT_DECAY) -> dict[str, float]:
    """Average of literal features weighted by decay**distance from the end."""
    if not lits:
        raise ValueError("cannot featurize an empty path")
    if not 0 < decay <= 1:
        raise ValueError("decay must lie in (0, 1]")
    total = 0.0
    acc: dict[str, float] = {}
    for d, lit in enumerate(reversed(lits)):
        w = decay ** d
        total += w
        for k, v in featurize_literal(lit).items():
            acc[k] = acc.get(k, 0.0) + w * v
    return {k: v / total for k, v in acc.items()}


def feature_bucket(name: str, seed: int = 0, n_buckets: int = N_BUCKETS) -> int:
    h = hashlib.blake2b(name.encode(), digest_size=8, key=seed.to_bytes(8, "little")).digest()
    return int.from_bytes(h, "little") % n_buckets


def hash_features(fv: dict[str, float], seed: int = 0, n_buckets: int = N_BUCKETS) -> dict[int, float]:
    out: dict[int, float] = {}
    for k, v in fv.items():
        b = feature_bucket(k, seed, n_buckets)
        out[b] = out.get(b, 0.0) + v
    return out


@dataclass
class MultilabelModel:
    labels: list            # sorted label names
    columns: np.ndarray     # hashed feature ids covered by the model, sorted
    weights: np.ndarray     # (len(columns), len(labels))
    bias: np.ndarray        # (len(labels),)
    seed: int = 0
    train_accuracy: float = float("nan")

    def _matrix(self, fvs: Sequence[dict[int, float]]):
        col_of = {int(c): i for i, c in enumerate(self.columns)}
        rows, cols, vals = [], [], []
        for r, fv in enumerate(fvs):
            for b in sorted(fv):
                j = col_of.get(b)
                if j is not None:
                    rows.append(r)
                    cols.append(j)
                    vals.append(fv[b])
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(fvs), len(self.columns)))

    def scores(self, fvs: Sequence[dict[int, float]]) -> np.ndarray:
        return np.asarray(self._matrix(fvs) @ self.weights) + self.bias


def train_multilabel(examples: Sequence[tuple[dict[int, float], str]], epochs: int = 300,
                     learning_rate: float = 0.5, l2: float = 1e-4, seed: int = 0) -> MultilabelModel:
    """One-vs-rest logistic regression by full-batch gradient descent.

    ``seed`` is recorded for the feature hashing that produced the inputs;
    the optimization itself is deterministic (zero init, full batch).
    """
    labels = sorted({y for _, y in examples})
    if len(labels) < 2:
        raise ValueError("need at least two distinct labels to train a multilabel model")
    columns = np.array(sorted({b for fv, _ in examples for b in fv}), dtype=np.int64)
    model = MultilabelModel(labels, columns, np.zeros((len(columns), len(labels))),
                            np.zeros(len(labels)), seed)
    X = model._matrix([fv for fv, _ in examples])
    Y = np.zeros((len(examples), len(labels)))
    idx = {l: i for i, l in enumerate(labels)}
    for r, (_, y) in enumerate(examples):
        Y[r, idx[y]] = 1.0
    n = len(examples)
    Xt = X.T.tocsr()
    for _ in range(epochs):
        z = np.asarray(X @ model.weights) + model.bias
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        err = (p - Y) / n
        model.weights -= learning_rate * (np.asarray(Xt @ err) + l2 * model.weights)
        model.bias -= learning_rate * err.sum(axis=0)
    pred = np.argmax(np.asarray(X @ model.weights) + model.bias, axis=1)
    model.train_accuracy = float(np.mean(pred == Y.argmax(axis=1)))
    return model


def predict_topk(model: MultilabelModel, fv: dict[int, float], k: int) -> list[str]:
    """Top ``k`` labels; ties broken by label name."""
    s = model.scores([fv])[0]
    order = sorted(range(len(model.labels)), key=lambda i: (-s[i], model.labels[i]))
    return [model.labels[i] for i in order[:k]]


def save_model(model: MultilabelModel, path):
    lines = ["v1 multilabel", f"seed {model.seed}", "labels " + " ".join(model.labels)]
    for j, label in enumerate(model.labels):
        w = model.weights[:, j]
        nz = np.nonzero(w)[0]
        recs = " ".join(f"{int(model.columns[i])}:{float(w[i])!r}" for i in nz)
        lines.append(f"{label} {float(model.bias[j])!r} {recs}".rstrip())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> MultilabelModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "v1 multilabel":
        raise ValueError(f"{path}: not a v1 multilabel model")
    seed = int(lines[1].split()[1])
    labels = lines[2].split()[1:]
    recs = []
    for line, label in zip(lines[3:], labels):
        parts = line.split()
        if parts[0] != label:
            raise ValueError(f"{path}: label records out of order")
        bias = float(parts[1])
        ws = {int(a): float(b) for a, b in (p.split(":") for p in parts[2:])}
        recs.append((bias, ws))
    if len(recs) != len(labels):
        raise ValueError(f"{path}: truncated model")
    columns = np.array(sorted({c for _, ws in recs for c in ws}), dtype=np.int64)
    col_of = {int(c): i for i, c in enumerate(columns)}
    W = np.zeros((len(columns), len(labels)))
    for j, (_, ws) in enumerate(recs):
        for c, v in ws.items():
            W[col_of[c], j] = v
    return MultilabelModel(labels, columns, W, np.array([b for b, _ in recs]), seed)
