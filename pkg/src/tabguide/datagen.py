"""Training data from tableau proofs.

Every expanded non-root node of a proof yields a (path, decision) pair:
the path is either the normalized literals from the root down to the node
or the clauses chosen on the way there, and the decision is the clause used
to expand the node (optionally followed by the next choices on one branch).
The conjecturing corpus pairs a literal path with the literal that follows it.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .fol import EQUALITY, Fn, Literal, Var, normalize
from .tableau import CONN, EXT, ProofError, ProofTree

LITERALS, CLAUSES = "literals", "clauses"
SEP = "#"
PUNCT = ("(", ")", ",", "=", "~")

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK, "VAR", "SKLM", SEP)


@dataclass(frozen=True)
class PathExample:
    source_kind: str
    source: tuple
    target: tuple
    problem: str
    proof: str
    node: tuple
    input_length: int
    task: str = "clause"  # "clause" or "conjecture"

    @property
    def node_str(self) -> str:
        return ".".join(map(str, self.node))


# ---------------------------------------------------------------- tokens


def _term_tokens(t, out):
    if isinstance(t, Var):
        out.append(str(t))
        return
    out.append(t.name)
    if t.args:
        out.append("(")
        for i, a in enumerate(t.args):
            if i:
                out.append(",")
            _term_tokens(a, out)
        out.append(")")


def tokenize_literal(lit: Literal) -> list[str]:
    out = [] if lit.positive else ["~"]
    if lit.is_equality:
        lhs, rhs = lit.atom.args
        _term_tokens(lhs, out)
        out.append("=")
        _term_tokens(rhs, out)
    else:
        _term_tokens(lit.atom, out)
    return out


class _Malformed(Exception):
    pass


def detokenize(tokens: Sequence[str]) -> Literal | None:
    """Parse a token stream back into a literal; None when malformed."""
    toks = list(tokens)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def term():
        nonlocal pos
        tok = peek()
        if tok is None or tok in PUNCT or tok in (SEP, PAD, BOS, EOS, UNK):
            raise _Malformed
        pos += 1
        if peek() != "(":
            if tok[0].isupper() and tok not in ("VAR", "SKLM"):
                return Var(tok)
            return Fn(tok)
        pos += 1
        args = [term()]
        while peek() == ",":
            pos += 1
            args.append(term())
        if peek() != ")":
            raise _Malformed
        pos += 1
        return Fn(tok, tuple(args))

    try:
        positive = True
        if peek() == "~":
            positive = False
            pos += 1
        lhs = term()
        if peek() == "=":
            pos += 1
            lit = Literal(positive, Fn(EQUALITY, (lhs, term())))
        elif isinstance(lhs, Var):
            return None
        else:
            lit = Literal(positive, lhs)
        if pos != len(toks):
            return None
        return lit
    except _Malformed:
        return None


def path_tokens(lits: Iterable[Literal]) -> list[str]:
    out = []
    for i, l in enumerate(lits):
        if i:
            out.append(SEP)
        out.extend(tokenize_literal(l))
    return out


def split_path(tokens: Sequence[str]) -> list[list[str]]:
    parts, cur = [], []
    for t in tokens:
        if t == SEP:
            parts.append(cur)
            cur = []
        else:
            cur.append(t)
    parts.append(cur)
    return parts


# ---------------------------------------------------------------- extraction


def _require_checked(p: ProofTree):
    if not p.verified:
        raise ProofError("proof has not been accepted by check_proof")


def _chains(node, i):
    """Clause sequences of length ``i`` starting at an expanded node and
    following expanded descendants along a single branch."""
    if i == 1:
        return [[node.clause]]
    out = []
    for ch in node.children:
        if ch.closure == EXT:
            out.extend([node.clause] + rest for rest in _chains(ch, i - 1))
    return out


def extract_clause_choice_examples(p: ProofTree, kind: str = LITERALS, i: int = 1,
                                   proof_id: str | None = None,
                                   is_skolem: Callable[[str], bool] | None = None) -> list[PathExample]:
    if kind not in (LITERALS, CLAUSES):
        raise ValueError(f"unknown source kind {kind!r}")
    if i < 1:
        raise ValueError("i must be positive")
    _require_checked(p)
    proof_id = proof_id or p.problem
    out = []

    def visit(node, path, lits, clauses):
        lits = lits + [normalize(node.literal, is_skolem)]
        if node.closure != EXT:
            return
        if path[1:]:  # non-root
            if kind == LITERALS:
                src, n = path_tokens(lits), len(lits)
            else:
                src, n = list(clauses), len(clauses)
            for chain in _chains(node, i):
                out.append(PathExample(kind, tuple(src), tuple(chain), p.problem,
                                       proof_id, path, n))
        below = clauses + [node.clause]
        for k, ch in enumerate(node.children):
            visit(ch, path + (k,), lits, below)

    for r_i, root in enumerate(p.roots):
        visit(root, (r_i,), [], [p.start_clause])
    return out


def extract_conjecturing_examples(p: ProofTree, proof_id: str | None = None,
                                  is_skolem: Callable[[str], bool] | None = None) -> list[PathExample]:
    _require_checked(p)
    proof_id = proof_id or p.problem
    out = []

    def visit(node, path, lits):
        lit = normalize(node.literal, is_skolem)
        if lits:
            out.append(PathExample(LITERALS, tuple(path_tokens(lits)), tuple(tokenize_literal(lit)),
                                   p.problem, proof_id, path, len(lits), "conjecture"))
        for k, ch in enumerate(node.children):
            visit(ch, path + (k,), lits + [lit])

    for r_i, root in enumerate(p.roots):
        visit(root, (r_i,), [])
    return out


# ---------------------------------------------------------------- vocabulary


class Vocabulary:
    """Token <-> id maps; reserved tokens occupy the first ids."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = list(RESERVED)
        self.ids: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        for t in tokens:
            self.add(t)

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]]) -> Vocabulary:
        """Vocabulary over all tokens in ``sequences``, sorted for determinism."""
        return cls(sorted({t for s in sequences for t in s} - set(RESERVED)))

    def add(self, token: str) -> int:
        if token not in self.ids:
            if not token or any(c.isspace() for c in token):
                raise ValueError(f"invalid token {token!r}")
            self.ids[token] = len(self.tokens)
            self.tokens.append(token)
        return self.ids[token]

    pad = property(lambda self: self.ids[PAD])
    bos = property(lambda self: self.ids[BOS])
    eos = property(lambda self: self.ids[EOS])
    unk = property(lambda self: self.ids[UNK])

    def encode(self, tokens: Sequence[str]) -> list[int]:
        unk = self.unk
        return [self.ids.get(t, unk) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.ids

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode()).hexdigest()[:16]

    def save(self, path):
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path) -> Vocabulary:
        tokens = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(tokens[:len(RESERVED)]) != RESERVED:
            raise ValueError(f"{path}: reserved tokens missing or reordered")
        return cls(tokens[len(RESERVED):])


# ---------------------------------------------------------------- splitting

DEFAULT_PROPORTIONS = (Fraction(6, 10), Fraction(1, 10), Fraction(3, 10))


@dataclass
class CorpusSplit:
    train: list
    valid: list
    test: list
    seed: int = 0
    proportions: tuple = DEFAULT_PROPORTIONS

    def part_of(self, proof_id) -> str:
        for name in ("train", "valid", "test"):
            if proof_id in self._sets[name]:
                return name
        raise KeyError(proof_id)

    def __post_init__(self):
        self._sets = {"train": set(self.train), "valid": set(self.valid), "test": set(self.test)}

    def sizes(self):
        return len(self.train), len(self.valid), len(self.test)


def split_by_proofs(proof_ids: Iterable[str], seed: int = 0,
                    proportions=DEFAULT_PROPORTIONS) -> CorpusSplit:
    """Shuffle proofs with ``seed`` and cut 0.6/0.1/0.3.

    Train and validation sizes are rounded down; the remainder goes to test.
    """
    props = tuple(Fraction(str(p)) if isinstance(p, float) else Fraction(p) for p in proportions)
    if len(props) != 3 or sum(props) != 1 or any(p < 0 for p in props):
        raise ValueError("proportions must be three non-negative numbers summing to 1")
    ids = sorted(set(proof_ids))
    random.Random(seed).shuffle(ids)
    n = len(ids)
    n_train = int(props[0] * n)
    n_valid = int(props[1] * n)
    return CorpusSplit(ids[:n_train], ids[n_train:n_train + n_valid], ids[n_train + n_valid:],
                       seed, props)


# ---------------------------------------------------------------- corpus files


class CorpusFormatError(ValueError):
    pass


def _paths(prefix):
    prefix = os.fspath(prefix)
    return prefix + ".src", prefix + ".tgt", prefix + ".meta"


def write_corpus(examples: Sequence[PathExample], prefix):
    """Write ``prefix.src``, ``prefix.tgt`` and the ``prefix.meta`` sidecar."""
    src, tgt, meta = _paths(prefix)
    with open(src, "w", encoding="utf-8", newline="\n") as fs, \
            open(tgt, "w", encoding="utf-8", newline="\n") as ft, \
            open(meta, "w", encoding="utf-8", newline="\n") as fm:
        for e in examples:
            fs.write(" ".join(e.source) + "\n")
            ft.write(" ".join(e.target) + "\n")
            fm.write(f"{e.problem}\t{e.proof}\t{e.node_str}\t{e.input_length}\t{e.source_kind}\t{e.task}\n")


def read_corpus(prefix) -> list[PathExample]:
    src, tgt, meta = _paths(prefix)
    for f in (src, tgt):
        if not os.path.exists(f):
            raise FileNotFoundError(f)
    with open(src, encoding="utf-8") as f:
        s_lines = f.read().splitlines()
    with open(tgt, encoding="utf-8") as f:
        t_lines = f.read().splitlines()
    if len(s_lines) != len(t_lines):
        raise CorpusFormatError(f"{src} has {len(s_lines)} lines but {tgt} has {len(t_lines)}")
    if os.path.exists(meta):
        with open(meta, encoding="utf-8") as f:
            m_lines = f.read().splitlines()
        if len(m_lines) != len(s_lines):
            raise CorpusFormatError(f"{meta} has {len(m_lines)} lines, expected {len(s_lines)}")
    else:
        m_lines = [None] * len(s_lines)
    out = []
    for n, (s, t, m) in enumerate(zip(s_lines, t_lines, m_lines), 1):
        target = tuple(t.split())
        if not target:
            raise CorpusFormatError(f"{tgt}:{n}: empty target")
        source = tuple(s.split())
        if m is None:
            out.append(PathExample(LITERALS, source, target, "", "", (), len(split_path(source))))
            continue
        fields = m.split("\t")
        if len(fields) != 6:
            raise CorpusFormatError(f"{meta}:{n}: expected 6 fields")
        try:
            node = tuple(int(x) for x in fields[2].split(".")) if fields[2] else ()
            length = int(fields[3])
        except ValueError:
            raise CorpusFormatError(f"{meta}:{n}: malformed line") from None
        out.append(PathExample(fields[4], source, target, fields[0], fields[1], node, length, fields[5]))
    return out


def sort_examples(examples: Iterable[PathExample]) -> list[PathExample]:
    """Deterministic corpus order: (problem, proof, node path, target)."""
    return sorted(examples, key=lambda e: (e.problem, e.proof, e.node, e.target))


@dataclass
class ExternalCorpusStats:
    proofs: int = 0
    pairs: dict = field(default_factory=dict)


def load_external_corpus(root) -> ExternalCorpusStats:
    """Count proofs and training pairs in a user-supplied corpus directory.

    Proofs are files ending in ``.proof`` (v1 format) or, failing that, lines
    of a ``proofs*`` listing; pairs are lines of ``*.src`` files grouped by
    whether their name mentions literals or clauses.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(root)
    stats = ExternalCorpusStats()
    proof_files = sorted(root.rglob("*.proof"))
    if proof_files:
        stats.proofs = len(proof_files)
    else:
        for f in sorted(root.rglob("proofs*")):
            if f.is_file():
                with open(f, encoding="utf-8", errors="replace") as fh:
                    stats.proofs += sum(1 for line in fh if line.strip())
    for f in sorted(root.rglob("*.src")):
        name = f.name.lower() + " " + f.parent.name.lower()
        kind = CLAUSES if ("cls" in name or "clause" in name) else LITERALS
        with open(f, encoding="utf-8", errors="replace") as fh:
            stats.pairs[kind] = stats.pairs.get(kind, 0) + sum(1 for _ in fh)
    return stats
