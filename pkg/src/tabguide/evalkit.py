"""Prediction scoring.

A prediction for a path succeeds when the set of decoded clause sequences
meets the set of continuations of that path observed in the proofs.
"""

from __future__ import annotations

import csv
import enum
import io
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .datagen import PathExample, detokenize, extract_clause_choice_examples
from .fol import Literal
from .tableau import ProofTree


class ReferenceIndex(dict):
    """(kind, source tokens, i) -> set of i-long clause sequences."""

    def continuations(self, kind: str, source: Sequence[str], i: int) -> set:
        return self.get((kind, tuple(source), i), set())


def build_reference_index(proofs: Iterable[ProofTree], kind: str, i: int,
                          is_skolem=None) -> ReferenceIndex:
    index = ReferenceIndex()
    for p in proofs:
        for e in extract_clause_choice_examples(p, kind, i, is_skolem=is_skolem):
            index.setdefault((kind, e.source, i), set()).add(e.target)
    return index


def index_from_examples(examples: Iterable[PathExample]) -> ReferenceIndex:
    """Reference index from already extracted examples (e.g. a corpus file)."""
    index = ReferenceIndex()
    for e in examples:
        index.setdefault((e.source_kind, e.source, len(e.target)), set()).add(e.target)
    return index


@dataclass
class PredictionRecord:
    example: PathExample
    decoded: list          # [(token tuple, score)], best first
    references: frozenset  # set of token tuples
    k: int = 0
    success: bool = field(init=False)

    def __post_init__(self):
        if not self.k:
            self.k = len(self.decoded)
        self.decoded = list(self.decoded)[:self.k]
        self.references = frozenset(tuple(r) for r in self.references)
        self.success = any(tuple(seq) in self.references for seq, _ in self.decoded)

    @property
    def input_length(self):
        return self.example.input_length

    @property
    def i(self):
        return len(self.example.target)

    def at(self, k: int) -> PredictionRecord:
        """The same prediction restricted to the top ``k`` decoded sequences."""
        return PredictionRecord(self.example, self.decoded[:k], self.references, k)


@dataclass
class AccuracyReport:
    accuracy: Fraction
    n: int
    by_length: dict   # input_length -> (Fraction, n)
    by_i: dict        # i -> (Fraction, n)

    def rounded(self, digits: int = 2) -> float:
        return round(float(self.accuracy), digits)


def _ratio(hits, n):
    return Fraction(hits, n)


def predictive_accuracy(records: Sequence[PredictionRecord]) -> AccuracyReport:
    if not records:
        raise ValueError("no prediction records")
    hits = sum(r.success for r in records)
    by_len, by_i = defaultdict(lambda: [0, 0]), defaultdict(lambda: [0, 0])
    for r in records:
        for table, key in ((by_len, r.input_length), (by_i, r.i)):
            table[key][0] += r.success
            table[key][1] += 1
    return AccuracyReport(
        _ratio(hits, len(records)), len(records),
        {k: (_ratio(h, n), n) for k, (h, n) in sorted(by_len.items())},
        {k: (_ratio(h, n), n) for k, (h, n) in sorted(by_i.items())},
    )


class Verdict(str, enum.Enum):
    EXACT = "exact-match"
    MISMATCH = "well-formed-mismatch"
    MALFORMED = "malformed"


def classify_conjecture(tokens: Sequence[str] | str, gold: Literal | Sequence[str]) -> Verdict:
    """Table-style verdict for a conjectured literal.

    Plain strings are split into tokens first, so literals can be given in
    their printed form.
    """
    toks = tokenize_text(tokens) if isinstance(tokens, str) else list(tokens)
    if not isinstance(gold, Literal):
        gold_toks = tokenize_text(gold) if isinstance(gold, str) else list(gold)
        gold = detokenize(gold_toks)
        if gold is None:
            raise ValueError("gold literal is malformed")
    lit = detokenize(toks)
    if lit is None:
        return Verdict.MALFORMED
    return Verdict.EXACT if lit == gold else Verdict.MISMATCH


def tokenize_text(text: str) -> list[str]:
    """Split printed literal text into literal tokens."""
    out, cur = [], ""
    i = 0
    while i < len(text):
        ch = text[i]
        if text.startswith("!=", i):
            if cur:
                out.append(cur)
                cur = ""
            out = ["~"] + out if out[:1] != ["~"] else out[1:]
            out.append("=")
            i += 2
            continue
        if ch in "(),=~":
            if cur:
                out.append(cur)
                cur = ""
            out.append(ch)
        elif ch.isspace():
            if cur:
                out.append(cur)
                cur = ""
        else:
            cur += ch
        i += 1
    if cur:
        out.append(cur)
    return out


# ---------------------------------------------------------------- reports


def _fmt(x: Fraction) -> str:
    return f"{float(x):.4f}"


def accuracy_by_config(groups: dict) -> list[tuple]:
    """Rows (kind, k, i, accuracy, n) from {(kind, k, i): records}."""
    rows = []
    for (kind, k, i), recs in sorted(groups.items()):
        if not recs:
            continue
        rep = predictive_accuracy(recs)
        rows.append((kind, k, i, rep.accuracy, rep.n))
    return rows


def accuracy_by_length(groups: dict) -> list[tuple]:
    """Rows (kind, length, accuracy, n) from {kind: records}; empty buckets omitted."""
    rows = []
    for kind, recs in sorted(groups.items()):
        if not recs:
            continue
        for length, (acc, n) in predictive_accuracy(recs).by_length.items():
            rows.append((kind, length, acc, n))
    return rows


def conjecture_validity(verdicts: Iterable[Verdict]) -> list[tuple]:
    counts = {v: 0 for v in Verdict}
    for v in verdicts:
        counts[Verdict(v)] += 1
    total = sum(counts.values())
    return [(v.value, c, Fraction(c, total) if total else Fraction(0)) for v, c in counts.items()
            if total]


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) if isinstance(x, Fraction) else x for x in r])
    return buf.getvalue()


CONFIG_HEADER = ("kind", "k", "i", "accuracy", "n")
LENGTH_HEADER = ("kind", "length", "accuracy", "n")
VALIDITY_HEADER = ("verdict", "count", "share")


def report(config_groups: dict | None = None, length_groups: dict | None = None,
           verdicts: Iterable[Verdict] = (), fmt: str = "csv") -> dict[str, str]:
    """Render the three tables as CSV (``fmt='csv'``) or aligned text."""
    tables = {
        "accuracy_by_config.csv": (CONFIG_HEADER, accuracy_by_config(config_groups or {})),
        "accuracy_by_length.csv": (LENGTH_HEADER, accuracy_by_length(length_groups or {})),
        "conjecture_validity.csv": (VALIDITY_HEADER, conjecture_validity(verdicts)),
    }
    if fmt == "csv":
        return {name: to_csv(h, rows) for name, (h, rows) in tables.items()}
    if fmt == "text":
        return {name.replace(".csv", ".txt"): _text_table(h, rows) for name, (h, rows) in tables.items()}
    raise ValueError(f"unknown format {fmt!r}")


def _text_table(header, rows) -> str:
    cells = [list(map(str, header))] + [[_fmt(x) if isinstance(x, Fraction) else str(x) for x in r]
                                        for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    return "".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) + "\n" for r in cells)


def step_grid(config_groups: dict, ks=None, kinds=("literals", "clauses"), steps=(1, 2, 3)) -> str:
    """Rows i = 1..3, columns (kind, k) as aligned text; ``ks`` defaults to those present."""
    acc = {(kind, k, i): a for kind, k, i, a, _ in accuracy_by_config(config_groups)}
    if ks is None:
        ks = sorted({k for _, k, _ in acc}) or [1]
    header = ["i"] + [f"{kind[:3]}@{k}" for kind in kinds for k in ks]
    rows = []
    for i in steps:
        row = [str(i)]
        for kind in kinds:
            for k in ks:
                a = acc.get((kind, k, i))
                row.append("-" if a is None else f"{float(a):.2f}")
        rows.append(row)
    widths = [max(len(r[j]) for r in [header] + rows) for j in range(len(header))]
    return "".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) + "\n" for r in [header] + rows)


def parse_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
