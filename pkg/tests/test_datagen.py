import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from tabguide.datagen import (
    CorpusFormatError, PathExample, RESERVED, SEP, Vocabulary, detokenize,
    extract_clause_choice_examples, extract_conjecturing_examples, load_external_corpus,
    path_tokens, read_corpus, split_by_proofs, split_path, tokenize_literal, write_corpus,
)
from tabguide.fol import normalize, parse_literal, skolem_detector
from tabguide.generate import generate_problems
from tabguide.tableau import ProofError, check_proof, dumps_proof, loads_proof, prove_all, record_expansions

from test_fol import literals


def toks(*lits):
    return tuple(path_tokens(parse_literal(l) for l in lits))


def test_fig1_literal_examples(fig1):
    _, p = fig1
    got = [(e.source, e.target) for e in extract_clause_choice_examples(p, "literals", 1)]
    assert got == [
        (toks("p(a)", "r(a,b)"), ("c6",)),
        (toks("p(a)", "r(a,b)", "q(b)"), ("c5",)),
        (toks("p(a)", "q(b)"), ("c3",)),
        (toks("p(a)", "q(b)", "s(b)"), ("c4",)),
    ]


def test_fig1_clause_examples(fig1):
    _, p = fig1
    got = [(e.source, e.target) for e in extract_clause_choice_examples(p, "clauses", 1)]
    assert got[0] == (("c1", "c2"), ("c6",))
    assert len(got) == 4


def test_fig1_two_step(fig1):
    _, p = fig1
    got = {e.source: e.target for e in extract_clause_choice_examples(p, "literals", 2)}
    assert got[toks("p(a)", "r(a,b)")] == ("c6", "c5")
    assert extract_clause_choice_examples(p, "literals", 3) == []


def test_fig1_conjecturing(fig1):
    _, p = fig1
    ex = extract_conjecturing_examples(p)
    assert (ex[0].source, ex[0].target) == (toks("p(a)"), tuple(tokenize_literal(parse_literal("r(a,b)"))))
    assert all(e.task == "conjecture" for e in ex)


def test_extraction_needs_checked_proof(fig1):
    _, p = fig1
    q = loads_proof(dumps_proof(p))
    with pytest.raises(ProofError):
        extract_clause_choice_examples(q)
    with pytest.raises(ProofError):
        extract_conjecturing_examples(q)


def test_single_node_branch_has_no_conjectures():
    from tabguide.fol import parse_tptp_cnf
    m = parse_tptp_cnf("cnf(a,axiom,p).\ncnf(b,axiom,~p).")
    (p,), _ = prove_all(m, max_proofs=1)
    ex = extract_conjecturing_examples(p)
    # only the connected leaf ~p follows a literal
    assert [e.source for e in ex] == [("p",)]


def test_example_counts_match_expansions():
    probs = generate_problems(25, seed=2)
    for m in probs:
        proofs, _ = prove_all(m, max_proofs=2)
        for p in proofs:
            non_root = [path for path, _ in record_expansions(p) if len(path) > 1]
            lits = extract_clause_choice_examples(p, "literals", 1)
            cls = extract_clause_choice_examples(p, "clauses", 1)
            assert len(lits) == len(cls) == len(non_root)
            assert [e.node for e in lits] == [e.node for e in cls]


def test_tokenize_examples():
    assert tokenize_literal(parse_literal("~r(a,b)")) == ["~", "r", "(", "a", ",", "b", ")"]
    assert detokenize(["k2_tarski", "(", "SKLM", ",", "SKLM", ")", "=", "k2_tarski", "(", "SKLM"]) is None
    lit = normalize(parse_literal("m1_subset_1(esk1_0,esk2_0)"), skolem_detector())
    assert detokenize(tokenize_literal(lit)) == lit


@given(literals)
def test_tokenize_roundtrip(lit):
    n = normalize(lit, skolem_detector())
    assert detokenize(tokenize_literal(n)) == n


@given(st.lists(literals, min_size=1, max_size=4))
def test_path_split_roundtrip(lits):
    lits = [normalize(l) for l in lits]
    parts = split_path(path_tokens(lits))
    assert [detokenize(p) for p in parts] == lits


@given(st.lists(st.sampled_from(["p", "(", ")", ",", "~", "=", "a", "VAR", "f"]), max_size=8))
def test_detokenize_never_raises(tokens):
    out = detokenize(tokens)
    if out is not None:
        assert tokenize_literal(out) == list(tokens)


def test_vocabulary(tmp_path):
    v = Vocabulary.build([["b", "a"], ["a", "c"]])
    assert tuple(v.tokens[:len(RESERVED)]) == RESERVED
    assert v.tokens[len(RESERVED):] == ["a", "b", "c"]
    assert v.decode(v.encode(["c", "a"])) == ["c", "a"]
    assert v.encode(["zzz"]) == [v.unk]
    v.save(tmp_path / "v")
    w = Vocabulary.load(tmp_path / "v")
    assert w == v and w.digest() == v.digest()
    (tmp_path / "bad").write_text("a\nb\n")
    with pytest.raises(ValueError):
        Vocabulary.load(tmp_path / "bad")


def test_split_sizes():
    assert split_by_proofs([str(i) for i in range(10)]).sizes() == (6, 1, 3)
    assert split_by_proofs([str(i) for i in range(13822)]).sizes() == (8293, 1382, 4147)


@given(st.integers(0, 300), st.integers(0, 5))
def test_split_partition_deterministic(n, seed):
    ids = [f"p{i}" for i in range(n)]
    a, b = split_by_proofs(ids, seed), split_by_proofs(ids, seed)
    assert (a.train, a.valid, a.test) == (b.train, b.valid, b.test)
    assert sorted(a.train + a.valid + a.test) == sorted(ids)
    assert a.sizes()[0] == (6 * n) // 10 and a.sizes()[1] == n // 10


def _example(i):
    return PathExample("literals", ("p", "(", "a", ")"), (f"c{i}",), "prob", f"prob.{i}", (0, i), 1)


def test_corpus_roundtrip(tmp_path, fig1):
    _, p = fig1
    ex = extract_clause_choice_examples(p, "literals", 1, proof_id="fig1.0")
    write_corpus(ex, tmp_path / "c")
    assert Counter(read_corpus(tmp_path / "c")) == Counter(ex)
    write_corpus([], tmp_path / "e")
    assert (tmp_path / "e.src").read_text() == "" and read_corpus(tmp_path / "e") == []


def test_corpus_misaligned(tmp_path):
    write_corpus([_example(1), _example(2)], tmp_path / "c")
    (tmp_path / "c.tgt").write_text("c1\n")
    with pytest.raises(CorpusFormatError):
        read_corpus(tmp_path / "c")


def test_corpus_bad_meta(tmp_path):
    write_corpus([_example(1)], tmp_path / "c")
    (tmp_path / "c.meta").write_text("x\ty\n")
    with pytest.raises(CorpusFormatError):
        read_corpus(tmp_path / "c")


def test_external_loader(tmp_path):
    for i in range(3):
        (tmp_path / f"{i}.proof").write_text("v1\n")
    (tmp_path / "train.lits.src").write_text("a\nb\n")
    (tmp_path / "train.cls.src").write_text("a\nb\n")
    st_ = load_external_corpus(tmp_path)
    assert st_.proofs == 3 and st_.pairs == {"clauses": 2, "literals": 2}
    with pytest.raises(FileNotFoundError):
        load_external_corpus(tmp_path / "missing")


def test_separator_reserved():
    assert SEP in RESERVED
