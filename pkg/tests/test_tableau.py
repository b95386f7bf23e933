import copy
import random

import pytest
from hypothesis import given, settings, strategies as st

from tabguide.fol import parse_literal, parse_tptp_cnf
from tabguide.generate import is_satisfiable, random_propositional_matrix
from tabguide.tableau import (
    CONN, EXT, OPEN, RED, ClauseOrdering, InvariantViolation, ProofError, SearchLimits,
    candidate_extensions, check_proof, dumps_proof, loads_proof, prove, prove_all,
    record_expansions, start_clauses,
)

from conftest import FIG1_TREE, bundled, fig1_matrix


def test_fig1_solved_and_checked():
    m = fig1_matrix()
    p, stats = prove(m)
    assert p is not None and stats.status == "proved" and stats.depth == 3
    assert check_proof(m, p)
    assert p.start_clause == "c1"


def test_fig1_reference_expansions(fig1):
    _, p = fig1
    exp = record_expansions(p)
    assert [c for _, c in exp] == FIG1_TREE
    # the node R(a,b) below the root is expanded by c6
    rab = p.node((0, 0))
    assert str(rab.literal.atom.args) and rab.clause == "c6"


def test_record_expansions_requires_check(fig1):
    m, p = fig1
    q = loads_proof(dumps_proof(p))
    with pytest.raises(ProofError):
        record_expansions(q)
    assert check_proof(m, q)
    assert record_expansions(q) == record_expansions(p)


def test_proof_text_roundtrip(fig1):
    _, p = fig1
    text = dumps_proof(p)
    assert dumps_proof(loads_proof(text)) == text
    assert text.startswith("v1\nproof fig1 c1\n0 p(a) ext c2 1\n")


def test_satisfiable_bundled_problem_unsolved():
    m = parse_tptp_cnf(bundled("sat1.p"), "sat1")
    p, stats = prove(m)
    assert p is None and stats.status == "no_proof"


def test_depth_exhausted_status():
    # p(a) and ~p(X) | p(f(X)) never closes: the path grows forever
    m = parse_tptp_cnf("cnf(a,axiom,p(a)).\ncnf(b,axiom,~p(X) | p(f(X))).")
    p, stats = prove(m, SearchLimits(max_depth=5))
    assert p is None and stats.status == "depth_exhausted"


def test_budget_exhausted_status():
    m = parse_tptp_cnf("cnf(a,axiom,p(a)).\ncnf(b,axiom,~p(X) | p(f(X))).")
    p, stats = prove(m, SearchLimits(max_depth=50, node_budget=20))
    assert p is None and stats.status == "budget_exhausted"


def test_reduction_step_used():
    # p | q, ~p | q, p | ~q, ~p | ~q needs a reduction
    m = parse_tptp_cnf("cnf(a,axiom,p | q).\ncnf(b,axiom,~p | q).\ncnf(c,axiom,p | ~q).\n"
                       "cnf(d,axiom,~p | ~q).")
    p, _ = prove(m)
    assert p is not None
    assert any(n.closure == RED for _, _, n in p.nodes())


def test_regularity_never_repeats_a_literal_on_a_path():
    rng = random.Random(3)
    for _ in range(100):
        m = random_propositional_matrix(rng)
        p, _ = prove(m)
        if p is None:
            continue
        for r in p.roots:
            stack = [(r, [])]
            while stack:
                n, path = stack.pop()
                assert n.literal not in path or n.closure == CONN
                for ch in n.children:
                    stack.append((ch, path + [n.literal]))


def test_start_clauses_prefer_positive():
    m = fig1_matrix()
    assert [c.name for c in start_clauses(m)] == ["c1"]
    m2 = parse_tptp_cnf("cnf(a,axiom,~p | q).\ncnf(b,axiom,p | ~q).")
    assert [c.name for c in start_clauses(m2)] == ["a", "b"]


def test_candidate_extensions():
    m = fig1_matrix()
    cands = candidate_extensions(parse_literal("q(b)"), m)
    assert [(c, i) for c, i, _ in cands] == [("c3", 1), ("c4", 1), ("c5", 0)]


def test_orderings_agree_on_solvability():
    m = fig1_matrix()
    for ordering in (ClauseOrdering("random", seed=s) for s in range(5)):
        p, _ = prove(m, ordering=ordering)
        assert p is not None and check_proof(m, p)


def test_guided_scorer_failure_falls_back():
    def broken(path, names):
        raise RuntimeError("boom")

    m = fig1_matrix()
    p, stats = prove(m, ordering=ClauseOrdering("guided", scorer=broken))
    assert p is not None and stats.guided_failures > 0
    assert p.expansions() == prove(m)[0].expansions()


def test_guided_scorer_changes_order():
    def prefer_c6(path, names):
        return {n: (1.0 if n == "c6" else 0.0) for n in names}

    p, _ = prove(fig1_matrix(), ordering=ClauseOrdering("guided", scorer=prefer_c6))
    assert p.expansions()[:2] == ["c2", "c6"]


def test_prove_all_distinct():
    proofs, _ = prove_all(fig1_matrix(), SearchLimits(max_depth=3), max_proofs=10)
    texts = [dumps_proof(p) for p in proofs]
    assert len(texts) == len(set(texts)) == 4


# ---------------------------------------------------------------- checker rejects


def _mutated(fig1, fn):
    m, p = fig1
    q = copy.deepcopy(p)
    q.verified = False
    fn(q)
    return check_proof(m, q)


def test_checker_rejects_wrong_clause(fig1):
    def f(q):
        q.node((0, 0)).clause = "c5"
    assert _mutated(fig1, f).condition in ("a", "b")


def test_checker_rejects_unknown_start(fig1):
    def f(q):
        q.start_clause = "c9"
    assert _mutated(fig1, f).condition == "a"


def test_checker_rejects_non_complementary_connection(fig1):
    def f(q):
        q.node((0,)).lit_idx = 0
    assert _mutated(fig1, f).condition == "b"


def test_checker_rejects_bad_reduction(fig1):
    def f(q):
        n = q.node((0, 0, 1))
        n.closure, n.children, n.ancestor = RED, [], 0
    assert _mutated(fig1, f).condition == "c"


def test_checker_rejects_open_leaf(fig1):
    def f(q):
        n = q.node((0, 2, 0))
        n.closure, n.children = OPEN, []
    assert _mutated(fig1, f).condition == "d"


def test_loads_rejects_garbage():
    with pytest.raises(ValueError):
        loads_proof("v2\n")
    with pytest.raises(ValueError):
        loads_proof("v1\nproof x c1\n2 p(a)\n")


# ---------------------------------------------------------------- oracle property


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prover_agrees_with_oracle(seed):
    m = random_propositional_matrix(random.Random(seed))
    p, stats = prove(m, SearchLimits(max_depth=12))
    assert (p is not None) == (not is_satisfiable(m))
    if p is not None:
        assert check_proof(m, p)
    else:
        assert stats.status == "no_proof"


def test_statistics_deterministic():
    m = fig1_matrix()
    a, b = prove(m)[1], prove(m)[1]
    assert (a.status, a.depth, a.inferences) == (b.status, b.depth, b.inferences)


def test_invariant_violation_type():
    assert issubclass(InvariantViolation, RuntimeError)


def test_closure_constants_distinct():
    assert len({EXT, RED, CONN, OPEN}) == 4
