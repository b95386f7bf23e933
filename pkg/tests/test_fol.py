import pytest
from hypothesis import given, settings, strategies as st

from tabguide.fol import (
    SKLM, VAR, ArityError, Clause, Fn, Literal, ParseError, Var, apply, apply_literal,
    compose, fresh_variables, normalize, occurs, parse_literal, parse_term, parse_tptp_cnf,
    print_clause, print_literal, print_matrix, print_term, rename_apart, skolem_detector, unify,
)

from conftest import fig1_matrix

# ---------------------------------------------------------------- strategies

FUNCS = {"f": 1, "g": 2, "a": 0, "b": 0, "esk1_0": 0, "esk2_1": 1}
VARS = ["X", "Y", "Z", "W"]


def terms(depth=3):
    leaf = st.one_of(st.sampled_from(VARS).map(Var),
                     st.sampled_from([n for n, k in FUNCS.items() if k == 0]).map(Fn))
    if depth == 0:
        return leaf
    sub = terms(depth - 1)
    return st.one_of(leaf, sub.map(lambda t: Fn("f", (t,))), sub.map(lambda t: Fn("esk2_1", (t,))),
                     st.tuples(sub, sub).map(lambda ts: Fn("g", ts)))


atoms = st.one_of(terms(2).map(lambda t: Fn("p", (t,))),
                  st.tuples(terms(2), terms(2)).map(lambda ts: Fn("r", ts)),
                  st.tuples(terms(2), terms(2)).map(lambda ts: Fn("=", ts)))
literals = st.builds(Literal, st.booleans(), atoms)


def variant(a, b):
    """a and b are equal up to a bijective variable renaming."""
    m = {}

    def go(x, y):
        if isinstance(x, Var) and isinstance(y, Var):
            return m.setdefault(x, y) == y
        if isinstance(x, Fn) and isinstance(y, Fn):
            return x.name == y.name and len(x.args) == len(y.args) and all(map(go, x.args, y.args))
        return False

    return go(a, b) and len(set(m.values())) == len(m)

# ---------------------------------------------------------------- parsing


def test_parse_single_clause():
    m = parse_tptp_cnf("cnf(c1,axiom,p(X)).")
    assert [c.name for c in m.clauses] == ["c1"]
    assert m["c1"].literals == (Literal(True, Fn("p", (Var("X"),))),)


def test_parse_fig1_c2():
    c2 = fig1_matrix()["c2"]
    assert [(l.positive, print_term(l.atom)) for l in c2.literals] == [
        (True, "r(X,Y)"), (False, "p(X)"), (True, "q(Y)")]
    assert len(fig1_matrix()) == 6


def test_parse_missing_terminator():
    with pytest.raises(ParseError) as e:
        parse_tptp_cnf("cnf(bad,axiom,p(X)")
    assert e.value.line == 1


def test_parse_error_position():
    with pytest.raises(ParseError) as e:
        parse_tptp_cnf("cnf(a,axiom,p(X)).\ncnf(b,axiom, p(X) | $ ).")
    assert (e.value.line, e.value.col) == (2, 21)


def test_arity_clash():
    with pytest.raises(ArityError):
        parse_tptp_cnf("cnf(a,axiom,p(X)).\ncnf(b,axiom,p(X,Y)).")


def test_comments_parens_equality():
    m = parse_tptp_cnf("% c\n/* block\n */ cnf(a, negated_conjecture, (f(X) != b | X = a), file(x)).")
    a, b = m["a"].literals
    assert not a.positive and a.is_equality and print_literal(a) == "f(X) != b"
    assert b.positive and print_literal(b) == "X = a"
    assert m["a"].role == "negated_conjecture"


def test_duplicate_names_rejected():
    with pytest.raises(ParseError):
        parse_tptp_cnf("cnf(a,axiom,p).\ncnf(a,axiom,q).")


def test_print_examples():
    assert print_clause(Clause("c", (Literal(True, Fn("p", (Var("X"),))),))) == "p(X)"
    assert print_literal(parse_literal("~r(a,b)")) == "~r(a,b)"
    assert print_literal(parse_literal("SKLM = SKLM")) == "SKLM = SKLM"


@given(literals)
def test_literal_print_parse_roundtrip(lit):
    back = parse_literal(print_literal(lit))
    assert back.positive == lit.positive and variant(back.atom, lit.atom)


def test_matrix_roundtrip():
    m = fig1_matrix()
    again = parse_tptp_cnf(print_matrix(m), "fig1")
    assert print_matrix(again) == print_matrix(m)
    assert [c.literals for c in again.clauses] == [c.literals for c in m.clauses]

# ---------------------------------------------------------------- unification


def test_unify_examples():
    s = unify(parse_term("p(X,b)"), parse_term("p(a,Y)"))
    assert s == {Var("X"): Fn("a"), Var("Y"): Fn("b")}
    assert unify(parse_term("p(X)"), parse_term("p(f(X))")) is None
    assert unify(parse_term("p(X)"), parse_term("p(f(X))"), occurs_check=False) is not None
    assert unify(parse_term("p(a)"), parse_term("q(a)")) is None


@settings(max_examples=300)
@given(atoms, atoms)
def test_unifier_unifies_and_is_idempotent(a, b):
    s = unify(a, b)
    if s is None:
        return
    assert apply(a, s) == apply(b, s)
    assert all(v != t for v, t in s.items())
    for t in (a, b):
        once = apply(t, s)
        assert apply(once, s) == once


@settings(max_examples=200)
@given(atoms, atoms, st.dictionaries(st.sampled_from(VARS).map(Var), terms(1), max_size=2))
def test_unifier_is_most_general(a, b, theta):
    # any unifier theta factors through the mgu: theta(s(x)) == theta(x)
    if any(occurs(v, t) for v, t in theta.items()):
        return
    if apply(a, theta) != apply(b, theta):
        return
    s = unify(a, b)
    assert s is not None
    for v in set(s):
        assert apply(apply(s[v], theta), theta) == apply(apply(v, theta), theta)


def _one_pass(t, s):
    if isinstance(t, Var):
        return s.get(t, t)
    return Fn(t.name, tuple(_one_pass(a, s) for a in t.args))


def _idempotent(s):
    return not any(v in s for t in s.values() for v in _vars(t))


@given(st.dictionaries(st.sampled_from(VARS).map(Var), terms(1), max_size=2),
       st.dictionaries(st.sampled_from(VARS).map(Var), terms(1), max_size=2), terms(2))
def test_compose(s1, s2, t):
    if not (_idempotent(s1) and _idempotent(s2)):
        return
    c = compose(s1, s2)
    assert _one_pass(t, c) == _one_pass(_one_pass(t, s1), s2)
    assert all(v != x for v, x in c.items())


def test_rename_apart_fresh():
    fresh = fresh_variables()
    c = fig1_matrix()["c2"]
    r1, r2 = rename_apart(c, fresh), rename_apart(c, fresh)
    vars1 = {v for l in r1.literals for v in _vars(l.atom)}
    vars2 = {v for l in r2.literals for v in _vars(l.atom)}
    assert vars1.isdisjoint(vars2)
    assert all(variant(x.atom, y.atom) for x, y in zip(r1.literals, c.literals))


def _vars(t):
    if isinstance(t, Var):
        yield t
    else:
        for a in t.args:
            yield from _vars(a)

# ---------------------------------------------------------------- normalization


def test_normalize_examples():
    det = skolem_detector(["esk"])
    assert normalize(parse_literal("p(X,esk3_1(X))"), det) == Literal(True, Fn("p", (VAR, SKLM)))
    lit = parse_literal("m1_subset_1(esk1_0,k1_zfmisc_1(esk1_0))")
    assert print_literal(normalize(lit, det)) == "m1_subset_1(SKLM,k1_zfmisc_1(SKLM))"


@given(literals)
def test_normalize_idempotent_and_ground(lit):
    det = skolem_detector()
    n = normalize(lit, det)
    assert normalize(n, det) == n
    assert not list(_vars(n.atom))
    assert n.positive == lit.positive and n.atom.name == lit.atom.name


def test_apply_literal_keeps_polarity():
    lit = parse_literal("~p(X)")
    out = apply_literal(lit, {Var("X"): Fn("a")})
    assert print_literal(out) == "~p(a)"


def test_literal_requires_atom():
    with pytest.raises(TypeError):
        Literal(True, Var("X"))
