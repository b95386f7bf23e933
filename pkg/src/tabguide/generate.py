"""Problem generators and a brute-force satisfiability oracle.

The oracle works on propositional clause sets (lists of signed ints) and on
function-free first-order matrices after grounding over their constants. It
is deliberately independent of the tableau prover.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .fol import Clause, Fn, Literal, Matrix, Var, apply


def dpll(clauses: list[list[int]]) -> bool:
    """True iff the propositional clause set is satisfiable."""
    clauses = [list(dict.fromkeys(c)) for c in clauses]

    def solve(cls):
        while True:
            if any(not c for c in cls):
                return False
            if not cls:
                return True
            units = {c[0] for c in cls if len(c) == 1}
            if not units:
                break
            if any(-u in units for u in units):
                return False
            cls = _assign(cls, units)
        lit = cls[0][0]
        return solve(_assign(cls, {lit})) or solve(_assign(cls, {-lit}))

    return solve(clauses)


def _assign(cls, lits):
    # all of lits become true at once; callers guarantee consistency
    out = []
    for c in cls:
        if any(l in lits for l in c):
            continue
        out.append([l for l in c if -l not in lits])
    return out


def truth_table_satisfiable(clauses: list[list[int]]) -> bool:
    """Exhaustive check over all assignments; for tiny inputs only."""
    atoms = sorted({abs(l) for c in clauses for l in c})
    for bits in itertools.product((False, True), repeat=len(atoms)):
        val = dict(zip(atoms, bits))
        if all(any(val[abs(l)] == (l > 0) for l in c) for c in clauses):
            return True
    return False


def _constants(t, out):
    if isinstance(t, Fn):
        if not t.args:
            out.add(t)
        for a in t.args:
            _constants(a, out)


def ground(m: Matrix) -> list[list[int]]:
    """Herbrand-ground a function-free matrix into signed-int clauses."""
    consts = set()
    for c in m.clauses:
        for l in c.literals:
            for a in l.atom.args:
                if isinstance(a, Fn) and a.args:
                    raise ValueError("ground() supports function-free matrices only")
                _constants(a, consts)
    consts = sorted(consts, key=lambda t: t.name) or [Fn("c0")]
    atoms: dict[Fn, int] = {}
    out = []
    for c in m.clauses:
        vs = sorted({a for l in c.literals for a in l.atom.args if isinstance(a, Var)},
                    key=lambda v: (v.name, v.idx))
        for combo in itertools.product(consts, repeat=len(vs)):
            s = dict(zip(vs, combo))
            gc = []
            for l in c.literals:
                atom = apply(l.atom, s)
                k = atoms.setdefault(atom, len(atoms) + 1)
                gc.append(k if l.positive else -k)
            out.append(gc)
    return out


def is_satisfiable(m: Matrix) -> bool:
    return dpll(ground(m))


def random_propositional_matrix(rng: random.Random, max_clauses: int = 6, max_literals: int = 3,
                                atoms: str = "pqrs") -> Matrix:
    n = rng.randint(1, max_clauses)
    clauses = []
    for i in range(n):
        k = rng.randint(1, max_literals)
        lits = tuple(Literal(rng.random() < 0.5, Fn(rng.choice(atoms))) for _ in range(k))
        clauses.append(Clause(f"c{i + 1}", lits))
    return Matrix(tuple(clauses), name="rand")


# ---------------------------------------------------------------- Horn library problems


@dataclass
class Library:
    """A shared, named theory from which problems draw their axioms, so that
    clause names mean the same thing across problems."""

    clauses: list[Clause]
    constants: list[str]
    predicates: list[str]


def make_library(seed: int = 0, n_predicates: int = 14, n_relations: int = 2,
                 constants=("a", "b", "c", "d", "esk1_0", "esk2_0"),
                 rules_per_predicate=(1, 3), facts_per_predicate=(1, 3),
                 witness_share: float = 0.25, facts_per_relation: int = 4) -> Library:
    """Random layered Horn theory.

    ``witness_share`` is the fraction of rules of the form
    h(X) <- e(X,Y), b(Y); in proofs of such rules the instance of b(Y) is
    fixed by the fact chosen for the sibling e(X,Y), so later clause choices
    depend on information absent from the path above them.
    """
    rng = random.Random(seed)
    single = 0.4 * (1.0 - witness_share) / 0.75
    preds = [f"p{i}" for i in range(n_predicates)]
    rels = [f"e{i}" for i in range(n_relations)]
    X, Y = Var("X"), Var("Y")
    clauses = []
    # Rules point to later predicates only, so forward chaining terminates and
    # the polarity-flipped proofs grow downward from the goal.
    for i, h in enumerate(preds):
        later = preds[i + 1:]
        if len(later) >= 1:
            for _ in range(rng.randint(*rules_per_predicate)):
                shape = rng.random()
                if shape < single or len(later) < 2:
                    body = [Literal(True, Fn(rng.choice(later), (X,)))]
                elif shape < 1.0 - witness_share:
                    b1, b2 = rng.sample(later, 2)
                    body = [Literal(True, Fn(b1, (X,))), Literal(True, Fn(b2, (X,)))]
                else:
                    body = [Literal(True, Fn(rng.choice(rels), (X, Y))),
                            Literal(True, Fn(rng.choice(later), (Y,)))]
                lits = (Literal(True, Fn(h, (X,))),) + tuple(Literal(False, b.atom) for b in body)
                clauses.append(Clause("", lits))
        if i >= n_predicates // 3:
            for c in rng.sample(constants, rng.randint(*facts_per_predicate)):
                clauses.append(Clause("", (Literal(True, Fn(h, (Fn(c),))),)))
    for r in rels:
        for _ in range(facts_per_relation):
            a, b = rng.sample(constants, 2)
            clauses.append(Clause("", (Literal(True, Fn(r, (Fn(a), Fn(b)))),)))
    # dedupe, then give stable library names
    uniq = list(dict.fromkeys(c.literals for c in clauses))
    named = [Clause(f"ax{k:03d}", lits) for k, lits in enumerate(uniq)]
    return Library(named, list(constants), preds)


# Named library settings. "small" keeps proofs short and quick to find;
# "large" has a wider signature and more witness rules, so several proof
# steps ahead are less predictable from the current path.
LIBRARY_PRESETS = {
    "small": {},
    "large": dict(n_predicates=30, n_relations=3,
                  constants=("a", "b", "c", "d", "e", "f", "g", "h", "esk1_0", "esk2_0", "esk3_0"),
                  witness_share=0.5, facts_per_relation=8),
}


def preset_library(name: str = "small", seed: int = 0) -> Library:
    if name not in LIBRARY_PRESETS:
        raise ValueError(f"unknown library preset {name!r}; choose from {sorted(LIBRARY_PRESETS)}")
    return make_library(seed, **LIBRARY_PRESETS[name])


def _derivable(clauses: list[Clause], constants: list[str]) -> dict[Fn, int]:
    """Least Herbrand model of definite clauses with derivation heights.

    Bodies are matched against known facts by predicate, so the cost follows
    the model size rather than the number of constant tuples. Range-restricted
    clauses are assumed, which holds for library theories.
    """
    facts: dict[Fn, int] = {}
    by_pred: dict[str, list[Fn]] = {}

    def matches(body, s, i):
        if i == len(body):
            yield s
            return
        pat = body[i].atom
        for f in by_pred.get(pat.name, ()):
            s2 = dict(s)
            ok = True
            for a, b in zip(pat.args, f.args):
                if isinstance(a, Var):
                    if s2.setdefault(a, b) != b:
                        ok = False
                        break
                elif a != b:
                    ok = False
                    break
            if ok:
                yield from matches(body, s2, i + 1)

    changed = True
    while changed:
        changed = False
        for c in clauses:
            head, body = c.literals[0], c.literals[1:]
            for s in list(matches(body, {}, 0)):
                atom = apply(head.atom, s)
                h = 1 + max((facts[apply(l.atom, s)] for l in body), default=0)
                if atom not in facts:
                    by_pred.setdefault(atom.name, []).append(atom)
                if atom not in facts or facts[atom] > h:
                    facts[atom] = h
                    changed = True
    return facts


def _flip(c: Clause) -> Clause:
    return Clause(c.name, tuple(Literal(not l.positive, l.atom) for l in c.literals), c.role)


def generate_problem(lib: Library, rng: random.Random, name: str, keep: float = 0.6,
                     min_height: int = 3, max_height: int = 6) -> Matrix | None:
    """One unsatisfiable problem: a random subset of the library plus a
    derivable goal, with all polarities flipped so the goal is the only
    all-positive clause. Returns None when no suitable goal exists."""
    subset = [c for c in lib.clauses if rng.random() < keep]
    heights = _derivable(subset, lib.constants)
    goals = sorted((a for a, h in heights.items() if min_height <= h <= max_height
                    and a.name.startswith("p")), key=str)
    if not goals:
        return None
    goal = rng.choice(goals)
    clauses = [Clause("goal", (Literal(True, goal),), "negated_conjecture")]
    clauses += [_flip(c) for c in subset]
    return Matrix(tuple(clauses), name=name)


def generate_problems(n: int, seed: int = 0, library: Library | str | None = None,
                      **kw) -> list[Matrix]:
    """``n`` distinct unsatisfiable problems, each confirmed by the oracle.
    ``library`` is a Library, a preset name, or None for the small preset."""
    if library is None or isinstance(library, str):
        lib = preset_library(library or "small", seed)
    else:
        lib = library
    rng = random.Random(seed + 1)
    out, seen = [], set()
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 100 * n + 100:
            raise RuntimeError("generator could not produce enough problems")
        m = generate_problem(lib, rng, f"gen{len(out):04d}", **kw)
        if m is None:
            continue
        key = tuple(c.name for c in m.clauses) + (str(m.clauses[0]),)
        if key in seen:
            continue
        if is_satisfiable(m):
            raise AssertionError(f"generated problem {m.name} is satisfiable")
        seen.add(key)
        out.append(m)
    return out
