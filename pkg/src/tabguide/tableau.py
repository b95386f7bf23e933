"""Connection tableau prover in the leanCoP style.

Start, extension and reduction steps with iterative deepening on path length
and chronological backtracking. Proofs are recorded as trees, checked by an
independent checker and serialized in a small line-oriented format.
"""

from __future__ import annotations

import logging
import random
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .fol import (
    Clause, Fn, Literal, Matrix, Var, apply, fresh_variables, parse_literal,
    print_literal, rename_apart, unify, unify_into,
)

log = logging.getLogger(__name__)

EXT, RED, CONN, OPEN = "ext", "red", "conn", "open"


class ProofError(Exception):
    """Raised when a proof is used before it has been accepted by the checker."""


class InvariantViolation(RuntimeError):
    pass


@dataclass
class TableauNode:
    """A tableau node.

    ``closure`` is ``ext`` (expanded by ``clause``, connecting through its
    literal ``lit_idx``), ``red`` (closed against the ancestor at depth
    ``ancestor``, roots being depth 0), ``conn`` (the connected literal of the
    parent's clause instance) or ``open``.
    """

    literal: Literal
    closure: str = OPEN
    clause: str | None = None
    lit_idx: int | None = None
    ancestor: int | None = None
    children: list = field(default_factory=list)

    def walk(self, path=(), depth=0):
        """Depth-first preorder over ``(path, depth, node)``."""
        yield path, depth, self
        for i, ch in enumerate(self.children):
            yield from ch.walk(path + (i,), depth + 1)


@dataclass
class ProofTree:
    problem: str
    start_clause: str
    roots: list
    verified: bool = field(default=False, compare=False)

    def nodes(self):
        for i, r in enumerate(self.roots):
            yield from r.walk((i,), 0)

    def node(self, path: Sequence[int]) -> TableauNode:
        n = self.roots[path[0]]
        for i in path[1:]:
            n = n.children[i]
        return n

    def expansions(self) -> list[str]:
        return [n.clause for _, _, n in self.nodes() if n.closure == EXT]


@dataclass
class SearchLimits:
    max_depth: int = 12
    start_depth: int = 1
    depth_step: int = 1
    node_budget: int = 1_000_000
    time_budget: float = 60.0

    def __post_init__(self):
        for name in ("max_depth", "start_depth", "depth_step", "node_budget"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.time_budget <= 0:
            raise ValueError("time_budget must be positive")


# Guided scorers map (normalized path incl. goal, candidate clause names) to scores.
Scorer = Callable[[Sequence[Literal], Sequence[str]], dict]


@dataclass
class ClauseOrdering:
    """Order in which extension candidates are tried at each choice point."""

    strategy: str = "input"
    seed: int = 0
    scorer: Scorer | None = None

    def __post_init__(self):
        if self.strategy not in ("input", "random", "guided"):
            raise ValueError(f"unknown ordering {self.strategy!r}")
        if self.strategy == "guided" and self.scorer is None:
            raise ValueError("guided ordering needs a scorer")


@dataclass
class SearchStats:
    status: str = "unknown"  # proved | no_proof | depth_exhausted | budget_exhausted | timeout
    depth: int = 0
    inferences: int = 0
    seconds: float = 0.0
    guided_failures: int = 0


class _Stop(Exception):
    def __init__(self, status):
        self.status = status


def candidate_extensions(goal: Literal, m: Matrix, subst: dict | None = None,
                         occurs_check: bool = True) -> list[tuple[str, int, dict]]:
    """All (clause, literal index, extended substitution) connecting to ``goal``.

    Clauses are renamed apart before unification.
    """
    out = []
    fresh = fresh_variables()
    for c in m.clauses:
        for j, lit in enumerate(c.literals):
            if lit.positive == goal.positive or lit.atom.name != goal.atom.name:
                continue
            inst = rename_apart(c, fresh)
            s = unify(goal.atom, inst.literals[j].atom, subst, occurs_check)
            if s is not None:
                out.append((c.name, j, s))
    return out


def start_clauses(m: Matrix) -> list[Clause]:
    pos = [c for c in m.clauses if all(l.positive for l in c.literals)]
    return pos or list(m.clauses)


class Prover:
    """Depth-first connection tableau search over one matrix."""

    def __init__(self, matrix: Matrix, limits: SearchLimits | None = None,
                 ordering: ClauseOrdering | None = None, regularity: bool = True,
                 occurs_check: bool = True):
        self.matrix = matrix
        self.limits = limits or SearchLimits()
        self.ordering = ordering or ClauseOrdering()
        self.regularity = regularity
        self.occurs_check = occurs_check
        self.stats = SearchStats()
        self._index: dict[tuple, list[tuple[Clause, int]]] = {}
        for c in matrix.clauses:
            for j, lit in enumerate(c.literals):
                key = (lit.positive, lit.atom.name, len(lit.atom.args))
                self._index.setdefault(key, []).append((c, j))

    # -- search state helpers

    def _undo(self, mark):
        trail, subst = self._trail, self._subst
        while len(trail) > mark:
            del subst[trail.pop()]

    def _resolved(self, lit: Literal) -> Literal:
        return Literal(lit.positive, apply(lit.atom, self._subst))

    def _tick(self):
        st = self.stats
        st.inferences += 1
        if st.inferences > self.limits.node_budget:
            raise _Stop("budget_exhausted")
        if st.inferences % 512 == 0 and time.perf_counter() > self._deadline:
            raise _Stop("timeout")

    def _order(self, cands, goal, path):
        strategy = self.ordering.strategy
        if strategy == "random":
            cands = list(cands)
            self._rng.shuffle(cands)
        elif strategy == "guided" and len(cands) > 1:
            try:
                lits = [self._resolved(l) for l in path] + [self._resolved(goal)]
                scores = self.ordering.scorer(lits, [c.name for c, _ in cands])
                keyed = sorted(range(len(cands)),
                               key=lambda i: (-scores.get(cands[i][0].name, float("-inf")), i))
                cands = [cands[i] for i in keyed]
            except Exception:  # scorer failure must never change provability
                self.stats.guided_failures += 1
                log.debug("guided scorer failed, using input order", exc_info=True)
        return cands

    # -- core recursion (generators yield once per way of closing the goals)

    def _solve_literal(self, goal: Literal, path: list[Literal]) -> Iterator[TableauNode]:
        subst, trail = self._subst, self._trail
        if self.regularity and path:
            g = self._resolved(goal)
            for anc in path:
                if anc.positive == g.positive and anc.atom.name == g.atom.name \
                        and self._resolved(anc) == g:
                    return

        for d, anc in enumerate(path):
            if anc.positive == goal.positive or anc.atom.name != goal.atom.name:
                continue
            self._tick()
            mark = len(trail)
            if unify_into(anc.atom, goal.atom, subst, trail, self.occurs_check):
                yield TableauNode(goal, RED, ancestor=d)
            self._undo(mark)

        key = (not goal.positive, goal.atom.name, len(goal.atom.args))
        cands = self._index.get(key)
        if not cands:
            return
        if len(path) + 1 > self._limit:
            self._depth_hit = True
            return
        new_path = path + [goal]
        for clause, j in self._order(cands, goal, path):
            self._tick()
            inst = rename_apart(clause, self._fresh)
            mark = len(trail)
            if unify_into(inst.literals[j].atom, goal.atom, subst, trail, self.occurs_check):
                rest = [l for k, l in enumerate(inst.literals) if k != j]
                for sub in self._solve_all(rest, 0, new_path):
                    children = list(sub)
                    children.insert(j, TableauNode(inst.literals[j], CONN))
                    yield TableauNode(goal, EXT, clause.name, j, children=children)
            self._undo(mark)

    def _solve_all(self, lits, i, path) -> Iterator[list]:
        if i == len(lits):
            yield []
            return
        for node in self._solve_literal(lits[i], path):
            for rest in self._solve_all(lits, i + 1, path):
                yield [node] + rest

    def _instantiate(self, node: TableauNode) -> TableauNode:
        return TableauNode(self._resolved(node.literal), node.closure, node.clause,
                           node.lit_idx, node.ancestor,
                           [self._instantiate(c) for c in node.children])

    # -- public API

    def proofs(self, all_depths: bool = False) -> Iterator[ProofTree]:
        """Yield closed tableaux, shallowest depth first.

        Without ``all_depths`` the enumeration stops after the first depth
        that produced a proof. ``self.stats`` describes the search so far.
        """
        self._subst, self._trail = {}, []
        self._fresh = fresh_variables()
        self._rng = random.Random(self.ordering.seed)
        lim = self.limits
        self.stats = SearchStats()
        t0 = time.perf_counter()
        self._deadline = t0 + lim.time_budget
        seen = set()
        try:
            depth = lim.start_depth
            while depth <= lim.max_depth:
                self._limit = depth
                self.stats.depth = depth
                self._depth_hit = False
                found = False
                for start in start_clauses(self.matrix):
                    inst = rename_apart(start, self._fresh)
                    for roots in self._solve_all(list(inst.literals), 0, []):
                        p = ProofTree(self.matrix.name, start.name,
                                      [self._instantiate(r) for r in roots])
                        key = dumps_proof(p)
                        if key in seen:
                            continue
                        seen.add(key)
                        found = True
                        self.stats.status = "proved"
                        self.stats.seconds = time.perf_counter() - t0
                        yield p
                if found and not all_depths:
                    return
                if not self._depth_hit:
                    if not found:
                        self.stats.status = "no_proof"
                    return
                depth += lim.depth_step
            if self.stats.status != "proved":
                self.stats.status = "depth_exhausted"
        except _Stop as stop:
            if self.stats.status != "proved":
                self.stats.status = stop.status
        finally:
            self.stats.seconds = time.perf_counter() - t0


def prove(m: Matrix, limits: SearchLimits | None = None, ordering: ClauseOrdering | None = None,
          regularity: bool = True, occurs_check: bool = True) -> tuple[ProofTree | None, SearchStats]:
    """Search for a closed connection tableau.

    Returns the first proof (already accepted by ``check_proof``) or None,
    together with search statistics. ``stats.status`` distinguishes a
    finished search without proof (``no_proof``), the depth limit being
    reached (``depth_exhausted``) and budget/timeouts.
    """
    if not len(m):
        raise ValueError("cannot prove an empty matrix")
    prover = Prover(m, limits, ordering, regularity, occurs_check)
    gen = prover.proofs()
    proof = next(gen, None)
    gen.close()
    if proof is not None:
        res = check_proof(m, proof)
        if not res:
            raise InvariantViolation(f"prover produced an invalid proof: {res}")
    return proof, prover.stats


def prove_all(m: Matrix, limits: SearchLimits | None = None, ordering: ClauseOrdering | None = None,
              max_proofs: int = 10, **kw) -> tuple[list[ProofTree], SearchStats]:
    """Up to ``max_proofs`` distinct proofs found at the shallowest solvable depth."""
    prover = Prover(m, limits, ordering, **kw)
    out = []
    gen = prover.proofs()
    for p in gen:
        res = check_proof(m, p)
        if not res:
            raise InvariantViolation(f"prover produced an invalid proof: {res}")
        out.append(p)
        if len(out) >= max_proofs:
            break
    gen.close()
    return out, prover.stats


# ---------------------------------------------------------------- checking


@dataclass
class CheckResult:
    ok: bool
    condition: str | None = None  # "a" | "b" | "c" | "d"
    path: tuple | None = None
    message: str = ""

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "accepted"
        return f"rejected ({self.condition}) at node {self.path}: {self.message}"


def _match(pattern, target, theta: dict) -> bool:
    """One-way matching: extend ``theta`` so that pattern·theta == target."""
    if isinstance(pattern, Var):
        bound = theta.get(pattern)
        if bound is None:
            theta[pattern] = target
            return True
        return bound == target
    if not isinstance(target, Fn) or target.name != pattern.name or len(target.args) != len(pattern.args):
        return False
    return all(_match(p, t, theta) for p, t in zip(pattern.args, target.args))


def _instance_of(clause: Clause, lits: Sequence[Literal]) -> bool:
    if len(clause.literals) != len(lits):
        return False
    theta = {}
    for cl, l in zip(clause.literals, lits):
        if cl.positive != l.positive or not _match(cl.atom, l.atom, theta):
            return False
    return True


def check_proof(m: Matrix, p: ProofTree) -> CheckResult:
    """Independently verify a closed connection tableau against ``m``.

    Conditions: (a) start and extension clauses are instances of matrix
    clauses, (b) extension children are exactly the clause instance with the
    connected literal complementary to the parent, (c) reductions cite a
    complementary ancestor, (d) no leaf is open.
    """
    if p.start_clause not in m:
        return CheckResult(False, "a", (), f"unknown start clause {p.start_clause!r}")
    if not _instance_of(m[p.start_clause], [r.literal for r in p.roots]):
        return CheckResult(False, "a", (), "roots are not an instance of the start clause")

    def visit(node: TableauNode, path: tuple, ancestors: list[Literal]):
        lit = node.literal
        if node.closure == OPEN:
            return CheckResult(False, "d", path, "open leaf")
        if node.closure == CONN:
            if not ancestors:
                return CheckResult(False, "b", path, "root cannot be a connection leaf")
            if node.children:
                return CheckResult(False, "b", path, "connection leaf has children")
            return None  # validated by the parent
        if node.closure == RED:
            if node.children:
                return CheckResult(False, "c", path, "reduction node has children")
            d = node.ancestor
            if d is None or not 0 <= d < len(ancestors):
                return CheckResult(False, "c", path, f"reduction cites missing ancestor {d}")
            anc = ancestors[d]
            if anc.positive == lit.positive or anc.atom != lit.atom:
                return CheckResult(False, "c", path,
                                   f"{print_literal(anc)} is not the complement of {print_literal(lit)}")
            return None
        if node.closure != EXT:
            return CheckResult(False, "d", path, f"unknown closure {node.closure!r}")
        if node.clause not in m:
            return CheckResult(False, "a", path, f"unknown clause {node.clause!r}")
        clause = m[node.clause]
        if node.lit_idx is None or not 0 <= node.lit_idx < len(clause.literals):
            return CheckResult(False, "a", path, f"bad literal index {node.lit_idx}")
        kids = node.children
        if not _instance_of(clause, [k.literal for k in kids]):
            return CheckResult(False, "b", path, f"children are not an instance of {clause.name}")
        conn = kids[node.lit_idx]
        if conn.closure != CONN or conn.literal.positive == lit.positive or conn.literal.atom != lit.atom:
            return CheckResult(False, "b", path, "connected literal is not complementary to the goal")
        below = ancestors + [lit]
        for i, k in enumerate(kids):
            if i != node.lit_idx and k.closure == CONN:
                return CheckResult(False, "b", path + (i,), "connection leaf off the cited literal")
            bad = visit(k, path + (i,), below)
            if bad is not None:
                return bad
        return None

    for i, r in enumerate(p.roots):
        if r.closure == CONN:
            return CheckResult(False, "d", (i,), "root literal left unclosed")
        bad = visit(r, (i,), [])
        if bad is not None:
            return bad
    p.verified = True
    return CheckResult(True)


def record_expansions(p: ProofTree) -> list[tuple[tuple, str]]:
    """(node path, clause) for every extension step, depth-first."""
    if not p.verified:
        raise ProofError("proof has not been accepted by check_proof")
    return [(path, n.clause) for path, _, n in p.nodes() if n.closure == EXT]


# ---------------------------------------------------------------- serialization

_LINE_RE = re.compile(r"^(\d+) (.+?)(?: (ext (\S+) (\d+)|red (\d+)|open))?$")


def dumps_proof(p: ProofTree) -> str:
    lines = ["v1", f"proof {p.problem or '-'} {p.start_clause}"]
    for _, depth, n in p.nodes():
        text = f"{depth} {print_literal(n.literal)}"
        if n.closure == EXT:
            text += f" ext {n.clause} {n.lit_idx}"
        elif n.closure == RED:
            text += f" red {n.ancestor}"
        elif n.closure == OPEN:
            text += " open"
        lines.append(text)
    return "\n".join(lines) + "\n"


def loads_proof(text: str) -> ProofTree:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0].strip() != "v1":
        raise ValueError("not a v1 proof file")
    head = lines[1].split()
    if len(head) != 3 or head[0] != "proof":
        raise ValueError(f"bad proof header {lines[1]!r}")
    problem = "" if head[1] == "-" else head[1]
    roots: list[TableauNode] = []
    stack: list[TableauNode] = []
    for lineno, line in enumerate(lines[2:], 3):
        m = _LINE_RE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: malformed node {line!r}")
        depth = int(m.group(1))
        node = TableauNode(parse_literal(m.group(2)), CONN)
        if m.group(4) is not None:
            node.closure, node.clause, node.lit_idx = EXT, m.group(4), int(m.group(5))
        elif m.group(6) is not None:
            node.closure, node.ancestor = RED, int(m.group(6))
        elif m.group(3) == "open":
            node.closure = OPEN
        if depth > len(stack):
            raise ValueError(f"line {lineno}: depth jumps to {depth}")
        del stack[depth:]
        if depth == 0:
            if node.closure == CONN:
                node.closure = OPEN
            roots.append(node)
        else:
            stack[-1].children.append(node)
        stack.append(node)
    return ProofTree(problem, head[2], roots)
