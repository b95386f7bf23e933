"""First-order terms, literals and clauses, a TPTP-CNF reader/printer,
substitutions and unification, and VAR/SKLM normalization."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Union

__all__ = [
    "Var", "Fn", "Term", "Literal", "Clause", "Matrix", "SymbolTable",
    "ParseError", "ArityError", "parse_tptp_cnf", "parse_term", "parse_literal",
    "print_term", "print_literal", "print_clause", "print_matrix",
    "apply", "apply_literal", "unify", "compose", "rename_apart", "fresh_variables",
    "normalize", "skolem_detector", "term_vars", "occurs", "complement",
    "VAR", "SKLM", "EQUALITY",
]

EQUALITY = "="


@dataclass(frozen=True, slots=True)
class Var:
    """A variable. ``idx`` is 0 for variables read from input and a fresh
    positive integer for renamed-apart copies."""

    name: str
    idx: int = 0

    def __str__(self):
        return self.name if self.idx == 0 else f"{self.name}_{self.idx}"


@dataclass(frozen=True, slots=True)
class Fn:
    """Function application; constants have empty ``args``."""

    name: str
    args: tuple = ()

    def __str__(self):
        return print_term(self)


Term = Union[Var, Fn]

VAR = Fn("VAR")
SKLM = Fn("SKLM")


@dataclass(frozen=True, slots=True)
class Literal:
    positive: bool
    atom: Fn

    def __post_init__(self):
        if not isinstance(self.atom, Fn):
            raise TypeError(f"literal atom must be a compound term, got {self.atom!r}")

    @property
    def is_equality(self) -> bool:
        return self.atom.name == EQUALITY and len(self.atom.args) == 2

    def negate(self) -> Literal:
        return Literal(not self.positive, self.atom)

    def __str__(self):
        return print_literal(self)


def complement(lit: Literal) -> Literal:
    return Literal(not lit.positive, lit.atom)


@dataclass(frozen=True)
class Clause:
    name: str
    literals: tuple
    role: str = "axiom"

    def __post_init__(self):
        if not self.literals:
            raise ValueError(f"clause {self.name} is empty")

    def __len__(self):
        return len(self.literals)

    def __str__(self):
        return print_clause(self)


class SymbolTable:
    """Interns function/predicate names to integer ids and tracks arities."""

    def __init__(self):
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        self.arity: dict[str, int] = {}
        self.predicates: set[str] = set()

    def intern(self, name: str, arity: int, predicate: bool = False) -> int:
        known = self.arity.get(name)
        if known is not None and known != arity:
            raise ArityError(f"symbol {name!r} used with arity {arity} and {known}")
        if name not in self._ids:
            self._ids[name] = len(self._names)
            self._names.append(name)
            self.arity[name] = arity
        if predicate:
            self.predicates.add(name)
        return self._ids[name]

    def id(self, name: str) -> int:
        return self._ids[name]

    def name(self, ident: int) -> str:
        return self._names[ident]

    def __contains__(self, name):
        return name in self._ids

    def __len__(self):
        return len(self._names)

    def __iter__(self):
        return iter(self._names)


@dataclass
class Matrix:
    clauses: tuple
    symbols: SymbolTable = field(default_factory=SymbolTable, repr=False)
    name: str = ""

    def __post_init__(self):
        self.clauses = tuple(self.clauses)
        seen = set()
        for c in self.clauses:
            if c.name in seen:
                raise ValueError(f"duplicate clause name {c.name!r}")
            seen.add(c.name)
        if not len(self.symbols):
            for c in self.clauses:
                _intern_clause(self.symbols, c)
        self._by_name = {c.name: c for c in self.clauses}

    def __getitem__(self, name: str) -> Clause:
        return self._by_name[name]

    def __contains__(self, name):
        return name in self._by_name

    def __iter__(self):
        return iter(self.clauses)

    def __len__(self):
        return len(self.clauses)


def _intern_clause(table: SymbolTable, clause: Clause):
    for lit in clause.literals:
        table.intern(lit.atom.name, len(lit.atom.args), predicate=True)
        for a in lit.atom.args:
            _intern_term(table, a)


def _intern_term(table: SymbolTable, t: Term):
    if isinstance(t, Fn):
        table.intern(t.name, len(t.args))
        for a in t.args:
            _intern_term(table, a)


# ---------------------------------------------------------------- parsing


class ParseError(ValueError):
    def __init__(self, msg, line=0, col=0):
        self.line, self.col = line, col
        super().__init__(f"{msg} at line {line}, column {col}" if line else msg)


class ArityError(ParseError):
    pass


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*|/\*.*?\*/)
  | (?P<neq>!=)
  | (?P<punct>[(),.|~=\[\]])
  | (?P<quoted>'(?:[^'\\]|\\.)*')
  | (?P<dollar>\$\$?[a-z][A-Za-z0-9_]*)
  | (?P<upper>[A-Z_][A-Za-z0-9_]*)
  | (?P<lower>[a-z][A-Za-z0-9_]*)
  | (?P<number>[+-]?[0-9]+(?:\.[0-9]+)?)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(slots=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, symbols: SymbolTable):
        self.toks = _tokenize(text)
        self.i = 0
        self.symbols = symbols

    def peek(self, k=0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        got = tok.text if tok.kind != "eof" else "end of input"
        return ParseError(f"{msg}, got {got!r}", tok.line, tok.col)

    def expect(self, text):
        t = self.peek()
        if t.text != text or t.kind in ("quoted", "eof"):
            raise self.error(f"expected {text!r}")
        return self.next()

    def intern(self, name, arity, tok, predicate=False):
        try:
            self.symbols.intern(name, arity, predicate)
        except ArityError as e:
            raise ArityError(str(e), tok.line, tok.col) from None

    def statements(self) -> Iterator[Clause]:
        while self.peek().kind != "eof":
            yield self.statement()

    def statement(self) -> Clause:
        t = self.next()
        if t.text != "cnf":
            raise self.error("expected 'cnf'", t)
        self.expect("(")
        nt = self.next()
        if nt.kind not in ("lower", "number", "quoted", "upper"):
            raise self.error("expected clause name", nt)
        name = nt.text
        self.expect(",")
        rt = self.next()
        if rt.kind != "lower":
            raise self.error("expected role", rt)
        self.expect(",")
        lits = self.disjunction()
        if self.peek().text == ",":
            self.next()
            self.skip_annotation()
        self.expect(")")
        self.expect(".")
        return Clause(name, tuple(lits), rt.text)

    def skip_annotation(self):
        depth = 0
        while True:
            t = self.peek()
            if t.kind == "eof":
                raise self.error("unterminated annotation")
            if t.text in ("(", "[") and t.kind == "punct":
                depth += 1
            elif t.text in (")", "]") and t.kind == "punct":
                if depth == 0:
                    return
                depth -= 1
            self.next()

    def disjunction(self) -> list[Literal]:
        if self.peek().text == "(":
            # parenthesized clause body; a literal never starts with "("
            self.next()
            lits = self.disjunction()
            self.expect(")")
            return lits
        lits = [self.literal()]
        while self.peek().text == "|":
            self.next()
            lits.append(self.literal())
        return lits

    def literal(self) -> Literal:
        positive = True
        while self.peek().text == "~":
            self.next()
            positive = not positive
        start = self.peek()
        if start.text == "(":
            self.next()
            lit = self.literal()
            self.expect(")")
            return Literal(positive == lit.positive, lit.atom)
        lhs = self.term()
        op = self.peek()
        if op.text in ("=", "!="):
            self.next()
            rhs = self.term()
            self.intern(EQUALITY, 2, op, predicate=True)
            return Literal(positive if op.text == "=" else not positive, Fn(EQUALITY, (lhs, rhs)))
        if isinstance(lhs, Var):
            raise self.error("a literal cannot be a bare variable", start)
        if lhs.name == "$false":
            raise self.error("$false literals are not supported", start)
        self.symbols.predicates.add(lhs.name)
        return Literal(positive, lhs)

    def term(self) -> Term:
        t = self.next()
        if t.kind == "upper":
            return Var(t.text)
        if t.kind not in ("lower", "quoted", "number", "dollar"):
            raise self.error("expected a term", t)
        args = []
        if self.peek().text == "(" and self.peek().kind == "punct":
            self.next()
            args.append(self.term())
            while self.peek().text == ",":
                self.next()
                args.append(self.term())
            self.expect(")")
        self.intern(t.text, len(args), t)
        return Fn(t.text, tuple(args))


def parse_tptp_cnf(text: str, name: str = "") -> Matrix:
    """Read ``cnf(name, role, l1 | ~l2 | ...).`` statements into a Matrix.

    Raises ParseError (with line and column) on malformed input and
    ArityError when a symbol is reused with a different arity.
    """
    symbols = SymbolTable()
    p = _Parser(text, symbols)
    clauses = list(p.statements())
    seen = set()
    for c in clauses:
        if c.name in seen:
            raise ParseError(f"duplicate clause name {c.name!r}")
        seen.add(c.name)
    return Matrix(tuple(clauses), symbols, name)


def parse_term(text: str) -> Term:
    p = _Parser(text, SymbolTable())
    t = p.term()
    if p.peek().kind != "eof":
        raise p.error("trailing input")
    return t


def parse_literal(text: str) -> Literal:
    p = _Parser(text, SymbolTable())
    lit = p.literal()
    if p.peek().kind != "eof":
        raise p.error("trailing input")
    return lit


# ---------------------------------------------------------------- printing


def print_term(t: Term) -> str:
    if isinstance(t, Var):
        return str(t)
    if not t.args:
        return t.name
    return f"{t.name}({','.join(print_term(a) for a in t.args)})"


def print_literal(lit: Literal) -> str:
    if lit.is_equality:
        lhs, rhs = lit.atom.args
        op = "=" if lit.positive else "!="
        return f"{print_term(lhs)} {op} {print_term(rhs)}"
    s = print_term(lit.atom)
    return s if lit.positive else "~" + s


def print_clause(c: Clause) -> str:
    return " | ".join(print_literal(l) for l in c.literals)


def print_matrix(m: Matrix) -> str:
    return "".join(f"cnf({c.name},{c.role},{print_clause(c)}).\n" for c in m.clauses)


# ---------------------------------------------------------------- substitutions


def occurs(v: Var, t: Term, subst: dict | None = None) -> bool:
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            if t == v:
                return True
            if subst and t in subst:
                stack.append(subst[t])
        else:
            stack.extend(t.args)
    return False


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    else:
        for a in t.args:
            yield from term_vars(a)


def apply(t: Term, subst: dict) -> Term:
    """Apply ``subst`` exhaustively (bindings may be triangular)."""
    if not subst:
        return t
    if isinstance(t, Var):
        b = subst.get(t)
        return t if b is None else apply(b, subst)
    if not t.args:
        return t
    return Fn(t.name, tuple(apply(a, subst) for a in t.args))


def apply_literal(lit: Literal, subst: dict) -> Literal:
    return Literal(lit.positive, apply(lit.atom, subst)) if subst else lit


def _resolve(subst: dict) -> dict:
    return {v: apply(t, subst) for v, t in subst.items()}


def compose(first: dict, second: dict) -> dict:
    """Substitution equivalent to applying ``first`` then ``second``."""
    out = {v: apply(t, second) for v, t in first.items()}
    for v, t in second.items():
        out.setdefault(v, t)
    return {v: t for v, t in out.items() if t != v}


def _walk(t: Term, subst: dict) -> Term:
    while isinstance(t, Var):
        b = subst.get(t)
        if b is None:
            return t
        t = b
    return t


def unify_into(a: Term, b: Term, subst: dict, trail: list | None = None,
               occurs_check: bool = True) -> bool:
    """Destructively extend triangular ``subst`` so that a and b unify.

    Every new binding is appended to ``trail`` so callers can undo it. On
    failure the partially added bindings are left in place; callers roll
    back to their trail mark.
    """
    stack = [(a, b)]
    while stack:
        s, t = stack.pop()
        s = _walk(s, subst)
        t = _walk(t, subst)
        if s is t or s == t:
            continue
        if isinstance(s, Var):
            if occurs_check and occurs(s, t, subst):
                return False
            subst[s] = t
            if trail is not None:
                trail.append(s)
        elif isinstance(t, Var):
            if occurs_check and occurs(t, s, subst):
                return False
            subst[t] = s
            if trail is not None:
                trail.append(t)
        else:
            if s.name != t.name or len(s.args) != len(t.args):
                return False
            stack.extend(zip(s.args, t.args))
    return True


def unify(a: Term, b: Term, start: dict | None = None, occurs_check: bool = True) -> dict | None:
    """Most general unifier of ``a`` and ``b`` extending ``start``.

    Returns a new idempotent substitution, or None when the terms do not
    unify. ``start`` is never modified.
    """
    subst = dict(start) if start else {}
    if not unify_into(a, b, subst, None, occurs_check):
        return None
    if occurs_check:
        return _resolve(subst)
    # cyclic bindings cannot be fully resolved; keep the triangular form
    return subst


_fresh = itertools.count(1)


def fresh_variables() -> Iterator[int]:
    """A fresh-index source for rename_apart; use one per proof search for
    reproducible variable names."""
    return itertools.count(1)


def rename_apart(c: Clause, fresh: Iterator[int] | None = None) -> Clause:
    """Copy of ``c`` with every variable replaced by a fresh one."""
    fresh = fresh if fresh is not None else _fresh
    n = next(fresh)
    mapping = {}

    def ren(t):
        if isinstance(t, Var):
            v = mapping.get(t)
            if v is None:
                v = mapping[t] = Var(t.name, n)
            return v
        if not t.args:
            return t
        return Fn(t.name, tuple(ren(a) for a in t.args))

    lits = tuple(Literal(l.positive, ren(l.atom)) for l in c.literals)
    if not mapping:
        return c
    return Clause(c.name, lits, c.role)


# ---------------------------------------------------------------- normalization

DEFAULT_SKOLEM_PREFIXES = ("esk", "skolem", "sk")


def skolem_detector(prefixes: Iterable[str] = DEFAULT_SKOLEM_PREFIXES) -> Callable[[str], bool]:
    prefixes = tuple(prefixes)
    return lambda name: name.startswith(prefixes)


_default_detector = skolem_detector()


def _norm_term(t: Term, is_skolem) -> Term:
    if isinstance(t, Var):
        return VAR
    if t.name in ("VAR", "SKLM") and not t.args:
        return t
    if is_skolem(t.name):
        return SKLM
    if not t.args:
        return t
    return Fn(t.name, tuple(_norm_term(a, is_skolem) for a in t.args))


def normalize(lit: Literal, is_skolem: Callable[[str], bool] | None = None) -> Literal:
    """Replace variables by VAR and Skolem-headed subterms by SKLM.

    The predicate symbol itself is never collapsed.
    """
    is_skolem = is_skolem or _default_detector
    atom = lit.atom
    return Literal(lit.positive, Fn(atom.name, tuple(_norm_term(a, is_skolem) for a in atom.args)))
