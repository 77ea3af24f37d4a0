"""Propositional formulas over a fixed vocabulary.

A formula is a small immutable AST.  Variables are referenced by name and may
carry a prime marker, which makes the same AST usable for single-state
formulas (Init, Bad, candidates) and for two-state transition relations.

Clausal forms (Literal / Clause / Cnf) refer to variables by index into a
Vocabulary, because inference algorithms manipulate them positionally.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import DomainError

PRIME = "'"
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")


# ---------------------------------------------------------------------------
# vocabulary and states


@dataclass(frozen=True)
class Vocabulary:
    """Ordered list of distinct, unprimed variable names."""

    vars: tuple[str, ...]
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        names = tuple(self.vars)
        object.__setattr__(self, "vars", names)
        for name in names:
            if not isinstance(name, str) or not _NAME_RE.match(name):
                raise DomainError(f"invalid variable name {name!r}")
        index = {name: i for i, name in enumerate(names)}
        if len(index) != len(names):
            raise DomainError("duplicate variable names in vocabulary")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.vars)

    def __iter__(self) -> Iterator[str]:
        return iter(self.vars)

    def __contains__(self, name) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DomainError(f"variable {name!r} not in vocabulary") from None

    def var(self, name_or_index, primed: bool = False) -> "Var":
        name = self.vars[name_or_index] if isinstance(name_or_index, int) else name_or_index
        self.index(name)
        return Var(name, primed)

    def lit(self, name_or_index, positive: bool = True) -> "Literal":
        i = name_or_index if isinstance(name_or_index, int) else self.index(name_or_index)
        return Literal(i, positive)

    @property
    def num_states(self) -> int:
        return 1 << len(self.vars)


@dataclass(frozen=True)
class State:
    """A total assignment.  Bit i of ``bits`` is the value of ``vocab.vars[i]``."""

    vocab: Vocabulary
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << len(self.vocab)):
            raise DomainError("state bits outside the vocabulary range")

    @classmethod
    def from_dict(cls, vocab: Vocabulary, values: Mapping[str, object]) -> "State":
        if set(values) != set(vocab.vars):
            raise DomainError("state must assign exactly the vocabulary variables")
        bits = 0
        for name, v in values.items():
            if v:
                bits |= 1 << vocab.index(name)
        return cls(vocab, bits)

    @classmethod
    def from_values(cls, vocab: Vocabulary, values: Sequence[object]) -> "State":
        if len(values) != len(vocab):
            raise DomainError("state must assign exactly the vocabulary variables")
        return cls(vocab, sum(1 << i for i, v in enumerate(values) if v))

    def value(self, i: int) -> bool:
        return bool((self.bits >> i) & 1)

    def __getitem__(self, name: str) -> bool:
        return self.value(self.vocab.index(name))

    def values(self) -> tuple[bool, ...]:
        return tuple(self.value(i) for i in range(len(self.vocab)))

    def as_dict(self) -> dict[str, bool]:
        return {name: self.value(i) for i, name in enumerate(self.vocab.vars)}

    def __repr__(self) -> str:
        ones = [n for i, n in enumerate(self.vocab.vars) if self.value(i)]
        return "State{" + ",".join(ones) + "}"


# ---------------------------------------------------------------------------
# formula AST


class Formula:
    """Base class of AST nodes.  Supports ``~f``, ``f & g`` and ``f | g``."""

    __slots__ = ()

    def __invert__(self):
        return Not(self)

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __str__(self) -> str:
        return to_sexpr(self)


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool

    def __repr__(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, repr=False)
class Var(Formula):
    name: str
    primed: bool = False

    def __repr__(self):
        return self.name + (PRIME if self.primed else "")


@dataclass(frozen=True, repr=False)
class Not(Formula):
    arg: Formula

    def __repr__(self):
        return f"~{self.arg!r}"


@dataclass(frozen=True, repr=False)
class And(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __repr__(self):
        return "(" + " & ".join(map(repr, self.args)) + ")" if self.args else "true"


@dataclass(frozen=True, repr=False)
class Or(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __repr__(self):
        return "(" + " | ".join(map(repr, self.args)) + ")" if self.args else "false"


@dataclass(frozen=True, repr=False)
class Implies(Formula):
    lhs: Formula
    rhs: Formula

    def __repr__(self):
        return f"({self.lhs!r} -> {self.rhs!r})"


@dataclass(frozen=True, repr=False)
class Iff(Formula):
    lhs: Formula
    rhs: Formula

    def __repr__(self):
        return f"({self.lhs!r} <-> {self.rhs!r})"


FormulaLike = Union[Formula, "Cnf"]


def conj(*fs) -> Formula:
    """Conjunction that skips ``true`` operands and avoids 0/1-ary nodes."""
    args = []
    for f in _flat_args(fs):
        f = as_formula(f)
        if f == FALSE:
            return FALSE
        if f != TRUE:
            args.append(f)
    if not args:
        return TRUE
    return args[0] if len(args) == 1 else And(tuple(args))


def disj(*fs) -> Formula:
    args = []
    for f in _flat_args(fs):
        f = as_formula(f)
        if f == TRUE:
            return TRUE
        if f != FALSE:
            args.append(f)
    if not args:
        return FALSE
    return args[0] if len(args) == 1 else Or(tuple(args))


def neg(f) -> Formula:
    f = as_formula(f)
    if isinstance(f, Const):
        return Const(not f.value)
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def xor(a, b) -> Formula:
    return Not(Iff(as_formula(a), as_formula(b)))


def _flat_args(fs):
    for f in fs:
        if isinstance(f, (list, tuple)) or (hasattr(f, "__iter__") and not isinstance(f, (Formula, Cnf))):
            yield from _flat_args(f)
        else:
            yield f


def as_formula(f) -> Formula:
    if isinstance(f, Formula):
        return f
    if isinstance(f, Cnf):
        return f.to_formula()
    if isinstance(f, bool):
        return Const(f)
    raise TypeError(f"not a formula: {f!r}")


def _children(f: Formula) -> tuple:
    if isinstance(f, (And, Or)):
        return f.args
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, (Implies, Iff)):
        return (f.lhs, f.rhs)
    return ()


def free_vars(f: FormulaLike) -> set[tuple[str, bool]]:
    """Set of (name, primed) pairs occurring in ``f``."""
    if isinstance(f, Cnf):
        return {(f.vocab.vars[l.var], False) for c in f.clauses for l in c.literals}
    out, seen, stack = set(), set(), [f]
    while stack:
        g = stack.pop()
        if id(g) in seen:
            continue
        seen.add(id(g))
        if isinstance(g, Var):
            out.add((g.name, g.primed))
        else:
            stack.extend(_children(g))
    return out


def is_primed(f: FormulaLike) -> bool:
    """True iff some variable occurrence in ``f`` is primed."""
    return any(p for _, p in free_vars(f))


def map_vars(f: Formula, fn) -> Formula:
    """Rebuild ``f`` with every Var replaced by ``fn(var)``; shared subterms stay shared."""
    memo: dict[int, Formula] = {}

    def go(g):
        key = id(g)
        if key in memo:
            return memo[key]
        if isinstance(g, Var):
            r = fn(g)
        elif isinstance(g, Const):
            r = g
        elif isinstance(g, Not):
            r = Not(go(g.arg))
        elif isinstance(g, And):
            r = And(tuple(go(a) for a in g.args))
        elif isinstance(g, Or):
            r = Or(tuple(go(a) for a in g.args))
        elif isinstance(g, Implies):
            r = Implies(go(g.lhs), go(g.rhs))
        elif isinstance(g, Iff):
            r = Iff(go(g.lhs), go(g.rhs))
        else:
            raise TypeError(f"unknown node {g!r}")
        memo[key] = r
        return r

    return go(f)


def prime(f: FormulaLike) -> Formula:
    """Replace every variable by its primed copy.  The input must be unprimed."""
    f = as_formula(f)

    def fn(v: Var):
        if v.primed:
            raise DomainError(f"prime of already-primed variable {v.name}'")
        return Var(v.name, True)

    return map_vars(f, fn)


def unprime(f: Formula) -> Formula:
    def fn(v: Var):
        if not v.primed:
            raise DomainError(f"unprime of unprimed variable {v.name}")
        return Var(v.name, False)

    return map_vars(f, fn)


def swap_primes(f: Formula) -> Formula:
    """Exchange the roles of the current and next-state copies."""
    return map_vars(f, lambda v: Var(v.name, not v.primed))


def evaluate(f: FormulaLike, sigma: State, sigma_post: State | None = None) -> bool:
    """Truth value of ``f`` under ``sigma`` (and ``sigma_post`` for primed vars)."""
    if isinstance(f, Cnf):
        if f.vocab != sigma.vocab:
            raise DomainError("cnf and state use different vocabularies")
        return all(any(sigma.value(l.var) == l.positive for l in c.literals) for c in f.clauses)
    memo: dict[int, bool] = {}

    def go(g) -> bool:
        key = id(g)
        if key in memo:
            return memo[key]
        if isinstance(g, Const):
            r = g.value
        elif isinstance(g, Var):
            s = sigma_post if g.primed else sigma
            if s is None or g.name not in s.vocab:
                raise DomainError(f"unbound variable {g!r}")
            r = s[g.name]
        elif isinstance(g, Not):
            r = not go(g.arg)
        elif isinstance(g, And):
            r = all(go(a) for a in g.args)
        elif isinstance(g, Or):
            r = any(go(a) for a in g.args)
        elif isinstance(g, Implies):
            r = (not go(g.lhs)) or go(g.rhs)
        elif isinstance(g, Iff):
            r = go(g.lhs) == go(g.rhs)
        else:
            raise TypeError(f"unknown node {g!r}")
        memo[key] = r
        return r

    return go(f)


# ``eval`` is the conventional name; keep the builtin reachable as builtins.eval
eval = evaluate  # noqa: A001


# ---------------------------------------------------------------------------
# clausal forms


@dataclass(frozen=True, order=True)
class Literal:
    var: int
    positive: bool

    def __neg__(self) -> "Literal":
        return Literal(self.var, not self.positive)

    def to_formula(self, vocab: Vocabulary) -> Formula:
        v = Var(vocab.vars[self.var])
        return v if self.positive else Not(v)

    def show(self, vocab: Vocabulary) -> str:
        return ("" if self.positive else "~") + vocab.vars[self.var]


@dataclass(frozen=True)
class Clause:
    """Disjunction of literals.  Both polarities of a variable make it tautological."""

    literals: frozenset

    def __post_init__(self):
        object.__setattr__(self, "literals", frozenset(self.literals))

    @classmethod
    def of(cls, *lits: Literal) -> "Clause":
        return cls(frozenset(lits))

    @property
    def width(self) -> int:
        return len(self.literals)

    @property
    def is_tautology(self) -> bool:
        return any(-l in self.literals for l in self.literals)

    @property
    def is_monotone(self) -> bool:
        """All literals negative."""
        return all(not l.positive for l in self.literals)

    def sorted(self) -> tuple[Literal, ...]:
        return tuple(sorted(self.literals))

    def order_key(self) -> tuple:
        return (self.width, self.sorted())

    def to_formula(self, vocab: Vocabulary) -> Formula:
        return disj(l.to_formula(vocab) for l in self.sorted())

    def show(self, vocab: Vocabulary) -> str:
        if not self.literals:
            return "false"
        return " | ".join(l.show(vocab) for l in self.sorted())

    def __iter__(self):
        return iter(self.sorted())

    def __len__(self):
        return len(self.literals)


class Cnf:
    """Conjunction of clauses over a vocabulary.

    ``conjoin`` returns a new Cnf that remembers its parent, which lets the
    semantic engine extend a cached model set instead of recomputing it.
    """

    __slots__ = ("vocab", "clauses", "_base", "_formula", "__weakref__")

    def __init__(self, vocab: Vocabulary, clauses: Iterable[Clause] = (), _base: "Cnf | None" = None):
        self.vocab = vocab
        cl = []
        n = len(vocab)
        for c in clauses:
            if not isinstance(c, Clause):
                c = Clause(frozenset(c))
            for l in c.literals:
                if not 0 <= l.var < n:
                    raise DomainError(f"literal index {l.var} out of range")
            cl.append(c)
        self.clauses = tuple(cl)
        self._base = _base
        self._formula = None

    # -- construction helpers
    @classmethod
    def true(cls, vocab: Vocabulary) -> "Cnf":
        return cls(vocab, ())

    @classmethod
    def from_lists(cls, vocab: Vocabulary, clauses: Iterable[Iterable]) -> "Cnf":
        """Clauses given as lists of names, with ``~`` or ``!`` marking negation."""
        out = []
        for c in clauses:
            lits = []
            for tok in c:
                pos = not tok.startswith(("~", "!", "-"))
                lits.append(Literal(vocab.index(tok.lstrip("~!-")), pos))
            out.append(Clause(frozenset(lits)))
        return cls(vocab, out)

    def conjoin(self, *clauses: Clause) -> "Cnf":
        return Cnf(self.vocab, self.clauses + tuple(clauses), _base=self)

    # -- predicates
    def __len__(self) -> int:
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    def __eq__(self, other) -> bool:
        return isinstance(other, Cnf) and self.vocab == other.vocab and self.clauses == other.clauses

    def __hash__(self) -> int:
        return hash((self.vocab, self.clauses))

    def __repr__(self) -> str:
        return "Cnf[" + " ; ".join(c.show(self.vocab) for c in self.clauses) + "]"

    def __str__(self) -> str:
        if not self.clauses:
            return "true"
        return " & ".join("(" + c.show(self.vocab) + ")" for c in self.clauses)

    def in_cnf(self, m: int) -> bool:
        return len(self.clauses) <= m

    @property
    def is_monotone(self) -> bool:
        return all(c.is_monotone for c in self.clauses)

    def in_moncnf(self, m: int) -> bool:
        return self.in_cnf(m) and self.is_monotone

    def canonical(self) -> "Cnf":
        """Duplicates removed, clauses sorted by (width, literal order)."""
        return Cnf(self.vocab, sorted(set(self.clauses), key=Clause.order_key))

    def without_subsumed(self) -> "Cnf":
        """Drop duplicate clauses and clauses that contain another clause."""
        uniq = sorted(set(self.clauses), key=Clause.order_key)
        keep: list[Clause] = []
        for c in uniq:
            if not any(k.literals <= c.literals for k in keep):
                keep.append(c)
        order = {c: i for i, c in enumerate(self.clauses)}
        keep.sort(key=lambda c: order[c])
        return Cnf(self.vocab, keep)

    def to_formula(self) -> Formula:
        if self._formula is None:
            self._formula = conj(c.to_formula(self.vocab) for c in self.clauses)
        return self._formula

    def negated(self) -> Formula:
        """¬self as a DNF: one cube per clause."""
        cubes = [conj((-l).to_formula(self.vocab) for l in c.sorted()) for c in self.clauses]
        return disj(cubes)

    def to_dimacs(self) -> str:
        return to_dimacs(self)


def cube(sigma: State) -> Cnf:
    """Conjunction of unit clauses, one per variable, true exactly at ``sigma``."""
    return Cnf(sigma.vocab, [Clause.of(Literal(i, sigma.value(i))) for i in range(len(sigma.vocab))])


def cube_literals(sigma: State) -> list[Literal]:
    return [Literal(i, sigma.value(i)) for i in range(len(sigma.vocab))]


def conjunction_of(vocab: Vocabulary, lits: Iterable[Literal]) -> Formula:
    return conj(l.to_formula(vocab) for l in lits)


def clause_of_negated(lits: Iterable[Literal]) -> Clause:
    """¬(l1 ∧ ... ∧ lk) as a clause."""
    return Clause(frozenset(-l for l in lits))


def is_prime_consequence(c: Clause, phi: Cnf) -> bool:
    """φ ⟹ c and no proper subclause of c is implied by φ.

    Decided by enumeration.  Checking the immediate subclauses suffices,
    since implication is monotone in clause inclusion.
    """
    from .semantics import engine_for

    eng = engine_for(phi.vocab)
    if not eng.implies(phi, Cnf(phi.vocab, [c])):
        return False
    for l in c.literals:
        sub = Clause(c.literals - {l})
        if eng.implies(phi, Cnf(phi.vocab, [sub])):
            return False
    return True


# ---------------------------------------------------------------------------
# S-expression syntax


def to_sexpr(f: FormulaLike) -> str:
    if isinstance(f, Cnf):
        f = f.to_formula()
    parts: list[str] = []

    def go(g):
        if isinstance(g, Const):
            parts.append("(const true)" if g.value else "(const false)")
        elif isinstance(g, Var):
            parts.append(g.name + (PRIME if g.primed else ""))
        else:
            op = {Not: "!", And: "&", Or: "|", Implies: "->", Iff: "<->"}[type(g)]
            parts.append("(" + op)
            for a in _children(g):
                parts.append(" ")
                go(a)
            parts.append(")")

    go(f)
    return "".join(parts)


_TOKEN_RE = re.compile(r"\s*(\(|\)|[^\s()]+)")


def parse_sexpr(text: str, vocab: Vocabulary | None = None) -> Formula:
    """Parse the S-expression grammar; ``vocab`` (optional) validates names."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise DomainError(f"cannot tokenize near {text[pos:pos + 20]!r}")
        tokens.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if not tokens:
        raise DomainError("empty formula")
    i = 0

    def atom(tok):
        primed = tok.endswith(PRIME)
        name = tok[:-1] if primed else tok
        if not _NAME_RE.match(name):
            raise DomainError(f"bad variable token {tok!r}")
        if vocab is not None and name not in vocab:
            raise DomainError(f"variable {name!r} not in vocabulary")
        return Var(name, primed)

    def go():
        nonlocal i
        if i >= len(tokens):
            raise DomainError("unexpected end of formula")
        tok = tokens[i]
        i += 1
        if tok == ")":
            raise DomainError("unexpected ')'")
        if tok != "(":
            return atom(tok)
        if i >= len(tokens):
            raise DomainError("unexpected end of formula")
        op = tokens[i]
        i += 1
        args = []
        while True:
            if i >= len(tokens):
                raise DomainError("missing ')'")
            if tokens[i] == ")":
                i += 1
                break
            if op == "const":
                args.append(tokens[i])
                i += 1
            else:
                args.append(go())
        if op == "const":
            if args not in (["true"], ["false"]):
                raise DomainError(f"bad constant {args}")
            return Const(args[0] == "true")
        if op == "!":
            if len(args) != 1:
                raise DomainError("'!' takes one argument")
            return Not(args[0])
        if op == "&":
            return And(tuple(args))
        if op == "|":
            return Or(tuple(args))
        if op in ("->", "<->"):
            if len(args) != 2:
                raise DomainError(f"'{op}' takes two arguments")
            return (Implies if op == "->" else Iff)(args[0], args[1])
        raise DomainError(f"unknown operator {op!r}")

    f = go()
    if i != len(tokens):
        raise DomainError("trailing tokens after formula")
    return f


# ---------------------------------------------------------------------------
# DIMACS


def to_dimacs(cnf: Cnf) -> str:
    lines = ["c vars: " + " ".join(cnf.vocab.vars), f"p cnf {len(cnf.vocab)} {len(cnf.clauses)}"]
    for c in cnf.clauses:
        lits = [str(l.var + 1) if l.positive else str(-(l.var + 1)) for l in c.sorted()]
        lines.append(" ".join(lits + ["0"]))
    return "\n".join(lines) + "\n"


def from_dimacs(text: str, vocab: Vocabulary | None = None) -> Cnf:
    header_vars = None
    nvars = None
    clauses = []
    cur: list[Literal] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            if line.startswith("c vars:"):
                header_vars = line[len("c vars:"):].split()
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DomainError(f"bad DIMACS header {line!r}")
            nvars = int(parts[2])
            continue
        for tok in line.split():
            v = int(tok)
            if v == 0:
                clauses.append(Clause(frozenset(cur)))
                cur = []
            else:
                cur.append(Literal(abs(v) - 1, v > 0))
    if cur:
        clauses.append(Clause(frozenset(cur)))
    if vocab is None:
        if header_vars is not None:
            vocab = Vocabulary(tuple(header_vars))
        elif nvars is not None:
            vocab = Vocabulary(tuple(f"v{i + 1}" for i in range(nvars)))
        else:
            raise DomainError("DIMACS input without vocabulary")
    elif header_vars is not None and tuple(header_vars) != vocab.vars:
        raise DomainError("DIMACS variable header does not match the vocabulary")
    return Cnf(vocab, clauses)


def tseitin_dimacs(f: FormulaLike, vocab: Vocabulary) -> str:
    """Equisatisfiable DIMACS for an arbitrary (possibly two-state) formula.

    Variables 1..n are the current state, n+1..2n the primed copies, and
    auxiliaries follow.
    """
    f = as_formula(f)
    n = len(vocab)
    clauses: list[list[int]] = []
    memo: dict[int, int] = {}
    counter = [2 * n]

    def fresh() -> int:
        counter[0] += 1
        return counter[0]

    def go(g) -> int:
        key = id(g)
        if key in memo:
            return memo[key]
        if isinstance(g, Var):
            r = vocab.index(g.name) + 1 + (n if g.primed else 0)
        elif isinstance(g, Const):
            r = fresh()
            clauses.append([r if g.value else -r])
        elif isinstance(g, Not):
            r = -go(g.arg)
        else:
            if isinstance(g, Implies):
                a, b = go(g.lhs), go(g.rhs)
                r = fresh()
                clauses.extend([[-r, -a, b], [r, a], [r, -b]])
            elif isinstance(g, Iff):
                a, b = go(g.lhs), go(g.rhs)
                r = fresh()
                clauses.extend([[-r, -a, b], [-r, a, -b], [r, a, b], [r, -a, -b]])
            else:
                ks = [go(a) for a in g.args]
                r = fresh()
                if isinstance(g, And):
                    clauses.extend([[-r, k] for k in ks])
                    clauses.append([r] + [-k for k in ks])
                else:
                    clauses.append([-r] + ks)
                    clauses.extend([[r, -k] for k in ks])
        memo[key] = r
        return r

    root = go(f)
    clauses.append([root])
    names = list(vocab.vars) + [v + PRIME for v in vocab.vars]
    lines = ["c vars: " + " ".join(names), f"p cnf {counter[0]} {len(clauses)}"]
    lines.extend(" ".join(map(str, c + [0])) for c in clauses)
    return "\n".join(lines) + "\n"
