"""Transition systems and their explicit-state ground truth.

The relation compiler splits δ into conjuncts it can evaluate cheaply:

* pre-state guards G(Σ) and post-state guards H(Σ′),
* functional definitions v′ ↔ f(Σ),
* split implications P(Σ) → Q(Σ′) (also disjunctions of such parts),
* anything else, which is evaluated pairwise over state chunks.

Images and preimages are then exact set operations over 2^n masks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError
from .formula import (
    TRUE,
    And,
    Cnf,
    Const,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    State,
    Var,
    Vocabulary,
    as_formula,
    disj,
    free_vars,
    neg,
    parse_sexpr,
    swap_primes,
    to_sexpr,
    unprime,
)
from .semantics import SemanticEngine, check_size, engine_for, formula_from_models

_PAIR_CHUNK = 1 << 22


@dataclass(eq=False)
class TransitionSystem:
    """(Init, δ, Bad) over a vocabulary Σ; δ may mention Σ′."""

    vocab: Vocabulary
    init: Formula
    delta: Formula
    bad: Formula
    _relation: Optional["CompiledRelation"] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        for name in ("init", "bad"):
            f = getattr(self, name)
            if not isinstance(f, Cnf):
                f = as_formula(f)
                setattr(self, name, f)
            for v, primed in free_vars(f):
                if primed:
                    raise DomainError(f"{name} mentions primed variable {v}'")
                if v not in self.vocab:
                    raise DomainError(f"{name} mentions unknown variable {v}")
        if isinstance(self.delta, Cnf):
            self.delta = self.delta.to_formula()
        self.delta = as_formula(self.delta)
        for v, _ in free_vars(self.delta):
            if v not in self.vocab:
                raise DomainError(f"delta mentions unknown variable {v}")

    @property
    def n(self) -> int:
        return len(self.vocab)

    @property
    def relation(self) -> "CompiledRelation":
        if self._relation is None:
            self._relation = CompiledRelation(self.vocab, self.delta)
        return self._relation

    @property
    def engine(self) -> SemanticEngine:
        return engine_for(self.vocab)


def _conjuncts(f: Formula):
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, And):
            stack.extend(reversed(g.args))
        elif isinstance(g, Cnf):
            stack.extend(reversed([c.to_formula(g.vocab) for c in g.clauses]))
        elif isinstance(g, Const) and g.value:
            continue
        else:
            yield g


def _sides(f: Formula) -> tuple[bool, bool]:
    fv = free_vars(f)
    return any(not p for _, p in fv), any(p for _, p in fv)


class CompiledRelation:
    """Exact image/preimage operators for a two-state formula."""

    def __init__(self, vocab: Vocabulary, delta: Formula, structured: bool = True):
        check_size(vocab)
        self.vocab = vocab
        self.delta = delta
        self.eng = eng = engine_for(vocab)
        size = eng.size
        self.guard_pre = eng.full(True)
        self.guard_post = eng.full(True)
        functional: dict[int, np.ndarray] = {}
        impls: list[tuple[np.ndarray, np.ndarray]] = []
        mixed: list[Formula] = []
        for c in (_conjuncts(delta) if structured else [delta]):
            if not structured:
                mixed.append(c)
                continue
            pre, post = _sides(c)
            if isinstance(c, Const):
                if not c.value:
                    self.guard_pre[:] = False
                continue
            if not post:
                self.guard_pre &= eng.mask(c)
                continue
            if not pre:
                self.guard_post &= eng.mask(unprime(c))
                continue
            fdef = _functional(c)
            if fdef is not None:
                name, body = fdef
                j = vocab.index(name)
                fm = eng.mask(body)
                if j in functional:
                    self.guard_pre &= functional[j] == fm
                else:
                    functional[j] = fm
                continue
            imp = _split_implication(c)
            if imp is not None and len(impls) < 30:
                p, q = imp
                impls.append((eng.mask(p), eng.mask(unprime(q))))
                continue
            mixed.append(c)
        self.mixed = mixed
        self.impls = impls
        self.fvars = sorted(functional)
        nf = len(self.fvars)
        dtype = np.int32 if nf < 31 else np.int64
        self.fval = np.zeros(size, dtype=dtype)
        self.proj = np.zeros(size, dtype=dtype)
        for k, j in enumerate(self.fvars):
            self.fval |= functional[j].astype(dtype) << k
            self.proj |= eng.bit(j).astype(dtype) << k
        self.nf = nf
        self.pkey = None
        if impls:
            self.pkey = np.zeros(size, dtype=np.int32)
            for k, (p, _) in enumerate(impls):
                self.pkey |= p.astype(np.int32) << k
        self._groups = None

    # -- helpers
    def _hit(self, pre_set: np.ndarray) -> np.ndarray:
        """Post-states whose functional coordinates match some state in pre_set."""
        table = np.zeros(1 << self.nf, dtype=bool)
        table[self.fval[pre_set]] = True
        return table[self.proj]

    def _q_for(self, p: int) -> np.ndarray:
        out = self.guard_post.copy()
        k = 0
        while p:
            if p & 1:
                out &= self.impls[k][1]
            p >>= 1
            k += 1
        return out

    def groups(self):
        if self._groups is None and self.pkey is None:
            self._groups = [(0, self.guard_pre)]
        if self._groups is None:
            keys = np.unique(self.pkey[self.guard_pre]) if self.guard_pre.any() else []
            self._groups = [(int(p), (self.pkey == p) & self.guard_pre) for p in keys]
        return self._groups

    # -- operators
    def image(self, a: np.ndarray) -> np.ndarray:
        a = a & self.guard_pre
        out = np.zeros(self.eng.size, dtype=bool)
        if not a.any():
            return out
        if self.mixed:
            for rows in _chunks(np.flatnonzero(a), self.eng.size):
                out |= self._pair_block(rows).any(axis=0)
            return out
        if self.impls:
            keys = np.unique(self.pkey[a])
        else:
            keys = [0]
        for p in keys:
            ap = a & (self.pkey == p) if self.impls else a
            out |= self._hit(ap) & self._q_for(int(p))
        return out

    def preimage(self, b: np.ndarray) -> np.ndarray:
        b = b & self.guard_post
        out = np.zeros(self.eng.size, dtype=bool)
        if not b.any():
            return out
        if self.mixed:
            rows_all = np.flatnonzero(self.guard_pre)
            for rows in _chunks(rows_all, self.eng.size):
                out[rows] = (self._pair_block(rows) & b[None, :]).any(axis=1)
            return out
        for p, gmask in self.groups():
            bp = b & self._q_for(p)
            if not bp.any():
                continue
            table = np.zeros(1 << self.nf, dtype=bool)
            table[self.proj[bp]] = True
            out |= gmask & table[self.fval]
        return out

    def meets(self, a: np.ndarray, b: np.ndarray) -> bool:
        """Is there a transition from a state of ``a`` into a state of ``b``?"""
        a = a & self.guard_pre
        b = b & self.guard_post
        if not a.any() or not b.any():
            return False
        if self.mixed:
            for rows in _chunks(np.flatnonzero(a), self.eng.size):
                if (self._pair_block(rows) & b[None, :]).any():
                    return True
            return False
        keys = np.unique(self.pkey[a]) if self.impls else [0]
        for p in keys:
            ap = a & (self.pkey == p) if self.impls else a
            bp = b & self._q_for(int(p)) if self.impls else b
            if not bp.any():
                continue
            table = np.zeros(1 << self.nf, dtype=bool)
            table[self.proj[bp]] = True
            if table[self.fval[ap]].any():
                return True
        return False

    def _pair_block(self, rows: np.ndarray) -> np.ndarray:
        """rows x all-states matrix of δ restricted to the given pre-states."""
        cols = self.eng.index
        m = (self.proj[None, :] == self.fval[rows][:, None]) & self.guard_post[None, :]
        m &= self.guard_pre[rows][:, None]
        for p, q in self.impls:
            m &= ~p[rows][:, None] | q[None, :]
        for c in self.mixed:
            m &= self.eng.pair_mask(c, rows[:, None], cols[None, :])
        return m

    def successors(self, sigma: int) -> np.ndarray:
        a = np.zeros(self.eng.size, dtype=bool)
        a[sigma] = True
        return self.image(a)

    def holds(self, sigma: int, sigma_post: int) -> bool:
        return bool(self.successors(sigma)[sigma_post])


def _chunks(rows: np.ndarray, width: int):
    step = max(1, _PAIR_CHUNK // width)
    for i in range(0, len(rows), step):
        yield rows[i:i + step]


def _functional(c: Formula):
    """Recognize v′ ↔ f(Σ) (either orientation, optionally negated var)."""
    if not isinstance(c, Iff):
        return None
    for lhs, rhs in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
        body_neg = False
        v = lhs
        if isinstance(v, Not) and isinstance(v.arg, Var):
            v, body_neg = v.arg, True
        if isinstance(v, Var) and v.primed:
            pre, post = _sides(rhs)
            if not post:
                return v.name, (neg(rhs) if body_neg else rhs)
    return None


def _split_implication(c: Formula):
    """Rewrite c as P(Σ) → Q(Σ′) when its parts separate."""
    if isinstance(c, Implies):
        lp, lq = _sides(c.lhs)
        rp, rq = _sides(c.rhs)
        if not lq and not rp:
            return c.lhs, c.rhs
        if not lp and not rq:
            return neg(c.rhs), neg(c.lhs)
        return None
    if isinstance(c, Or):
        pre_parts, post_parts = [], []
        for a in c.args:
            p, q = _sides(a)
            if p and q:
                return None
            (post_parts if q else pre_parts).append(a)
        return neg(disj(pre_parts)), disj(post_parts)
    return None


# ---------------------------------------------------------------------------
# ground truth


@dataclass
class ReachabilityReport:
    vocab: Vocabulary
    reachable_mask: np.ndarray
    diameter: int
    safe: bool
    trace: Optional[list]
    layers: list = field(repr=False, default_factory=list)

    @property
    def reachable(self) -> frozenset:
        eng = engine_for(self.vocab)
        return frozenset(eng.states(self.reachable_mask))

    def reachable_formula(self) -> Formula:
        return formula_from_models(self.vocab, self.reachable_mask)


def bfs_reach(ts: TransitionSystem) -> ReachabilityReport:
    """Exact reachable set, diameter, and a shortest counterexample when unsafe."""
    check_size(ts.vocab)
    eng = ts.engine
    rel = ts.relation
    init = eng.mask(ts.init)
    bad = eng.mask(ts.bad)
    reach = init.copy()
    layers = [init.copy()]
    frontier = init
    while True:
        nxt = rel.image(frontier) & ~reach
        if not nxt.any():
            break
        layers.append(nxt)
        reach |= nxt
        frontier = nxt
    safe = not bool((reach & bad).any())
    trace = None
    if not safe:
        depth = next(i for i, layer in enumerate(layers) if (layer & bad).any())
        s = int(np.argmax(layers[depth] & bad))
        path = [s]
        for j in range(depth - 1, -1, -1):
            single = np.zeros(eng.size, dtype=bool)
            single[s] = True
            s = int(np.argmax(rel.preimage(single) & layers[j]))
            path.append(s)
        trace = [State(ts.vocab, s) for s in reversed(path)]
    return ReachabilityReport(ts.vocab, reach, len(layers) - 1, safe, trace, layers)


@dataclass(frozen=True)
class InvariantVerdict:
    kind: str  # ok | fails-initiation | fails-consecution | fails-safety
    pre: Optional[State] = None
    post: Optional[State] = None

    @property
    def ok(self) -> bool:
        return self.kind == "ok"

    def __bool__(self) -> bool:
        return self.ok


def check_invariant(ts: TransitionSystem, inv) -> InvariantVerdict:
    eng = ts.engine
    m = eng.mask(inv)
    bad_init = eng.mask(ts.init) & ~m
    if bad_init.any():
        return InvariantVerdict("fails-initiation", State(ts.vocab, int(np.argmax(bad_init))))
    rel = ts.relation
    leaving = m & rel.preimage(~m)
    if leaving.any():
        s = int(np.argmax(leaving))
        t = int(np.argmax(rel.successors(s) & ~m))
        return InvariantVerdict("fails-consecution", State(ts.vocab, s), State(ts.vocab, t))
    unsafe = m & eng.mask(ts.bad)
    if unsafe.any():
        return InvariantVerdict("fails-safety", State(ts.vocab, int(np.argmax(unsafe))))
    return InvariantVerdict("ok")


def is_inductive(ts: TransitionSystem, inv) -> bool:
    """Consecution alone: inv ∧ δ ⟹ inv′."""
    m = ts.engine.mask(inv)
    return not bool((m & ts.relation.preimage(~m)).any())


def dualize(x):
    """Dual system (Bad, δ with Σ/Σ′ exchanged, Init), or ¬f for a formula.

    A Cnf dualizes to the DNF with one cube per clause.
    """
    if isinstance(x, TransitionSystem):
        return TransitionSystem(x.vocab, x.bad, swap_primes(x.delta), x.init)
    if isinstance(x, Cnf):
        return x.negated()
    return neg(as_formula(x))


# ---------------------------------------------------------------------------
# text format


def format_ts(ts: TransitionSystem) -> str:
    return (
        "vars: " + " ".join(ts.vocab.vars) + "\n"
        + "init: " + to_sexpr(ts.init) + "\n"
        + "delta: " + to_sexpr(ts.delta) + "\n"
        + "bad: " + to_sexpr(ts.bad) + "\n"
    )


def parse_ts(text: str) -> TransitionSystem:
    fields: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or key not in ("vars", "init", "delta", "bad"):
            raise DomainError(f"unrecognized line {raw!r}")
        if key in fields:
            raise DomainError(f"duplicate field {key!r}")
        fields[key] = value.strip()
    missing = {"vars", "init", "delta", "bad"} - set(fields)
    if missing:
        raise DomainError("missing fields: " + ", ".join(sorted(missing)))
    vocab = Vocabulary(tuple(fields["vars"].split()))
    return TransitionSystem(
        vocab,
        parse_sexpr(fields["init"], vocab),
        parse_sexpr(fields["delta"], vocab),
        parse_sexpr(fields["bad"], vocab),
    )


def load_ts(path) -> TransitionSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_ts(fh.read())


def save_ts(ts: TransitionSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_ts(ts))
