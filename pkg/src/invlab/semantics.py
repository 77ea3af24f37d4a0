"""Explicit-state semantics: formulas as boolean masks over all 2^n states.

State index ``s`` encodes the assignment whose bit i is variable i.  Every
set of states is a numpy bool array of length 2^n.  This is the default
satisfiability backend: full model enumeration, exact for n <= MAX_VARS.
"""
from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from .errors import DomainError, ResourceError
from .formula import (
    FALSE,
    TRUE,
    And,
    Clause,
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
    disj,
    conj,
)

MAX_VARS = 24
_CACHE_BYTES = 384 << 20
_BIT_CACHE_VARS = 24


def check_size(vocab: Vocabulary) -> None:
    if len(vocab) > MAX_VARS:
        raise ResourceError(f"{len(vocab)} variables exceed the explicit-state limit of {MAX_VARS}")


class SemanticEngine:
    """Mask evaluation for one vocabulary, with an identity-keyed result cache.

    The cache holds a reference to every key object, so ids cannot be reused
    while an entry is alive.
    """

    def __init__(self, vocab: Vocabulary):
        check_size(vocab)
        self.vocab = vocab
        self.n = len(vocab)
        self.size = 1 << self.n
        self._bits: dict[int, np.ndarray] = {}
        self._cache: OrderedDict[int, tuple[object, np.ndarray]] = OrderedDict()
        self._cache_bytes = 0
        self._index = None

    # -- primitive columns
    def bit(self, i: int) -> np.ndarray:
        col = self._bits.get(i)
        if col is None:
            block = np.repeat(np.array([False, True]), 1 << i)
            col = np.tile(block, self.size >> (i + 1))
            col.flags.writeable = False
            if self.n <= _BIT_CACHE_VARS:
                self._bits[i] = col
        return col

    @property
    def index(self) -> np.ndarray:
        if self._index is None:
            self._index = np.arange(self.size, dtype=np.int64)
            self._index.flags.writeable = False
        return self._index

    def full(self, value: bool = True) -> np.ndarray:
        return np.full(self.size, value, dtype=bool)

    # -- cache
    def _cache_get(self, obj):
        hit = self._cache.get(id(obj))
        if hit is not None and hit[0] is obj:
            self._cache.move_to_end(id(obj))
            return hit[1]
        return None

    def _cache_put(self, obj, mask):
        if mask.nbytes > _CACHE_BYTES // 4:
            return
        mask.flags.writeable = False
        old = self._cache.pop(id(obj), None)
        if old is not None:
            self._cache_bytes -= old[1].nbytes
        self._cache[id(obj)] = (obj, mask)
        self._cache_bytes += mask.nbytes
        while self._cache_bytes > _CACHE_BYTES:
            _, (_, m) = self._cache.popitem(last=False)
            self._cache_bytes -= m.nbytes

    # -- evaluation
    def mask(self, f) -> np.ndarray:
        """Set of states satisfying the unprimed formula ``f`` (read-only array)."""
        if isinstance(f, np.ndarray):
            return f
        if isinstance(f, State):
            m = np.zeros(self.size, dtype=bool)
            m[f.bits] = True
            return m
        hit = self._cache_get(f)
        if hit is not None:
            return hit
        if isinstance(f, Cnf):
            m = self._cnf_mask(f)
        elif isinstance(f, Formula):
            m = self._formula_mask(f)
        elif isinstance(f, Clause):
            m = self.clause_mask(f)
        else:
            raise TypeError(f"cannot evaluate {type(f).__name__}")
        self._cache_put(f, m)
        return m

    def _cnf_mask(self, f: Cnf) -> np.ndarray:
        if f.vocab != self.vocab:
            raise DomainError("cnf over a different vocabulary")
        start = 0
        m = None
        if f._base is not None:
            base = self._cache_get(f._base)
            if base is not None and f.clauses[: len(f._base.clauses)] == f._base.clauses:
                m = base.copy()
                start = len(f._base.clauses)
        if m is None:
            m = self.full(True)
        for c in f.clauses[start:]:
            m &= self.clause_mask(c)
        return m

    def clause_mask(self, c) -> np.ndarray:
        out = np.zeros(self.size, dtype=bool)
        for l in c.literals:
            b = self.bit(l.var)
            out |= b if l.positive else ~b
        return out

    def _formula_mask(self, f: Formula) -> np.ndarray:
        n = self.size
        refs = _parent_counts(f)
        memo: dict[int, np.ndarray] = {}

        def take(g):
            # intermediate masks are dropped as soon as their last parent used them
            r = go(g)
            key = id(g)
            refs[key] -= 1
            if refs[key] <= 0:
                memo.pop(key, None)
            return r

        def go(g):
            key = id(g)
            r = memo.get(key)
            if r is not None:
                return r
            r = self._cache_get(g) if g is not f else None
            if r is None:
                if isinstance(g, Const):
                    r = np.full(n, g.value, dtype=bool)
                elif isinstance(g, Var):
                    if g.primed:
                        raise DomainError(f"primed variable {g!r} in a state formula")
                    if g.name not in self.vocab:
                        raise DomainError(f"unbound variable {g!r}")
                    r = self.bit(self.vocab.index(g.name))
                elif isinstance(g, Not):
                    r = ~take(g.arg)
                elif isinstance(g, And):
                    r = np.ones(n, dtype=bool)
                    for a in g.args:
                        r &= take(a)
                elif isinstance(g, Or):
                    r = np.zeros(n, dtype=bool)
                    for a in g.args:
                        r |= take(a)
                elif isinstance(g, Implies):
                    r = ~take(g.lhs)
                    r |= take(g.rhs)
                elif isinstance(g, Iff):
                    r = take(g.lhs) == take(g.rhs)
                elif isinstance(g, Cnf):
                    r = self.mask(g)
                else:
                    raise TypeError(f"unknown node {g!r}")
            memo[key] = r
            return r

        r = go(f)
        if not r.flags.writeable or any(r is b for b in self._bits.values()):
            r = r.copy()
        return r

    def pair_mask(self, f: Formula, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
        """Evaluate a two-state formula on (broadcastable) arrays of state indices."""
        shape = np.broadcast(pre, post).shape
        memo: dict[int, np.ndarray] = {}

        def go(g):
            key = id(g)
            r = memo.get(key)
            if r is not None:
                return r
            if isinstance(g, Const):
                r = np.full(shape, g.value, dtype=bool)
            elif isinstance(g, Var):
                if g.name not in self.vocab:
                    raise DomainError(f"unbound variable {g!r}")
                src = post if g.primed else pre
                r = np.broadcast_to(((src >> self.vocab.index(g.name)) & 1).astype(bool), shape)
            elif isinstance(g, Not):
                r = ~go(g.arg)
            elif isinstance(g, And):
                r = np.ones(shape, dtype=bool)
                for a in g.args:
                    r = r & go(a)
            elif isinstance(g, Or):
                r = np.zeros(shape, dtype=bool)
                for a in g.args:
                    r = r | go(a)
            elif isinstance(g, Implies):
                r = ~go(g.lhs) | go(g.rhs)
            elif isinstance(g, Iff):
                r = go(g.lhs) == go(g.rhs)
            elif isinstance(g, Cnf):
                r = self.mask(g)[np.broadcast_to(pre, shape)]
            else:
                raise TypeError(f"unknown node {g!r}")
            memo[key] = r
            return r

        return np.asarray(go(f), dtype=bool)

    # -- backend queries
    def states(self, mask: np.ndarray) -> Iterator[State]:
        for s in np.flatnonzero(mask):
            yield State(self.vocab, int(s))

    def models(self, f) -> list[State]:
        return list(self.states(self.mask(f)))

    def first_model(self, f) -> State | None:
        m = self.mask(f)
        idx = int(np.argmax(m))
        return State(self.vocab, idx) if m[idx] else None

    def is_sat(self, f) -> bool:
        return bool(self.mask(f).any())

    def is_valid(self, f) -> bool:
        return bool(self.mask(f).all())

    def implies(self, a, b) -> bool:
        return not bool((self.mask(a) & ~self.mask(b)).any())

    def equivalent(self, a, b) -> bool:
        return bool(np.array_equal(self.mask(a), self.mask(b)))

    def count(self, f) -> int:
        return int(np.count_nonzero(self.mask(f)))


def _parent_counts(f) -> dict[int, int]:
    """Number of parent edges of every node in the DAG below ``f``."""
    counts: dict[int, int] = {id(f): 1}
    seen = {id(f)}
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (And, Or)):
            kids = g.args
        elif isinstance(g, Not):
            kids = (g.arg,)
        elif isinstance(g, (Implies, Iff)):
            kids = (g.lhs, g.rhs)
        else:
            continue
        for k in kids:
            counts[id(k)] = counts.get(id(k), 0) + 1
            if id(k) not in seen:
                seen.add(id(k))
                stack.append(k)
    return counts


_ENGINES: "OrderedDict[Vocabulary, SemanticEngine]" = OrderedDict()


def engine_for(vocab: Vocabulary) -> SemanticEngine:
    eng = _ENGINES.get(vocab)
    if eng is None:
        eng = SemanticEngine(vocab)
        _ENGINES[vocab] = eng
        while len(_ENGINES) > 8:
            _ENGINES.popitem(last=False)
    else:
        _ENGINES.move_to_end(vocab)
    return eng


class EnumerationBackend:
    """Satisfiability backend that decides everything by model enumeration."""

    name = "enumeration"

    def models(self, vocab, f):
        return engine_for(vocab).models(f)

    def is_sat(self, vocab, f) -> bool:
        return engine_for(vocab).is_sat(f)

    def is_valid(self, vocab, f) -> bool:
        return engine_for(vocab).is_valid(f)

    def implies(self, vocab, a, b) -> bool:
        return engine_for(vocab).implies(a, b)

    def equivalent(self, vocab, a, b) -> bool:
        return engine_for(vocab).equivalent(a, b)


_BACKEND = EnumerationBackend()


def get_backend():
    return _BACKEND


def set_backend(backend) -> None:
    """Install another backend object exposing the EnumerationBackend methods."""
    global _BACKEND
    _BACKEND = backend


def formula_from_models(vocab: Vocabulary, mask: np.ndarray) -> Formula:
    """A formula whose model set is exactly ``mask`` (hash-consed Shannon DAG)."""
    n = len(vocab)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (1 << n,):
        raise DomainError("mask length does not match the vocabulary")
    memo: dict[tuple[int, bytes], Formula] = {}

    def go(level: int, seg: np.ndarray) -> Formula:
        if not seg.any():
            return FALSE
        if seg.all():
            return TRUE
        key = (level, np.packbits(seg).tobytes())
        hit = memo.get(key)
        if hit is not None:
            return hit
        half = seg.size // 2
        lo = go(level - 1, seg[:half])
        hi = go(level - 1, seg[half:])
        v = Var(vocab.vars[level])
        if lo is hi:
            r = lo
        elif lo == FALSE:
            r = conj(v, hi)
        elif hi == FALSE:
            r = conj(Not(v), lo)
        elif hi == TRUE:
            r = disj(v, lo)
        elif lo == TRUE:
            r = disj(Not(v), hi)
        else:
            r = Or((And((v, hi)), And((Not(v), lo))))
        memo[key] = r
        return r

    return go(n - 1, mask)
