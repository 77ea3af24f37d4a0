"""Instrumented query oracles over an opaque transition relation.

Algorithms get a ``DeltaHandle``: it exposes the vocabulary and nothing
else.  The relation itself lives in a private registry that only the oracle
functions below consult, and every oracle call is charged to a QueryLedger.
"""
from __future__ import annotations

import weakref
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BudgetExhausted, ContractError, DomainError
from .formula import (
    And,
    Cnf,
    Formula,
    Not,
    Or,
    State,
    Var,
    Vocabulary,
    cube,
    evaluate,
)
from .semantics import engine_for, formula_from_models
from .transition_system import TransitionSystem

COUNTERS = (
    "hoare_total",
    "hoare_in_block",
    "inductiveness_total",
    "bounded_reach_total",
    "interpolation_total",
)


@dataclass
class QueryLedger:
    """Monotone oracle counters with optional per-counter limits.

    A charge that would push a counter past its limit raises BudgetExhausted
    and leaves every counter untouched.
    """

    hoare_total: int = 0
    hoare_in_block: int = 0
    inductiveness_total: int = 0
    bounded_reach_total: int = 0
    interpolation_total: int = 0
    limits: dict = field(default_factory=dict)
    _block_depth: int = field(default=0, repr=False)

    def charge(self, counter: str) -> None:
        names = [counter]
        if counter == "hoare_total" and self._block_depth:
            names.append("hoare_in_block")
        for name in names:
            limit = self.limits.get(name)
            if limit is not None and getattr(self, name) + 1 > limit:
                raise BudgetExhausted(name, limit)
        for name in names:
            setattr(self, name, getattr(self, name) + 1)

    @contextmanager
    def block(self):
        """Hoare queries issued inside are mirrored in hoare_in_block."""
        self._block_depth += 1
        try:
            yield self
        finally:
            self._block_depth -= 1

    def snapshot(self) -> dict:
        return {name: getattr(self, name) for name in COUNTERS}


# ---------------------------------------------------------------------------
# the opaque handle


class DeltaHandle:
    """Capability for one transition system.  Only ``vocab`` is visible."""

    __slots__ = ("vocab", "__weakref__")

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab

    def __repr__(self):
        return f"DeltaHandle(<{len(self.vocab)} vars>)"


class _Hidden:
    def __init__(self, ts: TransitionSystem, depth_bound):
        self.ts = ts
        self.rel = ts.relation
        self.eng = ts.engine
        self.init = self.eng.mask(ts.init)
        self.bad = self.eng.mask(ts.bad)
        self.depth_bound = depth_bound

    def holds(self, amask, bmask) -> bool:
        """Validity of the triple: the image of α stays inside β."""
        return not self.rel.meets(amask, ~bmask)

    def image_k(self, amask, k):
        s = amask
        for _ in range(k):
            if not s.any():
                break
            s = self.rel.image(s)
        return s


_REGISTRY: "weakref.WeakKeyDictionary[DeltaHandle, _Hidden]" = weakref.WeakKeyDictionary()


def default_depth_bound(n: int) -> int:
    return max(4, n * n)


def make_handle(ts: TransitionSystem, depth_bound=default_depth_bound) -> DeltaHandle:
    h = DeltaHandle(ts.vocab)
    _REGISTRY[h] = _Hidden(ts, depth_bound)
    return h


def _hidden(handle: DeltaHandle) -> _Hidden:
    try:
        return _REGISTRY[handle]
    except (KeyError, TypeError):
        raise DomainError("not an oracle handle") from None


# ---------------------------------------------------------------------------
# Hoare queries


@dataclass(frozen=True)
class HoareVerdict:
    valid: bool
    cex: Optional[tuple] = None

    def __post_init__(self):
        if self.valid and self.cex is not None:
            raise ContractError("a valid verdict carries no counterexample")

    def __bool__(self) -> bool:
        return self.valid

    @property
    def inductive(self) -> bool:
        return self.valid


def hoare(handle: DeltaHandle, alpha, beta, ledger: QueryLedger) -> bool:
    """True iff α ∧ δ ∧ ¬β′ is unsatisfiable."""
    hid = _hidden(handle)
    amask = hid.eng.mask(alpha)
    bmask = hid.eng.mask(beta)
    ledger.charge("hoare_total")
    return hid.holds(amask, bmask)


def extract_cti(handle: DeltaHandle, alpha, beta, ledger: QueryLedger) -> tuple[State, State]:
    """A model (σ, σ′) of α ∧ δ ∧ ¬β′ found with one Hoare query per proposition.

    Pre-state propositions are fixed first, then post-state ones, each in
    vocabulary order: 2·|Σ| queries in total.
    """
    hid = _hidden(handle)
    vocab = handle.vocab
    if hid.holds(hid.eng.mask(alpha), hid.eng.mask(beta)):
        raise ContractError("extract_cti called on a valid Hoare triple")
    pre_bits = 0
    for i, name in enumerate(vocab.vars):
        v = Var(name)
        cand = And((alpha, v))
        if not hoare(handle, cand, beta, ledger):
            alpha = cand
            pre_bits |= 1 << i
        else:
            alpha = And((alpha, Not(v)))
    post_bits = 0
    for i, name in enumerate(vocab.vars):
        v = Var(name)
        cand = Or((beta, Not(v)))
        if not hoare(handle, alpha, cand, ledger):
            beta = cand
            post_bits |= 1 << i
        else:
            beta = Or((beta, v))
    return State(vocab, pre_bits), State(vocab, post_bits)


# ---------------------------------------------------------------------------
# inductiveness queries and teacher strategies

_KIND_ALIASES = {
    "first": "first-model",
    "first-model": "first-model",
    "random": "seeded-random",
    "seeded-random": "seeded-random",
    "max-ambiguity": "max-ambiguity",
    "replay": "replay",
}


@dataclass
class TeacherStrategy:
    """How an inductiveness oracle picks among counterexamples to induction.

    ``hypotheses`` feeds max-ambiguity; ``script`` feeds replay, which hands
    out a recorded cex stream verbatim.
    """

    kind: str = "first-model"
    seed: int = 0
    hypotheses: Optional[Sequence] = None
    script: Optional[Sequence] = None
    max_vars: int = 10
    _rng: object = field(default=None, init=False, repr=False)
    _alive: object = field(default=None, init=False, repr=False)
    _hmat: object = field(default=None, init=False, repr=False)
    _pos: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in _KIND_ALIASES:
            raise DomainError(f"unknown teacher strategy {self.kind!r}")
        self.kind = _KIND_ALIASES[self.kind]
        self._rng = np.random.default_rng(self.seed)

    def choose(self, hid: _Hidden, amask: np.ndarray, pre: np.ndarray) -> tuple[int, int]:
        """Pick (σ, σ′) with σ in ``pre`` (the CTI pre-states) and σ′ ∉ α."""
        rel = hid.rel
        if self.kind == "replay":
            if self.script is None or self._pos >= len(self.script):
                raise ContractError("replay script exhausted")
            s, t = self.script[self._pos]
            self._pos += 1
            s, t = int(getattr(s, "bits", s)), int(getattr(t, "bits", t))
            if not (pre[s] and rel.successors(s)[t] and not amask[t]):
                raise ContractError("replayed pair is not a counterexample here")
            return s, t
        if self.kind == "seeded-random":
            rows = np.flatnonzero(pre)
            s = int(rows[self._rng.integers(len(rows))])
            succ = np.flatnonzero(rel.successors(s) & ~amask)
            return s, int(succ[self._rng.integers(len(succ))])
        if self.kind == "max-ambiguity" and self.hypotheses and len(hid.ts.vocab) <= self.max_vars:
            return self._max_ambiguity(hid, amask, pre)
        s = int(np.argmax(pre))
        return s, int(np.argmax(rel.successors(s) & ~amask))

    def _max_ambiguity(self, hid, amask, pre):
        eng = hid.eng
        if self._hmat is None:
            self._hmat = np.array([eng.mask(h) for h in self.hypotheses], dtype=bool)
            self._alive = np.ones(len(self.hypotheses), dtype=bool)
        hm = self._hmat[self._alive]
        rows = np.flatnonzero(pre)
        block = hid.rel._pair_block(rows) & ~amask[None, :]
        if hm.shape[0]:
            # violations[σ, σ′] = #alive h with σ ∈ h and σ′ ∉ h
            viol = hm[:, rows].T.astype(np.float64) @ (~hm).astype(np.float64)
        else:
            viol = np.zeros(block.shape)
        viol[~block] = np.inf
        flat = int(np.argmin(viol))
        r, t = divmod(flat, block.shape[1])
        s = int(rows[r])
        keep = ~(self._hmat[:, s] & ~self._hmat[:, t])
        self._alive &= keep
        return s, int(t)


def _as_strategy(strategy) -> TeacherStrategy:
    if strategy is None:
        return TeacherStrategy()
    if isinstance(strategy, str):
        return TeacherStrategy(strategy)
    return strategy


def inductiveness(handle: DeltaHandle, alpha, strategy, ledger: QueryLedger) -> HoareVerdict:
    """Is α ∧ δ ⟹ α′?  Candidates must satisfy Init ⟹ α ⟹ ¬Bad."""
    hid = _hidden(handle)
    strategy = _as_strategy(strategy)
    amask = hid.eng.mask(alpha)
    if (hid.init & ~amask).any():
        raise ContractError("inductiveness query with Init not implying the candidate")
    if (amask & hid.bad).any():
        raise ContractError("inductiveness query with a candidate intersecting Bad")
    ledger.charge("inductiveness_total")
    pre = amask & hid.rel.preimage(~amask)
    if not pre.any():
        return HoareVerdict(True)
    s, t = strategy.choose(hid, amask, pre)
    return HoareVerdict(False, (State(handle.vocab, s), State(handle.vocab, t)))


# ---------------------------------------------------------------------------
# bounded reachability and interpolation


def _check_depth(hid: _Hidden, handle: DeltaHandle, *ks: int):
    bound = hid.depth_bound(len(handle.vocab)) if callable(hid.depth_bound) else hid.depth_bound
    for k in ks:
        if k < 0:
            raise ContractError("negative unrolling depth")
        if bound is not None and k > bound:
            raise ContractError(f"depth {k} exceeds the configured bound {bound}")


def bounded_reach(handle: DeltaHandle, alpha, beta, k: int, ledger: QueryLedger) -> bool:
    """True iff every state reached in exactly k steps from α satisfies β."""
    hid = _hidden(handle)
    _check_depth(hid, handle, k)
    ledger.charge("bounded_reach_total")
    reached = hid.image_k(hid.eng.mask(alpha), k)
    return not bool((reached & ~hid.eng.mask(beta)).any())


def interpolant(handle: DeltaHandle, alpha, beta, k1: int, k2: int, ledger: QueryLedger) -> Optional[Formula]:
    """The exact k1-step image of α, or None when β is violated at depth k1+k2."""
    hid = _hidden(handle)
    _check_depth(hid, handle, k1, k2, k1 + k2)
    ledger.charge("interpolation_total")
    mid = hid.image_k(hid.eng.mask(alpha), k1)
    end = hid.image_k(mid, k2)
    if (end & ~hid.eng.mask(beta)).any():
        return None
    return formula_from_models(handle.vocab, mid)


# ---------------------------------------------------------------------------
# membership / equivalence over maximal systems


def initial_formula(handle: DeltaHandle):
    """Init of the handle's system; Init and Bad are public in every query model."""
    return _hidden(handle).ts.init


def bad_formula(handle: DeltaHandle):
    return _hidden(handle).ts.bad


def membership_via_hoare(handle: DeltaHandle, sigma: State, ledger: QueryLedger) -> bool:
    """σ ⊨ φ for a maximal system, via σ ⊨ Init or ¬H(Init, ¬cube(σ))."""
    hid = _hidden(handle)
    if hid.init[sigma.bits]:
        return True
    return not hoare(handle, hid.ts.init, Not(cube(sigma).to_formula()), ledger)


@dataclass(frozen=True)
class LabeledExample:
    state: State
    positive: bool


@dataclass(frozen=True)
class EquivalenceResult:
    equivalent: bool
    example: Optional[LabeledExample] = None

    def __bool__(self):
        return self.equivalent


def equivalence_via_inductiveness(handle: DeltaHandle, theta, strategy, ledger: QueryLedger) -> EquivalenceResult:
    """Equivalence query against the unique invariant φ of a maximal system.

    A CTI (σ, σ′) of θ is disambiguated by one membership query on σ: if
    σ ⊨ φ then σ′ ⊨ φ ∧ ¬θ (positive), otherwise σ ⊨ θ ∧ ¬φ (negative).
    """
    res = inductiveness(handle, theta, strategy, ledger)
    if res.valid:
        return EquivalenceResult(True)
    s, t = res.cex
    if membership_via_hoare(handle, s, ledger):
        return EquivalenceResult(False, LabeledExample(t, True))
    return EquivalenceResult(False, LabeledExample(s, False))
