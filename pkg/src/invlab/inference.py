"""Invariant inference algorithms driven only through oracle handles.

Every algorithm takes Init and Bad as plain formulas (they are public in all
query models) and the transition relation as an opaque DeltaHandle.  Queries
are charged to a QueryLedger whose limits implement the budget.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import BudgetExhausted, ContractError, DomainError
from .formula import (
    And,
    Clause,
    Cnf,
    Formula,
    Literal,
    Not,
    State,
    Vocabulary,
    as_formula,
    clause_of_negated,
    conj,
    conjunction_of,
    cube_literals,
    disj,
    neg,
)
from .oracles import (
    DeltaHandle,
    QueryLedger,
    TeacherStrategy,
    extract_cti,
    hoare,
    inductiveness,
    interpolant,
)
from .semantics import engine_for

INVARIANT = "invariant"
NO_INVARIANT = "no_invariant"
BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass
class InferenceOutcome:
    result: str
    invariant: object = None
    ledger: dict = field(default_factory=dict)
    iterations: int = 0
    learned: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    cex_stream: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.result == INVARIANT


@dataclass(frozen=True)
class ClassBound:
    """Candidate class with a polynomial length bound p(n) = Σ coeffs[i]·n^i."""

    coeffs: tuple = (0, 1)
    kind: str = "cnf"  # cnf | monotone-cnf | conjunctive

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(int(c) for c in self.coeffs))
        if self.kind not in ("cnf", "monotone-cnf", "conjunctive"):
            raise DomainError(f"unknown class kind {self.kind!r}")
        if any(c < 0 for c in self.coeffs):
            raise DomainError("polynomial coefficients must be non-negative")
        for n in range(1, 65):
            if self.p(n) < n:
                raise DomainError("the length bound must satisfy p(n) >= n")

    def p(self, n: int) -> int:
        return sum(c * n ** i for i, c in enumerate(self.coeffs))

    @classmethod
    def parse(cls, text: str) -> "ClassBound":
        """``cnf:0,1`` / ``moncnf:0,2`` / ``conj:0,1``."""
        kind, _, coeffs = text.partition(":")
        kind = {"cnf": "cnf", "moncnf": "monotone-cnf", "monotone-cnf": "monotone-cnf",
                "conj": "conjunctive", "conjunctive": "conjunctive"}.get(kind.strip())
        if kind is None:
            raise DomainError(f"bad class spec {text!r}")
        vals = tuple(int(c) for c in coeffs.split(",") if c.strip()) if coeffs else (0, 1)
        return cls(vals, kind)

    def contains(self, inv, n: int) -> bool:
        if not isinstance(inv, Cnf):
            return False
        if not inv.in_cnf(self.p(n)):
            return False
        if self.kind == "monotone-cnf":
            return inv.is_monotone
        if self.kind == "conjunctive":
            return all(c.width == 1 for c in inv.clauses)
        return True


def _ledger(ledger: Optional[QueryLedger], counter: str, budget) -> QueryLedger:
    if ledger is None:
        ledger = QueryLedger()
    if budget is not None:
        ledger.limits.setdefault(counter, int(budget))
    return ledger


def negated_bad_cnf(vocab: Vocabulary, bad) -> Optional[Cnf]:
    """¬Bad as a one-clause Cnf when Bad is a conjunction of literals."""
    f = bad
    if isinstance(f, Cnf):
        if all(c.width == 1 for c in f.clauses):
            return Cnf(vocab, [clause_of_negated(next(iter(c.literals)) for c in f.clauses)])
        return None
    f = as_formula(f)
    args = f.args if isinstance(f, And) else (f,)
    lits = []
    from .formula import Var

    for a in args:
        if isinstance(a, Var) and not a.primed:
            lits.append(Literal(vocab.index(a.name), True))
        elif isinstance(a, Not) and isinstance(a.arg, Var) and not a.arg.primed:
            lits.append(Literal(vocab.index(a.arg.name), False))
        else:
            return None
    return Cnf(vocab, [clause_of_negated(lits)])


class _Candidate:
    """I = ¬Bad ∧ learned clauses, kept as a Cnf whenever ¬Bad is a clause."""

    def __init__(self, vocab: Vocabulary, bad):
        self.vocab = vocab
        base = negated_bad_cnf(vocab, bad)
        self.clausal = base is not None
        self.notbad = neg(as_formula(bad)) if base is None else None
        self.cnf = base if base is not None else Cnf(vocab, [])
        self.n_base = len(self.cnf)

    def add(self, clause: Clause):
        self.cnf = self.cnf.conjoin(clause)

    @property
    def formula(self):
        if self.clausal:
            return self.cnf
        return And((self.notbad, self.cnf))

    @property
    def learned(self) -> list[Clause]:
        return list(self.cnf.clauses[self.n_base:])


# ---------------------------------------------------------------------------
# backward reachability with pluggable blocking


def naive_block(sigma: State) -> list[Literal]:
    """The full cube of σ."""
    return cube_literals(sigma)


def pdr1_block(init, handle: DeltaHandle, sigma: State, ledger: QueryLedger) -> list[Literal]:
    """Drop literal l whenever no state reachable in ≤ 1 step satisfies cube \\ {l}.

    Literals are visited in vocabulary order and every visit issues exactly
    one Hoare query, mirrored in ``hoare_in_block``.
    """
    vocab = handle.vocab
    eng = engine_for(vocab)
    init_mask = eng.mask(init)
    d = cube_literals(sigma)
    with ledger.block():
        for lit in cube_literals(sigma):
            t = [x for x in d if x != lit]
            tf = conjunction_of(vocab, t)
            misses_init = not bool((init_mask & eng.mask(tf)).any())
            step_ok = hoare(handle, init, neg(tf), ledger)
            if misses_init and step_ok:
                d = t
    return d


def backward_reach(init, bad, handle: DeltaHandle, block: Callable, budget=None,
                   ledger: Optional[QueryLedger] = None) -> InferenceOutcome:
    """I ← ¬Bad; while {I} δ {I} fails, block the CTI pre-state returned by ``block``."""
    ledger = _ledger(ledger, "hoare_total", budget)
    vocab = handle.vocab
    eng = engine_for(vocab)
    init_mask = eng.mask(init)
    cand = _Candidate(vocab, bad)
    iterations = 0
    try:
        while True:
            inv = cand.formula
            if (init_mask & ~eng.mask(inv)).any():
                return InferenceOutcome(NO_INVARIANT, None, ledger.snapshot(), iterations, cand.learned)
            if hoare(handle, inv, inv, ledger):
                result = cand.cnf if cand.clausal else inv
                return InferenceOutcome(INVARIANT, result, ledger.snapshot(), iterations, cand.learned)
            sigma, _ = extract_cti(handle, inv, inv, ledger)
            d = block(sigma)
            cand.add(clause_of_negated(d))
            iterations += 1
    except BudgetExhausted:
        return InferenceOutcome(BUDGET_EXHAUSTED, None, ledger.snapshot(), iterations, cand.learned)


def naive(init, bad, handle: DeltaHandle, budget=None, ledger=None) -> InferenceOutcome:
    return backward_reach(init, bad, handle, naive_block, budget, ledger)


def pdr1(init, bad, handle: DeltaHandle, budget=None, ledger: Optional[QueryLedger] = None) -> InferenceOutcome:
    ledger = _ledger(ledger, "hoare_total", budget)
    block = functools.partial(_pdr1_block_for, init, handle, ledger)
    return backward_reach(init, bad, handle, block, None, ledger)


def _pdr1_block_for(init, handle, ledger, sigma):
    return pdr1_block(init, handle, sigma, ledger)


def decide_poly_inference(init, bad, handle: DeltaHandle, bound: ClassBound,
                          ledger: Optional[QueryLedger] = None) -> bool:
    """Yes iff PDR-1 with p(n)·n Block queries yields an in-class candidate that is inductive."""
    n = len(handle.vocab)
    ledger = ledger if ledger is not None else QueryLedger()
    ledger.limits.setdefault("hoare_in_block", bound.p(n) * n)
    out = pdr1(init, bad, handle, None, ledger)
    if out.result != INVARIANT:
        return False
    psi = out.invariant
    if not bound.contains(psi, n):
        return False
    eng = engine_for(handle.vocab)
    if not eng.implies(init, psi):
        return False
    try:
        return hoare(handle, psi, psi, ledger)
    except BudgetExhausted:
        return False


# ---------------------------------------------------------------------------
# Houdini


def houdini(init, bad, handle: DeltaHandle, predicates: Sequence, budget=None,
            ledger: Optional[QueryLedger] = None) -> InferenceOutcome:
    """Greatest subset of ``predicates`` whose conjunction is inductive."""
    ledger = _ledger(ledger, "hoare_total", budget)
    vocab = handle.vocab
    eng = engine_for(vocab)
    preds = [p for p in predicates if eng.implies(init, p)]
    passes = 0
    try:
        while True:
            passes += 1
            current = _conjoin_predicates(vocab, preds)
            keep = [p for p in preds if hoare(handle, current, p, ledger)]
            if len(keep) == len(preds):
                break
            preds = keep
    except BudgetExhausted:
        return InferenceOutcome(BUDGET_EXHAUSTED, None, ledger.snapshot(), passes)
    inv = _conjoin_predicates(vocab, preds)
    if eng.is_sat(conj(inv, bad)):
        return InferenceOutcome(NO_INVARIANT, None, ledger.snapshot(), passes)
    return InferenceOutcome(INVARIANT, inv, ledger.snapshot(), passes)


def _conjoin_predicates(vocab, preds):
    if all(isinstance(p, (Clause, Cnf)) for p in preds):
        clauses = []
        for p in preds:
            clauses.extend(p.clauses if isinstance(p, Cnf) else [p])
        return Cnf(vocab, clauses)
    return conj(p.to_formula(vocab) if isinstance(p, Clause) else p for p in preds)


# ---------------------------------------------------------------------------
# enumerative ICE-style learner


def clauses_in_order(vocab: Vocabulary, max_width: Optional[int] = None, monotone: bool = True) -> list[Clause]:
    """All non-tautological clauses sorted by (width, literal order)."""
    n = len(vocab)
    max_width = n if max_width is None else min(max_width, n)
    out = []
    for w in range(1, max_width + 1):
        for vs in itertools.combinations(range(n), w):
            pols = [(False,)] * w if monotone else [(False, True)] * w
            for signs in itertools.product(*pols):
                out.append(Clause(frozenset(Literal(v, s) for v, s in zip(vs, signs))))
    out.sort(key=Clause.order_key)
    return out


def cnf_hypotheses(vocab: Vocabulary, max_clauses: int, max_width: Optional[int] = None,
                   monotone: bool = True) -> Iterable[Cnf]:
    """CNFs by (clause count, clause order); the empty CNF (true) comes first."""
    clauses = clauses_in_order(vocab, max_width, monotone)
    for m in range(0, max_clauses + 1):
        for combo in itertools.combinations(clauses, m):
            yield Cnf(vocab, combo)


def ice_enum_learner(init, bad, handle: DeltaHandle, hypotheses: Optional[Iterable] = None,
                     strategy=None, budget=None, ledger: Optional[QueryLedger] = None) -> InferenceOutcome:
    """Propose the first hypothesis consistent with every counterexample seen.

    With ``hypotheses=None`` the learner falls back to singleton blocking:
    the hypothesis is ¬Bad minus every CTI pre-state seen so far.
    """
    ledger = _ledger(ledger, "inductiveness_total", budget)
    if strategy is None:
        strategy = TeacherStrategy()
    elif isinstance(strategy, str):
        strategy = TeacherStrategy(strategy)
    vocab = handle.vocab
    eng = engine_for(vocab)
    init_mask = eng.mask(init)
    bad_mask = eng.mask(bad)
    cex_pre: list[int] = []
    cex_post: list[int] = []
    stream: list = []
    proposed: list = []
    rounds = 0

    def outcome(result, inv=None):
        return InferenceOutcome(result, inv, ledger.snapshot(), rounds, candidates=proposed, cex_stream=stream)

    try:
        if hypotheses is None:
            cand = _Candidate(vocab, bad)
            while True:
                h = cand.formula
                if (init_mask & ~eng.mask(h)).any():
                    return outcome(NO_INVARIANT)
                proposed.append(h)
                res = inductiveness(handle, h, strategy, ledger)
                rounds += 1
                if res.valid:
                    return outcome(INVARIANT, cand.cnf if cand.clausal else h)
                stream.append(res.cex)
                cand.add(clause_of_negated(cube_literals(res.cex[0])))
        for h in hypotheses:
            hm = eng.mask(h)
            if (init_mask & ~hm).any() or (hm & bad_mask).any():
                continue
            if cex_pre and (hm[cex_pre] & ~hm[cex_post]).any():
                continue
            proposed.append(h)
            res = inductiveness(handle, h, strategy, ledger)
            rounds += 1
            if res.valid:
                return outcome(INVARIANT, h)
            s, t = res.cex
            stream.append(res.cex)
            cex_pre.append(s.bits)
            cex_post.append(t.bits)
        return outcome(NO_INVARIANT)
    except BudgetExhausted:
        return outcome(BUDGET_EXHAUSTED)


# ---------------------------------------------------------------------------
# interpolation


def itp_inference(init, bad, handle: DeltaHandle, k: int = 1, budget=None,
                  ledger: Optional[QueryLedger] = None) -> InferenceOutcome:
    """F ← Init; F ← F ∨ ρ with ρ from interpolant(F, ¬Bad, 1, k−1) until ρ ⟹ F.

    When Bad is k-reachable from F (ρ = ⊥) or F meets Bad, restart with k+1.
    """
    if k < 1:
        raise DomainError("unrolling depth must be at least 1")
    ledger = _ledger(ledger, "interpolation_total", budget)
    vocab = handle.vocab
    eng = engine_for(vocab)
    notbad = neg(as_formula(bad))
    bad_mask = eng.mask(bad)
    iterations = 0
    try:
        while True:
            f = as_formula(init)
            fmask = eng.mask(init)
            while True:
                if (fmask & bad_mask).any():
                    break
                rho = interpolant(handle, f, notbad, 1, k - 1, ledger)
                iterations += 1
                if rho is None:
                    break
                rmask = eng.mask(rho)
                if not (rmask & ~fmask).any():
                    return InferenceOutcome(INVARIANT, f, ledger.snapshot(), iterations)
                f = disj(f, rho)
                fmask = fmask | rmask
            k += 1
    except BudgetExhausted:
        return InferenceOutcome(BUDGET_EXHAUSTED, None, ledger.snapshot(), iterations)
    except ContractError:
        # the unrolling depth outgrew the oracle's polynomial bound
        return InferenceOutcome(NO_INVARIANT, None, ledger.snapshot(), iterations)


ALGORITHMS = {
    "naive": naive,
    "pdr1": pdr1,
    "houdini": houdini,
    "ice-enum": ice_enum_learner,
    "itp": itp_inference,
}
