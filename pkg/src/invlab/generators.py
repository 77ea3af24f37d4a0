"""Transition-system families with ground-truth metadata.

* ``gen_qbf2_system``: the ∃y∀x reduction system F_φ over y, x, a, b, e.
* ``gen_maximal`` / ``gen_monmax_family`` / ``gen_badts``: maximal systems
  φ → φ′ and the all-transitions unsafe system.
* ``gen_add_even`` / ``gen_add_even_maximal``: the add-double example with a
  rotating least significant bit selected by one-hot c.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError, ResourceError
from .formula import (
    FALSE,
    TRUE,
    Clause,
    Cnf,
    Formula,
    Iff,
    Implies,
    Literal,
    Not,
    Var,
    Vocabulary,
    conj,
    disj,
    neg,
    prime,
    xor,
)
from .semantics import engine_for, formula_from_models
from .transition_system import TransitionSystem

MAX_QBF_K = 8


@dataclass(frozen=True)
class GroundTruth:
    safe: bool
    invariant: Optional[Cnf] = None

    def __str__(self):
        if not self.safe:
            return "unsafe"
        return "safe" if self.invariant is None else f"safe_with_invariant({self.invariant})"


@dataclass
class FamilyInstance:
    ts: TransitionSystem
    ground_truth: GroundTruth
    family: str
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.ts.vocab)


# ---------------------------------------------------------------------------
# ∃y∀x reduction


def qbf_vocab(k: int) -> Vocabulary:
    return Vocabulary(tuple(f"y{i}" for i in range(1, k + 1)) + tuple(f"x{i}" for i in range(1, k + 1)))


def sigma_vocab(k: int) -> Vocabulary:
    return Vocabulary(qbf_vocab(k).vars + ("a", "b", "e"))


@dataclass(frozen=True)
class Qbf2Instance:
    """∃y∀x φ(y, x) with φ over y1..yk, x1..xk.

    Valuations are indexed by y + 2^k·x with y1 (and x1) least significant;
    increasing index over y is the lexicographic order used for witnesses.
    """

    k: int
    phi: Formula

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("k must be at least 1")
        if self.k > MAX_QBF_K:
            raise ResourceError(f"k={self.k} exceeds the supported maximum {MAX_QBF_K}")
        names = set(qbf_vocab(self.k).vars)
        from .formula import free_vars

        for v, primed in free_vars(self.phi):
            if primed or v not in names:
                raise DomainError(f"phi mentions {v!r} outside y1..yk, x1..xk")

    @classmethod
    def from_table(cls, k: int, table) -> "Qbf2Instance":
        """φ given as a truth table (bool array of length 4^k, or an int bitmask)."""
        size = 1 << (2 * k)
        if isinstance(table, (int, np.integer)):
            table = np.array([(int(table) >> i) & 1 for i in range(size)], dtype=bool)
        return cls(k, formula_from_models(qbf_vocab(k), np.asarray(table, dtype=bool)))

    def table(self) -> np.ndarray:
        return engine_for(qbf_vocab(self.k)).mask(self.phi).copy()

    def witnesses(self) -> list[int]:
        """y-values (as integers) with ∀x φ(y, x), ascending."""
        k = self.k
        grid = self.table().reshape(1 << k, 1 << k)  # [x, y]
        return [int(y) for y in np.flatnonzero(grid.all(axis=0))]

    def truth(self) -> bool:
        return bool(self.witnesses())

    def first_witness(self) -> Optional[tuple[bool, ...]]:
        w = self.witnesses()
        if not w:
            return None
        return tuple(bool((w[0] >> i) & 1) for i in range(self.k))


def qbf2_truth_bruteforce(k: int, phi: Formula) -> bool:
    """Independent loop-based evaluation of ∃y∀x φ."""
    from .formula import State, evaluate

    vocab = qbf_vocab(k)
    for y in itertools.product((False, True), repeat=k):
        ok = True
        for x in itertools.product((False, True), repeat=k):
            if not evaluate(phi, State.from_values(vocab, y[::-1] + x[::-1])):
                ok = False
                break
        if ok:
            return True
    return False


def init_k(k: int) -> Formula:
    vocab = sigma_vocab(k)
    return conj([Not(Var(v)) for v in vocab.vars if v != "b"] + [Var("b")])


def bad_k(k: int) -> Formula:
    return Var("e")


def qbf2_delta(q: Qbf2Instance) -> Formula:
    """Deterministic next-state function of F_φ, one biconditional per variable."""
    k = q.k
    ys = [Var(f"y{i}") for i in range(1, k + 1)]
    xs = [Var(f"x{i}") for i in range(1, k + 1)]
    a, b, e = Var("a"), Var("b"), Var("e")
    allx = conj(xs)
    ally = conj(ys)
    falsified = neg(q.phi)
    parts = []
    for i, x in enumerate(xs):
        parts.append(Iff(prime(x), xor(x, conj(xs[:i]))))
    for i, y in enumerate(ys):
        parts.append(Iff(prime(y), xor(y, conj([allx] + ys[:i]))))
    a_after = disj(a, falsified)
    parts.append(Iff(prime(a), conj(neg(allx), a_after)))
    b_next = conj(b, disj(neg(allx), a_after))
    parts.append(Iff(prime(b), b_next))
    # e latches b at the end of the last y block and is sticky otherwise
    last = conj(allx, ally)
    parts.append(Iff(prime(e), disj(conj(last, b_next), conj(neg(last), e))))
    return conj(parts)


def _lt_clauses(vocab: Vocabulary, v: Sequence[bool]) -> list[frozenset]:
    """Clauses of y < v, built from y1 (least significant) up to yk."""
    clauses = [frozenset()]
    for d, bit in enumerate(v):
        lit = Literal(vocab.index(f"y{d + 1}"), False)
        if bit:
            clauses = [c | {lit} for c in clauses]
        else:
            clauses = clauses + [frozenset({lit})]
    return clauses


def _increment(v: Sequence[bool]) -> Optional[tuple[bool, ...]]:
    out = list(v)
    for i in range(len(out)):
        if out[i]:
            out[i] = False
        else:
            out[i] = True
            return tuple(out)
    return None


def build_sigma2_invariant(q: Qbf2Instance, v: Sequence[bool]) -> Cnf:
    """¬e ∧ (b → y ≤ v) ∧ (b ∧ a → y < v) as a monotone CNF.

    ``v`` lists y1..yk.  It should be the first witness; otherwise a
    RuntimeWarning is emitted and the result may not be inductive.
    """
    import warnings

    k = q.k
    v = tuple(bool(b) for b in v)
    if len(v) != k:
        raise DomainError("witness length must equal k")
    if q.first_witness() != v:
        warnings.warn("build_sigma2_invariant: v is not the first witness", RuntimeWarning, stacklevel=2)
    vocab = sigma_vocab(k)
    na, nb, ne = (Literal(vocab.index(s), False) for s in ("a", "b", "e"))
    clauses = [frozenset({ne})]
    up = _increment(v)
    if up is not None:
        clauses += [c | {nb} for c in _lt_clauses(vocab, up)]
    clauses += [c | {nb, na} for c in _lt_clauses(vocab, v)]
    return Cnf(vocab, [Clause(c) for c in clauses]).without_subsumed()


def gen_qbf2_system(q: Qbf2Instance) -> FamilyInstance:
    k = q.k
    vocab = sigma_vocab(k)
    ts = TransitionSystem(vocab, init_k(k), qbf2_delta(q), bad_k(k))
    w = q.first_witness()
    if w is None:
        truth = GroundTruth(False)
    else:
        truth = GroundTruth(True, build_sigma2_invariant(q, w))
    return FamilyInstance(ts, truth, "qbf2", {"n": len(vocab), "k": k, "m": len(truth.invariant) if truth.invariant else 0})


def random_qbf2(k: int, rng: random.Random, density: Optional[float] = None) -> Qbf2Instance:
    """Random truth table for φ.

    The default density makes ∃y∀x φ true with probability about one half.
    """
    size = 1 << (2 * k)
    if density is None:
        row = 1 - 0.5 ** (1 / (1 << k))
        density = row ** (1 / (1 << k))
    table = np.array([rng.random() < density for _ in range(size)], dtype=bool)
    return Qbf2Instance.from_table(k, table)


def build_agreeing_pair(valuations, k: int) -> tuple[Formula, Formula]:
    """ψ1 true except on the false-labeled valuations, ψ2 false except on the true-labeled ones.

    A valuation is an index y + 2^k·x or a sequence y1..yk, x1..xk.
    """
    valuations = list(valuations)
    if len(valuations) >= (1 << k):
        raise ContractError("need fewer than 2^k labeled valuations")
    vocab = qbf_vocab(k)

    def bits(val):
        if isinstance(val, (int, np.integer)):
            return [bool((int(val) >> i) & 1) for i in range(2 * k)]
        val = list(val)
        if len(val) != 2 * k:
            raise DomainError("valuation must assign y1..yk, x1..xk")
        return [bool(b) for b in val]

    def cube_f(bs):
        return conj(Var(vocab.vars[i]) if b else Not(Var(vocab.vars[i])) for i, b in enumerate(bs))

    false_ones = [bits(v) for v, label in valuations if not label]
    true_ones = [bits(v) for v, label in valuations if label]
    psi1 = conj(neg(cube_f(bs)) for bs in false_ones)
    psi2 = disj(cube_f(bs) for bs in true_ones)
    return psi1, psi2


# ---------------------------------------------------------------------------
# maximal systems


def gen_maximal(phi: Cnf, init, bad, family: str = "maximal", params: Optional[dict] = None) -> FamilyInstance:
    eng = engine_for(phi.vocab)
    if not eng.is_sat(init) or not eng.is_sat(bad):
        raise ContractError("Init and Bad must be satisfiable")
    if not eng.implies(init, phi):
        raise ContractError("Init does not imply phi")
    if eng.is_sat(conj(phi, bad)):
        raise ContractError("phi does not imply not Bad")
    pf = phi.to_formula()
    ts = TransitionSystem(phi.vocab, init, Implies(pf, prime(pf)), bad)
    p = {"n": len(phi.vocab), "m": len(phi)}
    p.update(params or {})
    return FamilyInstance(ts, GroundTruth(True, phi), family, p)


def random_monotone_phi(k: int, rng: random.Random, max_tries: int = 1000) -> Cnf:
    """Random φ ∈ MonCNF_{2k+1} over Σ_k with Init_k ⟹ φ ⟹ ¬Bad_k.

    A monotone φ implies ¬e only through the unit clause ¬e, so that clause
    is always present; the clause ¬b is the only one Init_k falsifies.
    """
    vocab = sigma_vocab(k)
    n = len(vocab)
    e, b = vocab.index("e"), vocab.index("b")
    for _ in range(max_tries):
        extra = rng.randint(0, 2 * k)
        clauses = [Clause.of(Literal(e, False))]
        while len(clauses) < extra + 1:
            width = rng.randint(1, n)
            picked = rng.sample(range(n), width)
            c = Clause(frozenset(Literal(i, False) for i in picked))
            if c.literals == {Literal(b, False)}:
                continue
            clauses.append(c)
        phi = Cnf(vocab, clauses).without_subsumed()
        eng = engine_for(vocab)
        if eng.implies(init_k(k), phi) and not eng.is_sat(conj(phi, bad_k(k))) and phi.in_moncnf(2 * k + 1):
            return phi
    raise RuntimeError("rejection sampling for a monotone phi did not converge")


def gen_monmax_family(k: int, seed: int) -> FamilyInstance:
    if k > MAX_QBF_K:
        raise ResourceError("k too large")
    rng = random.Random(f"monmax-{k}-{seed}")
    phi = random_monotone_phi(k, rng)
    return gen_maximal(phi, init_k(k), bad_k(k), "monmax", {"k": k, "seed": seed})


def gen_badts(k: int) -> FamilyInstance:
    vocab = sigma_vocab(k)
    ts = TransitionSystem(vocab, init_k(k), TRUE, bad_k(k))
    return FamilyInstance(ts, GroundTruth(False), "badts", {"n": len(vocab), "k": k, "m": 0})


# ---------------------------------------------------------------------------
# add-even


def _add_even_names(n: int, with_inputs: bool) -> tuple[str, ...]:
    # bit strings are written most significant first, so declare x_n .. x_1
    names = [f"x{i}" for i in range(n, 0, -1)] + [f"c{i}" for i in range(n, 0, -1)]
    if with_inputs:
        names += [f"y{i}" for i in range(n, 0, -1)]
    return tuple(names)


def exactly_one(vs: Sequence[Formula]) -> Formula:
    return conj([disj(vs)] + [disj(Not(p), Not(q)) for p, q in itertools.combinations(vs, 2)])


def add_even_invariant(vocab: Vocabulary, n: int) -> Cnf:
    """⋀ (c_i → ¬x_i)."""
    return Cnf(vocab, [Clause.of(Literal(vocab.index(f"c{i}"), False), Literal(vocab.index(f"x{i}"), False))
                       for i in range(1, n + 1)])


def _check_n(n):
    if not 2 <= n <= 10:
        raise DomainError("add-even needs 2 <= n <= 10")


def _add_double_bits(a: list[Formula], b: list[Formula]) -> list[Formula]:
    """Bits of (a + 2b) mod 2^n, least significant first."""
    n = len(a)
    out = [a[0]]
    carry = FALSE
    for j in range(1, n):
        s = xor(xor(a[j], b[j - 1]), carry)
        out.append(s)
        carry = disj(conj(a[j], b[j - 1]), conj(carry, xor(a[j], b[j - 1])))
    return out


def gen_add_even(n: int) -> FamilyInstance:
    """x := x + 2y in the rotation whose least significant bit is x_i when c_i."""
    _check_n(n)
    vocab = Vocabulary(_add_even_names(n, True))
    xs = [Var(f"x{i}") for i in range(1, n + 1)]
    cs = [Var(f"c{i}") for i in range(1, n + 1)]
    ys = [Var(f"y{i}") for i in range(1, n + 1)]
    axiom = exactly_one(cs)
    terms = [[] for _ in range(n)]
    for i in range(n):
        rot = [(i + j) % n for j in range(n)]
        s = _add_double_bits([xs[r] for r in rot], [ys[r] for r in rot])
        for j, r in enumerate(rot):
            terms[r].append(conj(cs[i], s[j]))
    parts = [axiom]
    parts += [Iff(prime(xs[t]), disj(terms[t])) for t in range(n)]
    parts += [Iff(prime(c), c) for c in cs]
    init = conj([Not(x) for x in xs] + [axiom])
    bad = conj(xs + [axiom])
    ts = TransitionSystem(vocab, init, conj(parts), bad)
    inv = add_even_invariant(vocab, n)
    return FamilyInstance(ts, GroundTruth(True, inv), "add-even", {"n": n, "m": n})


def gen_add_even_maximal(n: int) -> FamilyInstance:
    """axiom(c) ∧ c′ = c ∧ (I → I′) with I the add-even invariant."""
    _check_n(n)
    vocab = Vocabulary(_add_even_names(n, False))
    xs = [Var(f"x{i}") for i in range(1, n + 1)]
    cs = [Var(f"c{i}") for i in range(1, n + 1)]
    axiom = exactly_one(cs)
    inv = add_even_invariant(vocab, n)
    invf = inv.to_formula()
    delta = conj([axiom] + [Iff(prime(c), c) for c in cs] + [Implies(invf, prime(invf))])
    init = conj([Not(x) for x in xs] + [axiom])
    bad = conj(xs + [axiom])
    ts = TransitionSystem(vocab, init, delta, bad)
    return FamilyInstance(ts, GroundTruth(True, inv), "add-even-maximal", {"n": n, "m": n})


FAMILIES = {
    "monmax": lambda k, seed=0: gen_monmax_family(k, seed),
    "badts": lambda k, seed=0: gen_badts(k),
    "add-even": lambda n, seed=0: gen_add_even(n),
    "add-even-maximal": lambda n, seed=0: gen_add_even_maximal(n),
}
