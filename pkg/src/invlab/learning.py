"""Exact identification of the hidden φ of an F_φ system by majority vote.

The hypothesis space is every truth table over the 2k quantified variables.
Each round builds the system of the majority hypothesis, asks one Hoare
query comparing one-step behavior from a probe set α, and on failure reads
the differing valuation off the pre-state of an extracted counterexample.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ResourceError
from .formula import Formula, Not, Var, conj
from .generators import Qbf2Instance, gen_qbf2_system, qbf_vocab, sigma_vocab
from .oracles import DeltaHandle, QueryLedger, extract_cti, hoare
from .semantics import engine_for, formula_from_models

MAX_HALVING_K = 2


def probe_alpha(kind: str = "observing") -> Formula:
    """States from which one step reveals φ(y, x).

    ``observing`` is ¬a ∧ b ∧ ¬e.  ``blind-at-wrap`` is ¬a ∧ ¬b ∧ ¬e, which
    cannot see φ at x = 1 because a is reset and b is already false there.
    """
    if kind == "observing":
        return conj(Not(Var("a")), Var("b"), Not(Var("e")))
    if kind == "blind-at-wrap":
        return conj(Not(Var("a")), Not(Var("b")), Not(Var("e")))
    raise ValueError(f"unknown probe {kind!r}")


def all_tables(k: int) -> np.ndarray:
    """Every truth table over 2k variables as rows of a bool matrix."""
    size = 1 << (2 * k)
    idx = np.arange(1 << size, dtype=np.int64)
    return ((idx[:, None] >> np.arange(size)) & 1).astype(bool)


def post_image(k: int, table: np.ndarray, alpha: Formula) -> np.ndarray:
    """One-step image of α under the hypothesis system F_table."""
    ts = gen_qbf2_system(Qbf2Instance.from_table(k, table)).ts
    return ts.relation.image(ts.engine.mask(alpha))


def observable_valuations(k: int, alpha: Formula) -> set[int]:
    """Valuations v whose φ-value changes the one-step image of α."""
    size = 1 << (2 * k)
    base = post_image(k, np.zeros(size, dtype=bool), alpha)
    seen = set()
    for v in range(size):
        t = np.zeros(size, dtype=bool)
        t[v] = True
        if not np.array_equal(post_image(k, t, alpha), base):
            seen.add(v)
    return seen


@dataclass
class HalvingResult:
    table: np.ndarray
    rounds: int
    counterexamples: int
    sizes: list = field(default_factory=list)

    def as_int(self) -> int:
        return int(sum(1 << i for i, b in enumerate(self.table) if b))


def halving_identify_delta(handle: DeltaHandle, k: int, ledger: Optional[QueryLedger] = None,
                           probe: str = "observing") -> HalvingResult:
    if k > MAX_HALVING_K:
        raise ResourceError(f"halving enumerates 2^(4^k) tables; k={k} is too large")
    ledger = ledger if ledger is not None else QueryLedger()
    vocab = handle.vocab
    if vocab != sigma_vocab(k):
        raise ValueError("handle vocabulary is not the F_phi vocabulary for this k")
    alpha = probe_alpha(probe)
    space = all_tables(k)
    sizes = [len(space)]
    rounds = 0
    cexs = 0
    while True:
        rounds += 1
        votes = space.sum(axis=0)
        majority = 2 * votes >= len(space)
        beta = formula_from_models(vocab, post_image(k, majority, alpha))
        if hoare(handle, alpha, beta, ledger):
            return HalvingResult(majority, rounds, cexs, sizes)
        if len(space) == 1:
            raise RuntimeError("hypothesis space exhausted without agreement")
        sigma, _ = extract_cti(handle, alpha, beta, ledger)
        cexs += 1
        v = 0
        for i in range(2 * k):
            if sigma.value(i):
                v |= 1 << i
        space = space[space[:, v] != majority[v]]
        sizes.append(len(space))


def table_of(phi: Formula, k: int) -> np.ndarray:
    return engine_for(qbf_vocab(k)).mask(phi).copy()
