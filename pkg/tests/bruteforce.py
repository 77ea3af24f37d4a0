"""Pure-Python reference computations used as independent oracles in tests.

Nothing here touches the numpy engine or the compiled relation: every answer
is obtained by evaluating formulas state by state.
"""
import random
from collections import deque

from invlab.formula import And, Iff, Implies, Not, Or, State, Var, evaluate


def all_states(vocab):
    return [State(vocab, b) for b in range(1 << len(vocab))]


def models(vocab, f):
    return {s.bits for s in all_states(vocab) if evaluate(f, s)}


def successors(ts, s):
    return {t.bits for t in all_states(ts.vocab) if evaluate(ts.delta, s, t)}


def pairs(ts):
    sts = all_states(ts.vocab)
    return {(s.bits, t.bits) for s in sts for t in sts if evaluate(ts.delta, s, t)}


def reach(ts):
    """(reachable set, diameter) by breadth-first search."""
    init = models(ts.vocab, ts.init)
    seen = set(init)
    frontier = deque((s, 0) for s in init)
    depth = 0
    sts = all_states(ts.vocab)
    while frontier:
        s, d = frontier.popleft()
        depth = max(depth, d)
        for t in sts:
            if t.bits not in seen and evaluate(ts.delta, sts[s], t):
                seen.add(t.bits)
                frontier.append((t.bits, d + 1))
    return seen, depth


def hoare(ts, alpha, beta):
    a = models(ts.vocab, alpha)
    b = models(ts.vocab, beta)
    sts = all_states(ts.vocab)
    for s in a:
        for t in sts:
            if t.bits not in b and evaluate(ts.delta, sts[s], t):
                return False
    return True


def is_invariant(ts, inv):
    m = models(ts.vocab, inv)
    if not models(ts.vocab, ts.init) <= m:
        return False
    if m & models(ts.vocab, ts.bad):
        return False
    return hoare(ts, inv, inv)


def random_formula(rng: random.Random, vocab, depth=3, primed=False):
    names = list(vocab.vars)
    if depth == 0 or rng.random() < 0.25:
        return Var(rng.choice(names), primed and rng.random() < 0.5)
    op = rng.choice(["not", "and", "or", "imp", "iff"])
    sub = lambda: random_formula(rng, vocab, depth - 1, primed)  # noqa: E731
    if op == "not":
        return Not(sub())
    if op == "and":
        return And(tuple(sub() for _ in range(rng.randint(2, 3))))
    if op == "or":
        return Or(tuple(sub() for _ in range(rng.randint(2, 3))))
    if op == "imp":
        return Implies(sub(), sub())
    return Iff(sub(), sub())
