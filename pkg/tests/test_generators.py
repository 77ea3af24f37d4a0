import itertools
import random
import warnings

import numpy as np
import pytest

import bruteforce as bf
from invlab.errors import ContractError, DomainError
from invlab.formula import Clause, Cnf, Literal, State, Var, Vocabulary, conj, evaluate
from invlab.generators import (
    FAMILIES,
    Qbf2Instance,
    build_agreeing_pair,
    build_sigma2_invariant,
    gen_add_even,
    gen_add_even_maximal,
    gen_badts,
    gen_maximal,
    gen_monmax_family,
    gen_qbf2_system,
    qbf2_truth_bruteforce,
    qbf_vocab,
    random_qbf2,
    sigma_vocab,
)
from invlab.semantics import engine_for
from invlab.transition_system import bfs_reach, check_invariant


def phi_value(q, y, x):
    """φ(y, x) with y, x given as integers (bit i = variable i+1)."""
    k = q.k
    vals = [bool((y >> i) & 1) for i in range(k)] + [bool((x >> i) & 1) for i in range(k)]
    return evaluate(q.phi, State.from_values(qbf_vocab(k), vals))


def simulate(q, steps):
    """Run the F_φ counter machine directly; return the first step with e set, or None."""
    k = q.k
    top = (1 << k) - 1
    y = x = 0
    a, b, e = False, True, False
    for step in range(1, steps + 1):
        allx, ally = x == top, y == top
        a_after = a or not phi_value(q, y, x)
        nb = b and (not allx or a_after)
        na = (not allx) and a_after
        ne = nb if (allx and ally) else e
        x = (x + 1) & top
        if allx:
            y = (y + 1) & top
        a, b, e = na, nb, ne
        if e:
            return step
    return None


@pytest.mark.parametrize("k", [1, 2])
def test_f_phi_matches_direct_simulation(k):
    rng = random.Random(k)
    for _ in range(25):
        q = random_qbf2(k, rng)
        truth = qbf2_truth_bruteforce(k, q.phi)
        assert truth == q.truth()
        hit = simulate(q, (1 << (2 * k)) + 4)
        rep = bfs_reach(gen_qbf2_system(q).ts)
        assert rep.safe == truth == (hit is None)
        if not truth:
            assert hit == 1 << (2 * k)
            assert len(rep.trace) - 1 == hit


@pytest.mark.parametrize("k", [1, 2, 3])
def test_sigma2_invariant_is_monotone_and_inductive(k):
    rng = random.Random(100 + k)
    safe = 0
    for _ in range(20):
        inst = gen_qbf2_system(random_qbf2(k, rng))
        if not inst.ground_truth.safe:
            continue
        safe += 1
        inv = inst.ground_truth.invariant
        assert inv.in_moncnf(2 * k + 1)
        assert check_invariant(inst.ts, inv).ok
    assert safe > 0


def test_sigma2_invariant_on_all_k1_tables():
    for t in range(16):
        q = Qbf2Instance.from_table(1, t)
        inst = gen_qbf2_system(q)
        assert inst.ground_truth.safe == qbf2_truth_bruteforce(1, q.phi)
        if inst.ground_truth.safe:
            assert bf.is_invariant(inst.ts, inst.ground_truth.invariant)


def test_sigma2_invariant_warns_on_a_non_minimal_witness():
    q = Qbf2Instance.from_table(1, 0b1111)
    with pytest.warns(RuntimeWarning):
        build_sigma2_invariant(q, (True,))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_sigma2_invariant(q, (False,))


def test_qbf_instance_validation():
    with pytest.raises(DomainError):
        Qbf2Instance(0, Var("y1"))
    with pytest.raises(DomainError):
        Qbf2Instance(1, Var("a"))
    q = Qbf2Instance.from_table(1, 0b1010)
    # index = y + 2x: true at (y=1,x=0) and (y=1,x=1)
    assert q.witnesses() == [1] and q.first_witness() == (True,)


def test_random_qbf2_is_roughly_balanced_and_deterministic():
    rng = random.Random(5)
    truths = [random_qbf2(2, rng).truth() for _ in range(200)]
    assert 50 < sum(truths) < 150
    a = random_qbf2(3, random.Random(9)).table()
    b = random_qbf2(3, random.Random(9)).table()
    assert np.array_equal(a, b)


def test_agreeing_pair():
    rng = random.Random(0)
    for k in (1, 2, 3):
        size = 1 << (2 * k)
        for _ in range(10):
            t = rng.randint(0, (1 << k) - 1)
            vals = [(v, rng.random() < 0.5) for v in rng.sample(range(size), t)]
            psi1, psi2 = build_agreeing_pair(vals, k)
            for v, label in vals:
                s = State(qbf_vocab(k), v)
                assert evaluate(psi1, s) == evaluate(psi2, s) == label
            assert qbf2_truth_bruteforce(k, psi1) and not qbf2_truth_bruteforce(k, psi2)
    with pytest.raises(ContractError):
        build_agreeing_pair([(0, True), (1, False)], 1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_monmax_instances(k):
    for seed in range(5):
        inst = gen_monmax_family(k, seed)
        phi = inst.ground_truth.invariant
        assert phi.in_moncnf(2 * k + 1)
        assert Clause.of(Literal(inst.ts.vocab.index("e"), False)) in phi.clauses
        rep = bfs_reach(inst.ts)
        eng = engine_for(inst.ts.vocab)
        assert np.array_equal(rep.reachable_mask, eng.mask(phi))
        assert check_invariant(inst.ts, phi).ok
    a, b = gen_monmax_family(k, 3), gen_monmax_family(k, 3)
    assert a.ground_truth.invariant == b.ground_truth.invariant


def test_maximal_system_has_a_unique_invariant():
    """Exhaustive over CNFs with at most two clauses, on a 4-variable vocabulary."""
    vocab = Vocabulary(("p", "q", "r", "s"))
    phi = Cnf.from_lists(vocab, [["~s"], ["~p", "~q"]])
    init = conj(*(~Var(v) for v in vocab.vars))
    inst = gen_maximal(phi, init, Var("s"))
    eng = engine_for(vocab)
    lits = [Literal(i, s) for i in range(4) for s in (False, True)]
    clauses = [Clause(frozenset(c)) for w in range(1, 5) for c in itertools.combinations(lits, w)
               if not Clause(frozenset(c)).is_tautology]
    found = 0
    for m in (1, 2):
        for combo in itertools.combinations(clauses, m):
            cand = Cnf(vocab, combo)
            if check_invariant(inst.ts, cand).ok:
                assert eng.equivalent(cand, phi)
                found += 1
    assert found >= 1
    with pytest.raises(ContractError):
        gen_maximal(phi, Var("p"), Var("s"))


def test_badts_is_unsafe():
    for k in (1, 2):
        inst = gen_badts(k)
        assert not inst.ground_truth.safe and not bfs_reach(inst.ts).safe


@pytest.mark.parametrize("n", [2, 3, 4])
def test_add_even_ground_truth(n):
    inst = gen_add_even(n)
    rep = bfs_reach(inst.ts)
    assert rep.safe
    assert check_invariant(inst.ts, inst.ground_truth.invariant).ok
    mx = gen_add_even_maximal(n)
    assert check_invariant(mx.ts, mx.ground_truth.invariant).ok
    assert len(mx.ts.vocab) == 2 * n and len(inst.ts.vocab) == 3 * n


def test_add_even_transition_adds_twice_y():
    n = 3
    ts = gen_add_even(n).ts
    vocab = ts.vocab
    rng = random.Random(1)
    for _ in range(40):
        i = rng.randint(1, n)
        x = [rng.random() < 0.5 for _ in range(n)]
        y = [rng.random() < 0.5 for _ in range(n)]
        vals = {f"x{j + 1}": x[j] for j in range(n)}
        vals.update({f"y{j + 1}": y[j] for j in range(n)})
        vals.update({f"c{j + 1}": j + 1 == i for j in range(n)})
        s = State.from_dict(vocab, vals)
        succ = [t for t in bf.all_states(vocab) if evaluate(ts.delta, s, t)]
        # the number read with x_i as least significant bit, rotating upward
        order = [(i - 1 + j) % n for j in range(n)]
        xv = sum(x[r] << j for j, r in enumerate(order))
        yv = sum(y[r] << j for j, r in enumerate(order))
        want = (xv + 2 * yv) % (1 << n)
        assert succ
        for t in succ:
            got = sum(t[f"x{r + 1}"] << j for j, r in enumerate(order))
            assert got == want
            assert all(t[f"c{j + 1}"] == (j + 1 == i) for j in range(n))


def test_family_table_and_vocab_helpers():
    assert set(FAMILIES) >= {"monmax", "badts", "add-even", "add-even-maximal"}
    assert sigma_vocab(2).vars == ("y1", "y2", "x1", "x2", "a", "b", "e")
