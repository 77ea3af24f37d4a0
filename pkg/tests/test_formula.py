import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bruteforce as bf
from invlab.errors import DomainError
from invlab.formula import (
    FALSE,
    TRUE,
    And,
    Clause,
    Cnf,
    Iff,
    Implies,
    Literal,
    Not,
    Or,
    State,
    Var,
    Vocabulary,
    clause_of_negated,
    conj,
    cube,
    cube_literals,
    disj,
    evaluate,
    free_vars,
    from_dimacs,
    is_prime_consequence,
    is_primed,
    parse_sexpr,
    prime,
    swap_primes,
    to_dimacs,
    to_sexpr,
    tseitin_dimacs,
    unprime,
    xor,
)
from invlab.semantics import MAX_VARS, engine_for, formula_from_models

V3 = Vocabulary(("p", "q", "r"))


def test_vocabulary_rejects_duplicates_and_bad_names():
    with pytest.raises(DomainError):
        Vocabulary(("a", "a"))
    with pytest.raises(DomainError):
        Vocabulary(("a'",))
    with pytest.raises(DomainError):
        V3.index("z")


def test_state_construction_and_access():
    s = State.from_dict(V3, {"p": True, "q": False, "r": 1})
    assert s.bits == 0b101
    assert s["p"] and not s["q"] and s["r"]
    assert State.from_values(V3, [1, 0, 1]) == s
    assert s.as_dict() == {"p": True, "q": False, "r": True}
    with pytest.raises(DomainError):
        State.from_dict(V3, {"p": True})
    with pytest.raises(DomainError):
        State(V3, 8)


def test_evaluate_two_state():
    f = Iff(Var("p", True), Not(Var("p")))
    s = State(V3, 0)
    assert evaluate(f, s, State(V3, 1))
    assert not evaluate(f, s, State(V3, 0))
    with pytest.raises(DomainError):
        evaluate(f, s)


def test_operators_and_helpers():
    p, q = Var("p"), Var("q")
    assert isinstance(~p, Not) and isinstance(p & q, And) and isinstance(p | q, Or)
    assert conj() == TRUE and disj() == FALSE
    x = xor(p, q)
    assert bf.models(V3, x) == {s for s in range(8) if ((s & 1) ^ ((s >> 1) & 1))}


def test_prime_unprime_swap():
    f = Implies(Var("p"), Var("q"))
    g = prime(f)
    assert is_primed(g) and not is_primed(f)
    assert unprime(g) == f
    with pytest.raises(DomainError):
        prime(g)
    h = And((Var("p"), Var("q", True)))
    assert swap_primes(h) == And((Var("p", True), Var("q")))
    assert free_vars(h) == {("p", False), ("q", True)}


def test_clause_properties():
    c = Clause.of(Literal(0, False), Literal(1, False))
    assert c.width == 2 and c.is_monotone and not c.is_tautology
    t = Clause.of(Literal(0, False), Literal(0, True))
    assert t.is_tautology
    assert Clause.of(Literal(2, True)).order_key() < c.order_key()


def test_cnf_classes_and_subsumption():
    phi = Cnf.from_lists(V3, [["~p"], ["~p", "~q"], ["~q", "~r"], ["~q", "~r"]])
    assert phi.is_monotone and phi.in_moncnf(4) and not phi.in_cnf(3)
    ws = phi.without_subsumed()
    assert [c.show(V3) for c in ws] == ["~p", "~q | ~r"]
    assert engine_for(V3).equivalent(phi, ws)
    assert len(phi.canonical()) == 3
    assert not Cnf.from_lists(V3, [["p"]]).is_monotone


def test_cube_is_satisfied_only_by_its_state():
    for b in range(8):
        s = State(V3, b)
        assert bf.models(V3, cube(s).to_formula()) == {b}
        assert bf.models(V3, clause_of_negated(cube_literals(s)).to_formula(V3)) == set(range(8)) - {b}


def test_negated_cnf_is_complement():
    rng = random.Random(1)
    for _ in range(30):
        cls = [[rng.choice(["", "~"]) + rng.choice(V3.vars) for _ in range(rng.randint(1, 3))]
               for _ in range(rng.randint(0, 4))]
        phi = Cnf.from_lists(V3, cls)
        assert bf.models(V3, phi.negated()) == set(range(8)) - bf.models(V3, phi.to_formula())


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_engine_mask_matches_pointwise_evaluation(seed):
    rng = random.Random(seed)
    vocab = Vocabulary(tuple(f"v{i}" for i in range(rng.randint(1, 5))))
    f = bf.random_formula(rng, vocab, depth=4)
    m = engine_for(vocab).mask(f)
    assert set(np.flatnonzero(m).tolist()) == bf.models(vocab, f)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_sexpr_round_trip(seed):
    rng = random.Random(seed)
    f = bf.random_formula(rng, V3, depth=4, primed=True)
    g = parse_sexpr(to_sexpr(f), V3)
    assert g == f


def test_sexpr_constants_and_errors():
    assert parse_sexpr("(const true)") == TRUE
    assert parse_sexpr("(& p (! q'))") == And((Var("p"), Not(Var("q", True))))
    for bad in ["", "(& p", "(% p q)", "(-> p)", "p q", ")", "(& z)"]:
        with pytest.raises(DomainError):
            parse_sexpr(bad, V3)


def test_dimacs_round_trip():
    phi = Cnf.from_lists(V3, [["p", "~q"], ["~r"], []])
    text = to_dimacs(phi)
    assert text.startswith("c vars: p q r\np cnf 3 3\n")
    back = from_dimacs(text)
    assert back.vocab == V3 and back == phi
    with pytest.raises(DomainError):
        from_dimacs(text, Vocabulary(("a", "b", "c")))
    anon = from_dimacs("p cnf 2 1\n1 -2 0\n")
    assert anon.vocab.vars == ("v1", "v2")


def _dimacs_sat(text):
    clauses, n = [], 0
    for line in text.splitlines():
        if line.startswith(("c", "p")):
            continue
        lits = [int(t) for t in line.split()][:-1]
        clauses.append(lits)
        n = max([n] + [abs(l) for l in lits])
    for bits in itertools.product([False, True], repeat=n):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False


def test_tseitin_is_equisatisfiable():
    rng = random.Random(7)
    vocab = Vocabulary(("a", "b"))
    for _ in range(40):
        f = bf.random_formula(rng, vocab, depth=2, primed=True)
        sat = any(evaluate(f, s, t) for s in bf.all_states(vocab) for t in bf.all_states(vocab))
        assert _dimacs_sat(tseitin_dimacs(f, vocab)) == sat


def test_formula_from_models_round_trip():
    rng = np.random.default_rng(3)
    vocab = Vocabulary(tuple(f"v{i}" for i in range(5)))
    eng = engine_for(vocab)
    for _ in range(20):
        m = rng.integers(0, 2, 32).astype(bool)
        assert np.array_equal(eng.mask(formula_from_models(vocab, m)), m)


def test_prime_consequences_of_monotone_cnf_are_its_clauses():
    rng = random.Random(11)
    vocab = Vocabulary(tuple(f"v{i}" for i in range(4)))
    for _ in range(25):
        cls = set()
        for _ in range(rng.randint(1, 4)):
            vs = rng.sample(range(4), rng.randint(1, 3))
            cls.add(Clause(frozenset(Literal(v, False) for v in vs)))
        phi = Cnf(vocab, cls).without_subsumed()
        for w in range(1, 5):
            for vs in itertools.combinations(range(4), w):
                for signs in itertools.product([False, True], repeat=w):
                    c = Clause(frozenset(Literal(v, s) for v, s in zip(vs, signs)))
                    if is_prime_consequence(c, phi):
                        assert c in phi.clauses


def test_engine_size_limit():
    with pytest.raises(Exception):
        engine_for(Vocabulary(tuple(f"v{i}" for i in range(MAX_VARS + 1))))
