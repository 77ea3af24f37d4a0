import numpy as np
import pytest

from invlab.errors import ResourceError
from invlab.generators import Qbf2Instance, gen_monmax_family, gen_qbf2_system
from invlab.learning import (
    all_tables,
    halving_identify_delta,
    observable_valuations,
    probe_alpha,
    table_of,
)
from invlab.oracles import QueryLedger, make_handle


def hidden_system(k, table):
    return make_handle(gen_qbf2_system(Qbf2Instance.from_table(k, table)).ts)


def test_all_tables_enumerates_the_hypothesis_space():
    t = all_tables(1)
    assert t.shape == (16, 4)
    assert len({tuple(r) for r in t}) == 16


@pytest.mark.parametrize("k", [1, 2])
def test_probe_coverage(k):
    size = 1 << (2 * k)
    assert observable_valuations(k, probe_alpha("observing")) == set(range(size))
    # the probe with b already false cannot see φ at x = all-ones
    blind = observable_valuations(k, probe_alpha("blind-at-wrap"))
    top_x = ((1 << k) - 1) << k
    missed = {v for v in range(size) if v & top_x == top_x}
    assert blind == set(range(size)) - missed


@pytest.mark.parametrize("k", [1, 2])
def test_halving_recovers_the_table(k):
    rng = np.random.default_rng(10 + k)
    limit = 1 << (2 * k)  # log2 of 2^(4^k) hypotheses
    for _ in range(8):
        hidden = rng.integers(0, 2, 1 << (2 * k)).astype(bool)
        led = QueryLedger()
        res = halving_identify_delta(hidden_system(k, hidden), k, led)
        assert np.array_equal(res.table, hidden)
        assert res.counterexamples <= limit
        assert led.hoare_total == res.rounds + res.counterexamples * 2 * (2 * k + 3)
        for a, b in zip(res.sizes, res.sizes[1:]):
            assert 2 * b <= a


def test_blind_probe_cannot_separate_tables_differing_at_x_all_ones():
    k = 1
    t1 = np.array([True, False, False, False])
    t2 = np.array([True, False, True, True])  # differs only where x = 1
    r1 = halving_identify_delta(hidden_system(k, t1), k, QueryLedger(), probe="blind-at-wrap")
    r2 = halving_identify_delta(hidden_system(k, t2), k, QueryLedger(), probe="blind-at-wrap")
    assert np.array_equal(r1.table, r2.table)
    assert not (np.array_equal(r1.table, t1) and np.array_equal(r2.table, t2))


def test_halving_guards():
    with pytest.raises(ResourceError):
        halving_identify_delta(hidden_system(1, 0), 3)
    with pytest.raises(ValueError):
        halving_identify_delta(make_handle(gen_monmax_family(2, 0).ts), 1)
    with pytest.raises(ValueError):
        probe_alpha("other")


def test_table_of_round_trip():
    q = Qbf2Instance.from_table(2, 0xBEEF)
    assert int(sum(1 << i for i, b in enumerate(table_of(q.phi, 2)) if b)) == 0xBEEF
