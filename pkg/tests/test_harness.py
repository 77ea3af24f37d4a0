import csv
import io
import json

import pytest

from invlab import harness
from invlab.errors import DomainError, ResourceError
from invlab.formula import Cnf
from invlab.harness import (
    CSV_COLUMNS,
    BenchConfig,
    ExperimentRecord,
    FamilySpec,
    parse_int_list,
    records_to_csv,
    run_bench,
    verify_ground_truth,
)


def test_parse_helpers():
    assert parse_int_list("0-3,7") == [0, 1, 2, 3, 7]
    spec = FamilySpec.parse("monmax:2-4")
    assert spec.name == "monmax" and spec.sizes == [2, 3, 4]


def test_config_validation(tmp_path):
    with pytest.raises(DomainError):
        BenchConfig(families=["monmax:2"], algorithms=["magic"])
    with pytest.raises(ResourceError):
        BenchConfig(families=["add-even:9"], algorithms=["pdr1"])
    with pytest.raises(DomainError):
        BenchConfig.from_dict({"families": [], "colour": 1})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"families": [{"name": "monmax", "sizes": [2]}], "algorithms": ["pdr1"],
                                "seeds": [0, 1]}))
    cfg = BenchConfig.load(str(path))
    assert cfg.families[0].sizes == [2] and cfg.seeds == [0, 1]


def test_empty_config_gives_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    records = run_bench(BenchConfig(output=str(out)))
    assert records == []
    assert out.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_pdr1_over_monmax_family(tmp_path):
    out = tmp_path / "monmax.csv"
    cfg = BenchConfig(families=["monmax:2-5"], algorithms=["pdr1"], seeds=list(range(10)), output=str(out))
    records = run_bench(cfg)
    assert len(records) == 40
    assert all(r.result == "invariant" for r in records)
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 40 and list(rows[0]) == list(CSV_COLUMNS)
    for r in records:
        assert r.hoare_in_block <= r.n * r.m
    assert verify_ground_truth(records).ok


def test_separation_table():
    cfg = BenchConfig(families=["add-even-maximal:3-7"], algorithms=["naive", "pdr1"])
    records = run_bench(cfg)
    by = {(r.k, r.algorithm): r for r in records}
    ratios = []
    for n in range(3, 8):
        nv, pd = by[(n, "naive")], by[(n, "pdr1")]
        assert nv.iterations >= 2 ** (n - 1)
        assert pd.hoare_total <= 10 * n * n
        ratios.append(nv.hoare_total / pd.hoare_total)
    assert all(a < b for a, b in zip(ratios, ratios[1:]))


def test_ordering_and_determinism():
    cfg = dict(families=["monmax:2-3", "badts:1"], algorithms=["pdr1", "ice-enum", "itp"],
               strategies=["first", "random"], seeds=[0, 1])
    a = run_bench(BenchConfig(**cfg))
    b = run_bench(BenchConfig(**cfg, workers=2))
    assert records_to_csv(a, include_wall=False) == records_to_csv(b, include_wall=False)
    keys = [(r.family, r.n, r.seed, r.algorithm) for r in a]
    assert keys == sorted(keys)
    # ice-enum fans out over strategies, the others run once
    assert sum(r.algorithm == "ice-enum" for r in a) == 2 * sum(r.algorithm == "pdr1" for r in a)
    assert all(r.result == "no_invariant" for r in a if r.family == "badts")


def test_failures_are_recorded_not_raised(monkeypatch):
    real = harness.run_algorithm

    def flaky(inst, algorithm, *args, **kw):
        if algorithm == "naive":
            raise RuntimeError("boom")
        return real(inst, algorithm, *args, **kw)

    monkeypatch.setattr(harness, "run_algorithm", flaky)
    records = run_bench(BenchConfig(families=["monmax:2"], algorithms=["naive", "pdr1"]))
    res = {r.algorithm: r for r in records}
    assert res["naive"].result == "error" and "boom" in res["naive"].error
    assert res["pdr1"].result == "invariant"


def test_verify_flags_mutated_and_unsafe_results():
    records = run_bench(BenchConfig(families=["monmax:2"], algorithms=["pdr1"], seeds=[0, 1]))
    assert verify_ground_truth(records).ok
    bad = records[0]
    bad.invariant = Cnf(bad.invariant.vocab, bad.invariant.clauses[1:])
    rep = verify_ground_truth(records)
    assert not rep.ok and rep.exit_code == 1 and bad.run_id in rep.mismatches[0]
    fake = ExperimentRecord("badts:1:0:x", "badts", 5, 0, 1, "pdr1", "-", 0, "invariant")
    rep = verify_ground_truth([fake])
    assert not rep.ok and "unsafe" in rep.mismatches[0]
