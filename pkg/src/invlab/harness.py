"""Benchmark matrix: instances x algorithms x strategies x seeds -> CSV."""
from __future__ import annotations

import csv
import io
import json
import random
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import DomainError, ResourceError
from .generators import (
    FamilyInstance,
    gen_add_even,
    gen_add_even_maximal,
    gen_badts,
    gen_monmax_family,
    gen_qbf2_system,
    random_qbf2,
)
from .inference import (
    clauses_in_order,
    houdini,
    ice_enum_learner,
    itp_inference,
    naive,
    pdr1,
)
from .oracles import QueryLedger, TeacherStrategy, make_handle
from .semantics import MAX_VARS
from .transition_system import check_invariant

CSV_COLUMNS = (
    "run_id", "family", "n", "m", "k", "algorithm", "strategy", "seed", "result",
    "hoare_total", "hoare_in_block", "inductiveness_total", "iterations", "wall_ms",
)
ALGORITHM_NAMES = ("naive", "pdr1", "houdini", "ice-enum", "itp")
DEFAULT_BUDGETS = {"naive": 50000, "pdr1": 100000, "houdini": 100000, "ice-enum": 50000, "itp": 500}


def make_instance(family: str, size: int, seed: int = 0) -> FamilyInstance:
    """Deterministic instance for a (family, size, seed) triple.

    ``size`` is k for qbf2 / monmax / badts and the bit width n for the
    add-double families.
    """
    if family == "monmax":
        return gen_monmax_family(size, seed)
    if family == "badts":
        return gen_badts(size)
    if family == "qbf2":
        return gen_qbf2_system(random_qbf2(size, random.Random(f"qbf2-{size}-{seed}")))
    if family == "add-even":
        return gen_add_even(size)
    if family == "add-even-maximal":
        return gen_add_even_maximal(size)
    raise DomainError(f"unknown family {family!r}")


def family_vars(family: str, size: int) -> int:
    if family in ("monmax", "badts", "qbf2"):
        return 2 * size + 3
    if family == "add-even":
        return 3 * size
    if family == "add-even-maximal":
        return 2 * size
    raise DomainError(f"unknown family {family!r}")


@dataclass
class FamilySpec:
    name: str
    sizes: list

    @classmethod
    def parse(cls, text: str) -> "FamilySpec":
        """``monmax:2-5`` or ``add-even:3,4,5``."""
        name, _, rng = text.partition(":")
        return cls(name.strip(), parse_int_list(rng or "1"))


def parse_int_list(text: str) -> list[int]:
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


@dataclass
class BenchConfig:
    families: list = field(default_factory=list)
    algorithms: list = field(default_factory=list)
    strategies: list = field(default_factory=lambda: ["first"])
    seeds: list = field(default_factory=lambda: [0])
    budgets: dict = field(default_factory=dict)
    output: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        self.families = [f if isinstance(f, FamilySpec) else
                         FamilySpec.parse(f) if isinstance(f, str) else FamilySpec(f["name"], list(f["sizes"]))
                         for f in self.families]
        for alg in self.algorithms:
            if alg not in ALGORITHM_NAMES:
                raise DomainError(f"unknown algorithm {alg!r}")
        for fam in self.families:
            for size in fam.sizes:
                if family_vars(fam.name, size) > MAX_VARS:
                    raise ResourceError(f"{fam.name} at size {size} exceeds {MAX_VARS} variables")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise DomainError("unknown config keys: " + ", ".join(sorted(extra)))
        return cls(**d)

    @classmethod
    def load(cls, path: str) -> "BenchConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def budget_for(self, alg: str) -> int:
        return int(self.budgets.get(alg, DEFAULT_BUDGETS[alg]))


@dataclass
class ExperimentRecord:
    run_id: str
    family: str
    n: int
    m: int
    k: int
    algorithm: str
    strategy: str
    seed: int
    result: str
    hoare_total: int = 0
    hoare_in_block: int = 0
    inductiveness_total: int = 0
    iterations: int = 0
    wall_ms: float = 0.0
    invariant: object = field(default=None, repr=False, compare=False)
    error: str = field(default="", repr=False, compare=False)

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass(frozen=True)
class _Job:
    family: str
    size: int
    seed: int
    algorithm: str
    strategy: str
    budget: int


def _jobs(cfg: BenchConfig) -> list[_Job]:
    jobs = []
    for fam in cfg.families:
        for size in fam.sizes:
            for seed in cfg.seeds:
                for alg in cfg.algorithms:
                    strategies = cfg.strategies if alg == "ice-enum" else ["-"]
                    for strat in strategies:
                        jobs.append(_Job(fam.name, size, seed, alg, strat, cfg.budget_for(alg)))
    return jobs


def run_algorithm(inst: FamilyInstance, algorithm: str, budget: int, strategy: str = "first", seed: int = 0):
    ts = inst.ts
    handle = make_handle(ts)
    ledger = QueryLedger()
    if algorithm == "naive":
        return naive(ts.init, ts.bad, handle, budget, ledger)
    if algorithm == "pdr1":
        return pdr1(ts.init, ts.bad, handle, budget, ledger)
    if algorithm == "houdini":
        preds = clauses_in_order(ts.vocab, max_width=2, monotone=True)
        return houdini(ts.init, ts.bad, handle, preds, budget, ledger)
    if algorithm == "ice-enum":
        strat = TeacherStrategy("first" if strategy == "-" else strategy, seed)
        return ice_enum_learner(ts.init, ts.bad, handle, None, strat, budget, ledger)
    if algorithm == "itp":
        return itp_inference(ts.init, ts.bad, handle, 1, budget, ledger)
    raise DomainError(f"unknown algorithm {algorithm!r}")


def _run_job(job: _Job) -> ExperimentRecord:
    run_id = f"{job.family}:{job.size}:{job.seed}:{job.algorithm}:{job.strategy}"
    n = family_vars(job.family, job.size)
    m = 0
    start = time.perf_counter()
    try:
        inst = make_instance(job.family, job.size, job.seed)
        if inst.ground_truth.invariant is not None:
            m = len(inst.ground_truth.invariant)
        out = run_algorithm(inst, job.algorithm, job.budget, job.strategy, job.seed)
        led = out.ledger
        return ExperimentRecord(
            run_id, job.family, n, m, job.size, job.algorithm, job.strategy, job.seed, out.result,
            led.get("hoare_total", 0), led.get("hoare_in_block", 0), led.get("inductiveness_total", 0),
            out.iterations, round((time.perf_counter() - start) * 1000, 3), out.invariant,
        )
    except Exception as exc:  # recorded, never fatal for the matrix
        return ExperimentRecord(
            run_id, job.family, n, m, job.size, job.algorithm, job.strategy, job.seed, "error",
            wall_ms=round((time.perf_counter() - start) * 1000, 3),
            error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}",
        )


def _sort_key(r: ExperimentRecord):
    return (r.family, r.n, r.seed, r.algorithm, r.strategy, r.k)


def records_to_csv(records, include_wall: bool = True) -> str:
    buf = io.StringIO()
    cols = CSV_COLUMNS if include_wall else CSV_COLUMNS[:-1]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow(r.row()[: len(cols)])
    return buf.getvalue()


def run_bench(cfg: BenchConfig) -> list[ExperimentRecord]:
    """Run the matrix, sort records deterministically, write the CSV if requested."""
    jobs = _jobs(cfg)
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_job, jobs))
    else:
        records = [_run_job(j) for j in jobs]
    records.sort(key=_sort_key)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(records_to_csv(records))
    return records


@dataclass
class VerificationReport:
    checked: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def verify_ground_truth(records, instances: Optional[dict] = None) -> VerificationReport:
    """Re-check every reported invariant and compare verdicts with family metadata.

    ``instances`` optionally maps run ids to FamilyInstance objects; otherwise
    instances are regenerated from the record's (family, k, seed).
    """
    report = VerificationReport()
    for r in records:
        if r.result != "invariant":
            continue
        report.checked += 1
        inst = (instances or {}).get(r.run_id) or make_instance(r.family, r.k, r.seed)
        if not inst.ground_truth.safe:
            report.mismatches.append(f"{r.run_id}: invariant reported for an unsafe instance")
            continue
        if r.invariant is None:
            report.mismatches.append(f"{r.run_id}: invariant result without an invariant")
            continue
        verdict = check_invariant(inst.ts, r.invariant)
        if not verdict.ok:
            report.mismatches.append(f"{r.run_id}: {verdict.kind} at {verdict.pre}")
    return report
