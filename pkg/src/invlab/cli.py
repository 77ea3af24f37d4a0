"""Command line front end: generate, infer, check, dualize, learn-delta, bench."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import DomainError, ResourceError
from .formula import Cnf, from_dimacs, parse_sexpr, to_sexpr
from .generators import Qbf2Instance, gen_qbf2_system
from .harness import (
    ALGORITHM_NAMES,
    BenchConfig,
    DEFAULT_BUDGETS,
    make_instance,
    parse_int_list,
    records_to_csv,
    run_bench,
    verify_ground_truth,
)
from .inference import (
    ClassBound,
    clauses_in_order,
    cnf_hypotheses,
    houdini,
    ice_enum_learner,
    itp_inference,
    naive,
    pdr1,
)
from .learning import halving_identify_delta
from .oracles import QueryLedger, TeacherStrategy, make_handle
from .transition_system import check_invariant, dualize, format_ts, load_ts, save_ts

EXIT_FOUND, EXIT_NOT_FOUND, EXIT_INPUT = 0, 1, 2
_INPUT_ERRORS = (OSError, DomainError, ResourceError, ValueError, KeyError)


def _read_invariant(path: str, vocab):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    head = text.lstrip()
    if head.startswith("c") or head.startswith("p cnf"):
        return from_dimacs(text, vocab)
    return parse_sexpr(text.strip(), vocab)


def _show_invariant(inv) -> str:
    if isinstance(inv, Cnf):
        return inv.to_dimacs()
    return to_sexpr(inv) + "\n"


def cmd_generate(args) -> int:
    inst = make_instance(args.family, args.size, args.seed)
    save_ts(inst.ts, args.out)
    gt = inst.ground_truth
    with open(args.out + ".truth", "w", encoding="utf-8") as fh:
        if not gt.safe:
            fh.write("unsafe\n")
        elif gt.invariant is None:
            fh.write("safe\n")
        else:
            fh.write(gt.invariant.to_dimacs())
    print(f"wrote {args.out} ({inst.n} vars, {'safe' if gt.safe else 'unsafe'})")
    return 0


def _infer(ts, args, bound):
    handle = make_handle(ts)
    ledger = QueryLedger()
    budget = args.budget if args.budget is not None else DEFAULT_BUDGETS[args.alg]
    n = len(ts.vocab)
    monotone = bound is None or bound.kind != "cnf"
    if args.alg == "naive":
        return naive(ts.init, ts.bad, handle, budget, ledger)
    if args.alg == "pdr1":
        return pdr1(ts.init, ts.bad, handle, budget, ledger)
    if args.alg == "houdini":
        preds = clauses_in_order(ts.vocab, max_width=args.max_width, monotone=monotone)
        return houdini(ts.init, ts.bad, handle, preds, budget, ledger)
    if args.alg == "ice-enum":
        strategy = TeacherStrategy(args.strategy, args.seed)
        hyps = None
        if bound is not None:
            hyps = cnf_hypotheses(ts.vocab, bound.p(n), args.max_width, monotone)
        return ice_enum_learner(ts.init, ts.bad, handle, hyps, strategy, budget, ledger)
    return itp_inference(ts.init, ts.bad, handle, 1, budget, ledger)


def cmd_infer(args) -> int:
    try:
        ts = load_ts(args.sys)
        bound = ClassBound.parse(args.cls) if args.cls else None
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = _infer(ts, args, bound)
    result = out.result
    if out.found and bound is not None and not bound.contains(out.invariant, len(ts.vocab)):
        result = "no_invariant"
        print("# invariant found but outside the requested class")
    print(f"result: {result}")
    for key, val in sorted(out.ledger.items()):
        print(f"# {key} = {val}")
    print(f"# iterations = {out.iterations}")
    if result == "invariant":
        sys.stdout.write(_show_invariant(out.invariant))
        return EXIT_FOUND
    return EXIT_NOT_FOUND


def cmd_check(args) -> int:
    try:
        ts = load_ts(args.sys)
        inv = _read_invariant(args.inv, ts.vocab)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    verdict = check_invariant(ts, inv)
    line = verdict.kind
    if verdict.pre is not None:
        line += f" pre={verdict.pre.as_dict()}"
    if verdict.post is not None:
        line += f" post={verdict.post.as_dict()}"
    print(line)
    return 0 if verdict.ok else 1


def cmd_dualize(args) -> int:
    try:
        ts = load_ts(args.sys)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    dual = dualize(ts)
    if args.out:
        save_ts(dual, args.out)
    else:
        sys.stdout.write(format_ts(dual))
    return 0


def cmd_learn_delta(args) -> int:
    if args.k not in (1, 2):
        print("error: --k must be 1 or 2", file=sys.stderr)
        return EXIT_INPUT
    rng = np.random.default_rng(args.seed)
    hidden = rng.integers(0, 2, size=1 << (2 * args.k)).astype(bool)
    ts = gen_qbf2_system(Qbf2Instance.from_table(args.k, hidden)).ts
    res = halving_identify_delta(make_handle(ts), args.k, QueryLedger(), args.probe)
    ok = bool(np.array_equal(res.table, hidden))
    print("table: " + "".join("1" if b else "0" for b in res.table))
    print(f"rounds: {res.rounds}")
    print(f"counterexamples: {res.counterexamples}")
    print(f"recovered: {'yes' if ok else 'no'}")
    return 0 if ok else 1


def _parse_budgets(items) -> dict:
    out = {}
    for item in items or []:
        alg, _, val = item.partition("=")
        if not val:
            for a in ALGORITHM_NAMES:
                out[a] = int(alg)
        else:
            out[alg.strip()] = int(val)
    return out


def cmd_bench(args) -> int:
    try:
        if args.config:
            cfg = BenchConfig.load(args.config)
            if args.out:
                cfg.output = args.out
            if args.workers:
                cfg.workers = args.workers
        else:
            algs = [a for item in args.alg or [] for a in item.split(",") if a]
            strategies = [s for item in args.strategy or ["first"] for s in item.split(",") if s]
            cfg = BenchConfig(
                families=list(args.family or []),
                algorithms=algs,
                strategies=strategies,
                seeds=parse_int_list(args.seeds),
                budgets=_parse_budgets(args.budget),
                output=args.out,
                workers=args.workers or 1,
            )
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    records = run_bench(cfg)
    if not cfg.output:
        sys.stdout.write(records_to_csv(records))
    failed = [r for r in records if r.result == "error"]
    for r in failed:
        print(f"# run {r.run_id} failed: {r.error.splitlines()[0]}", file=sys.stderr)
    if args.verify:
        report = verify_ground_truth(records)
        print(f"# verified {report.checked} invariants, {len(report.mismatches)} mismatches", file=sys.stderr)
        for m in report.mismatches:
            print(f"# mismatch {m}", file=sys.stderr)
        if not report.ok:
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invlab", description="Invariant inference under query oracles.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a family instance and its ground-truth sidecar")
    g.add_argument("--family", required=True,
                   choices=["qbf2", "monmax", "badts", "add-even", "add-even-maximal"])
    g.add_argument("--size", type=int, required=True, help="k for qbf2/monmax/badts, n for add-even*")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    i = sub.add_parser("infer", help="run an inference algorithm on a system file")
    i.add_argument("--alg", required=True, choices=ALGORITHM_NAMES)
    i.add_argument("--sys", required=True)
    i.add_argument("--budget", type=int)
    i.add_argument("--strategy", default="first", choices=["first", "random", "max-ambiguity"])
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--class", dest="cls", help="cnf:<coeffs> or moncnf:<coeffs>, e.g. moncnf:0,1")
    i.add_argument("--max-width", type=int, default=2, help="clause width for houdini/ice-enum candidates")
    i.set_defaults(fn=cmd_infer)

    c = sub.add_parser("check", help="check a candidate invariant")
    c.add_argument("--sys", required=True)
    c.add_argument("--inv", required=True, help="DIMACS clause list or s-expression file")
    c.set_defaults(fn=cmd_check)

    d = sub.add_parser("dualize", help="write the dual system")
    d.add_argument("--sys", required=True)
    d.add_argument("--out")
    d.set_defaults(fn=cmd_dualize)

    ld = sub.add_parser("learn-delta", help="identify a hidden F_phi transition relation by halving")
    ld.add_argument("--k", type=int, required=True)
    ld.add_argument("--seed", type=int, default=0)
    ld.add_argument("--probe", default="observing", choices=["observing", "blind-at-wrap"])
    ld.set_defaults(fn=cmd_learn_delta)

    b = sub.add_parser("bench", help="run a benchmark matrix and emit CSV")
    b.add_argument("--config", help="JSON file with BenchConfig fields")
    b.add_argument("--family", action="append", help="name:sizes, e.g. monmax:2-5 (repeatable)")
    b.add_argument("--alg", action="append", help="algorithm name(s), comma separated (repeatable)")
    b.add_argument("--strategy", action="append", help="teacher strategies for ice-enum")
    b.add_argument("--seeds", default="0", help="e.g. 0-9 or 1,3,5")
    b.add_argument("--budget", action="append", help="alg=N, or N for every algorithm")
    b.add_argument("--out")
    b.add_argument("--workers", type=int)
    b.add_argument("--verify", action="store_true", help="re-check invariants against ground truth")
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
