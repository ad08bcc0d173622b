"""Command-line entry point: ``camosat {attack,bench,simulate,encode,filter}``.

Exit codes:
    0  attack recovered a netlist / command succeeded
    2  usage error
    3  timeout
    4  iteration cap reached
    5  input error (unreadable file, parse error, bad argument value)
    6  solver failure
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import feasible
from .attack import ITERATION_CAP, RECOVERED, TIMEOUT, AttackConfig, attack_netlist, consistency_build, parse_probe_mode
from .cnf import SOLVER_ENV, CnfBuild, SolverError, export_dimacs
from .encoder import EncodingError, add_levelization, build_miter, build_skeleton, default_whitelist
from .netlist import FIXTURES, NAMED_FUNCTIONS, NetlistError, NodeRef, TruthTable, fixture_path, load_netlist
from .oracle import FaultSpec, OracleError, Query, dump_log, format_record, load_log, observe, str_to_bits

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TIMEOUT = 3
EXIT_ITERCAP = 4
EXIT_INPUT = 5
EXIT_SOLVER = 6

STATUS_EXIT = {RECOVERED: EXIT_OK, TIMEOUT: EXIT_TIMEOUT, ITERATION_CAP: EXIT_ITERCAP}

ALIASES = {"sbox": "present_sbox"}

CONDITIONS = [(False, "off"), (False, "all"), (True, "off"), (True, "all")]

log = logging.getLogger("camosat")


class InputError(Exception):
    pass


def resolve_netlist(arg: str):
    """Load a netlist file, falling back to a bundled fixture by stem name."""
    path = Path(arg)
    if path.is_file():
        try:
            return load_netlist(path)
        except OSError as exc:
            raise InputError(str(exc)) from None
    stem = path.name[:-4] if path.name.endswith(".net") else path.name
    stem = ALIASES.get(stem, stem)
    if stem in FIXTURES:
        return load_netlist(fixture_path(stem))
    raise InputError(f"no such netlist file or fixture: {arg}")


def parse_functions(text: str | None):
    if text in (None, "any"):
        return None
    if text == "limited":
        return default_whitelist()
    table: dict[int, list[TruthTable]] = {}
    for item in text.split(","):
        item = item.strip()
        if item.upper() in NAMED_FUNCTIONS:
            tt = NAMED_FUNCTIONS[item.upper()]
        elif item.startswith("tt:"):
            tt = TruthTable.from_string(item[3:])
        else:
            raise InputError(f"unknown function {item!r}")
        table.setdefault(tt.arity, []).append(tt)
    return table


def _config_from_args(args) -> AttackConfig:
    return AttackConfig(
        probe_mode=parse_probe_mode(args.probe),
        fault_mode=args.fault,
        allowed_functions=parse_functions(args.functions),
        max_iterations=args.max_iters,
        timeout=args.timeout,
        seed=args.seed,
        backend=args.backend,
        warm_start=getattr(args, "warm_start", False),
    )


def _write(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


# -- subcommands ---------------------------------------------------------------


def cmd_attack(args) -> int:
    truth = resolve_netlist(args.netlist)
    config = _config_from_args(args)
    report = attack_netlist(truth, config)
    if args.report:
        _write(args.report, report.to_json() + "\n")
    if args.log:
        _write(args.log, dump_log(truth, report.log))
    if args.dimacs:
        shape, _ = build_skeleton(truth.arities(), truth.n_inputs, truth.n_outputs, config.allowed_functions)
        _, build = consistency_build(shape, report.log)
        with open(args.dimacs, "w") as fh:
            export_dimacs(build, fh)
    print(f"status            {report.status}")
    print(f"iterations        {report.iterations}")
    print(f"wall time (s)     {report.wall_time:.3f}")
    print(f"unique            {_fmt(report.unique)}")
    print(f"structural match  {_fmt(report.structural_match)}")
    print(f"variables         {report.encoding['variables']}")
    print(f"clauses           {report.encoding['clauses']}")
    if "note" in report.solver:
        print(f"note              {report.solver['note']}")
    return STATUS_EXIT[report.status]


def _fmt(v):
    return "-" if v is None else ("yes" if v else "no")


def _bench_cell(job):
    circuit, fault, probe, limited, timeout, max_iters, seed, backend = job
    truth = resolve_netlist(circuit)
    cfg = AttackConfig(
        probe_mode=probe,
        fault_mode=fault,
        allowed_functions=default_whitelist() if limited else None,
        timeout=timeout,
        max_iterations=max_iters,
        seed=seed,
        backend=backend,
    )
    try:
        r = attack_netlist(truth, cfg)
    except Exception as exc:  # recorded per cell; the grid continues
        return {"circuit": circuit, "fault": fault, "probe": probe, "limited": limited, "status": "Error", "error": str(exc)}
    return {
        "circuit": circuit,
        "fault": fault,
        "probe": probe,
        "limited": limited,
        "condition": f"{'+' if fault else '-'}fault {'+' if probe != 'off' else '-'}probe",
        "status": r.status,
        "iterations": r.iterations,
        "wall_time": r.wall_time,
        "unique": r.unique,
        "structural_match": r.structural_match,
        "encoding": r.encoding,
    }


def bench_table(cells: list[dict]) -> str:
    head = f"{'circuit':<14}{'fault':<7}{'probe':<7}{'functions':<11}{'status':<12}{'time(s)':>9}{'iters':>7}  {'unique':<7}{'match':<6}"
    lines = [head, "-" * len(head)]
    for c in cells:
        if c["status"] == "Error":
            lines.append(f"{c['circuit']:<14}{_fmt(c['fault']):<7}{c['probe']:<7}{'':<11}error: {c['error']}")
            continue
        lines.append(
            f"{c['circuit']:<14}{_fmt(c['fault']):<7}{c['probe']:<7}{'limited' if c['limited'] else 'any':<11}"
            f"{c['status']:<12}{c['wall_time']:>9.3f}{c['iterations']:>7}  {_fmt(c['unique']):<7}{_fmt(c['structural_match']):<6}"
        )
    return "\n".join(lines)


def role_breakdown_table(counts: dict) -> str:
    total = sum(counts.values()) or 1
    lines = [f"{'role':<14}{'variables':>10}{'share':>9}"]
    for role, n in counts.items():
        lines.append(f"{role:<14}{n:>10}{100 * n / total:>8.1f}%")
    return "\n".join(lines)


def cmd_bench(args) -> int:
    from . import plotting

    circuits = [c.strip() for c in args.circuits.split(",") if c.strip()]
    for c in circuits:
        resolve_netlist(c)
    jobs = []
    for circuit in circuits:
        for limited in ([False, True] if args.limited else [False]):
            for fault, probe in CONDITIONS:
                jobs.append((circuit, fault, probe, limited, args.timeout, args.max_iters, args.seed, args.backend))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            cells = list(pool.map(_bench_cell, jobs))
    else:
        cells = [_bench_cell(j) for j in jobs]

    ok = [c for c in cells if c["status"] != "Error"]
    breakdown_cell = next(
        (c for c in ok if c["fault"] and c["probe"] == "all" and not c["limited"]),
        ok[0] if ok else None,
    )
    breakdown = breakdown_cell["encoding"]["variables_by_role"] if breakdown_cell else {}
    total = sum(breakdown.values()) or 1
    shares = {r: n / total for r, n in breakdown.items()}
    result = {
        "cells": cells,
        "timeout_per_cell": args.timeout,
        "variable_breakdown": {
            "circuit": breakdown_cell["circuit"] if breakdown_cell else None,
            "counts": breakdown,
            "shares": shares,
            "largest_role": max(breakdown, key=breakdown.get) if breakdown else None,
        },
    }
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = Path(args.report) if args.report else out_dir / "bench.json"
    _write(report_path, json.dumps(result, indent=2, sort_keys=True) + "\n")
    figures = []
    if ok:
        plotting.plot_ablation([c for c in ok if not c["limited"]], out_dir / "ablation.png", args.timeout)
        figures.append(out_dir / "ablation.png")
    if breakdown:
        plotting.plot_role_breakdown(
            breakdown, out_dir / "variable_roles.png", f"CNF variables by role ({breakdown_cell['circuit']})"
        )
        figures.append(out_dir / "variable_roles.png")
    print(bench_table(cells))
    if breakdown:
        print()
        print(role_breakdown_table(breakdown))
    print()
    print(f"report: {report_path}")
    for f in figures:
        print(f"figure: {f}")
    return EXIT_OK


def _parse_fault(netlist, text):
    if not text:
        return None
    try:
        name, val = text.rsplit(":", 1)
        return FaultSpec(netlist.node_by_name(name), int(val))
    except (ValueError, NetlistError) as exc:
        raise InputError(f"bad fault {text!r}: {exc}") from None


def _parse_probes(netlist, text):
    if not text:
        return frozenset()
    if text == "all":
        return frozenset(NodeRef.gate(x) for x in range(netlist.n_gates))
    try:
        return frozenset(netlist.node_by_name(nm) for nm in text.split(","))
    except NetlistError as exc:
        raise InputError(str(exc)) from None


def cmd_simulate(args) -> int:
    n = resolve_netlist(args.netlist)
    fault = _parse_fault(n, args.fault)
    probes = _parse_probes(n, args.probe)
    records = []
    for v in args.vector:
        rec = observe(n, Query(str_to_bits(v), fault, probes))
        records.append(rec)
        if args.records:
            print(format_record(n, rec))
        else:
            print("".join(map(str, rec.outputs)))
    if args.log:
        _write(args.log, dump_log(n, records))
    return EXIT_OK


def cmd_encode(args) -> int:
    n = resolve_netlist(args.netlist)
    build = CnfBuild(store=True)
    model, build = build_skeleton(n.arities(), n.n_inputs, n.n_outputs, parse_functions(args.functions), build=build)
    add_levelization(model, build)
    if args.observations:
        from .encoder import add_observation

        try:
            text = Path(args.observations).read_text()
        except OSError as exc:
            raise InputError(str(exc)) from None
        for rec in load_log(n, text):
            add_observation(model, build, rec)
    else:
        build_miter(model, build, parse_probe_mode(args.probe), args.fault)
    stats = build.stats()
    if args.dimacs:
        with open(args.dimacs, "w") as fh:
            export_dimacs(build, fh)
    if args.stats:
        _write(args.stats, json.dumps(stats, indent=2) + "\n")
    if args.dump == "cnf":
        export_dimacs(build, sys.stdout)
    elif args.dump == "stats":
        print(json.dumps(stats, indent=2))
    else:
        print(f"variables {stats['variables']}  clauses {stats['clauses']}")
    return EXIT_OK


def cmd_filter(args) -> int:
    n = resolve_netlist(args.netlist)
    if args.exhaustive:
        from .oracle import all_vectors

        vectors = all_vectors(n.n_inputs)
    elif args.vectors:
        import random

        rng = random.Random(args.seed)
        vectors = [tuple(rng.randint(0, 1) for _ in range(n.n_inputs)) for _ in range(args.vectors)]
    else:
        vectors = feasible.default_vectors(n.n_inputs, args.seed)
    traces = feasible.collect_traces(n, vectors)
    model, _ = build_skeleton(n.arities(), n.n_inputs, n.n_outputs)
    fs = feasible.feasible_set(traces, model)
    text = feasible.dump_feasible(fs, n)
    if args.out:
        _write(args.out, text + "\n")
    print(text)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _add_attack_flags(p, timeout_default):
    p.add_argument("--probe", default="all", help="off | all | budget=k (default: all)")
    p.add_argument("--no-probe", dest="probe", action="store_const", const="off", help="same as --probe off")
    p.add_argument("--fault", action=argparse.BooleanOptionalAction, default=True, help="allow single stuck-at fault injection")
    p.add_argument("--functions", default="any", help="any | limited | comma list of gate names or tt:<bits>")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--timeout", type=float, default=timeout_default, help="seconds")
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--backend", default=os.environ.get("CAMOSAT_BACKEND", "glucose4"),
                   help=f"pysat solver name, or 'external' to use ${SOLVER_ENV}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camosat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="recover a camouflaged netlist through its oracle")
    p.add_argument("netlist", help="netlist file or fixture name (c17, present_sbox/sbox, table1)")
    _add_attack_flags(p, 3600.0)
    p.add_argument("--warm-start", action="store_true", help="prune driver tuples from probe traces first")
    p.add_argument("--report", help="write the JSON attack report here")
    p.add_argument("--log", help="write the observation log here")
    p.add_argument("--dimacs", help="write the final log-consistency CNF here")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="ablation grid over probing and fault injection")
    p.add_argument("--circuits", default="c17,present_sbox")
    p.add_argument("--timeout", type=float, default=60.0, help="seconds per grid cell")
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--limited", action="store_true", help="also run each cell with the limited function whitelist")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--backend", default=os.environ.get("CAMOSAT_BACKEND", "glucose4"))
    p.add_argument("--jobs", type=int, default=1, help="grid cells to run in parallel processes")
    p.add_argument("--out-dir", default="bench_out", help="directory for the JSON report and figures")
    p.add_argument("--report", help="JSON report path (default: <out-dir>/bench.json)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="query the golden model")
    p.add_argument("netlist")
    p.add_argument("--vector", action="append", required=True, help="input bitstring, primary input 0 first")
    p.add_argument("--fault", help="<gate>:<0|1>")
    p.add_argument("--probe", help="all or comma list of gate names")
    p.add_argument("--records", action="store_true", help="print full observation records instead of output bits")
    p.add_argument("--log", help="write observation records here")
    p.add_argument("--timeout", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("encode", help="emit the attack CNF as DIMACS and statistics")
    p.add_argument("netlist")
    p.add_argument("--dump", choices=["cnf", "stats"], help="print DIMACS or statistics to stdout")
    p.add_argument("--dimacs", help="write DIMACS here")
    p.add_argument("--stats", help="write JSON statistics here")
    p.add_argument("--observations", help="encode single-copy consistency with this observation log instead of the miter")
    p.add_argument("--probe", default="all")
    p.add_argument("--fault", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--functions", default="any")
    p.add_argument("--timeout", type=float, default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("filter", help="feasible driver tuples from fault-free probe traces")
    p.add_argument("netlist")
    p.add_argument("--exhaustive", action="store_true", help="use all 2^n input vectors")
    p.add_argument("--vectors", type=int, help="number of random vectors")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="write the JSON feasible set here")
    p.add_argument("--timeout", type=float, default=None)
    p.set_defaults(func=cmd_filter)
    return parser


class _Deadline(Exception):
    pass


def _alarm(signum, frame):
    raise _Deadline


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    timeout = getattr(args, "timeout", None)
    # Backstop for subcommands without internal deadlines; attack and bench
    # enforce their own budgets and get extra slack here.
    use_alarm = timeout is not None and args.command not in ("bench",) and hasattr(signal, "setitimer")
    if use_alarm:
        slack = 1.5 if args.command == "attack" else 1.0
        signal.signal(signal.SIGALRM, _alarm)
        signal.setitimer(signal.ITIMER_REAL, timeout * slack + 0.5)
    try:
        return args.func(args)
    except _Deadline:
        print("error: timeout", file=sys.stderr)
        return EXIT_TIMEOUT
    except (InputError, NetlistError, OracleError, EncodingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        if use_alarm:
            signal.setitimer(signal.ITIMER_REAL, 0)


if __name__ == "__main__":
    sys.exit(main())
