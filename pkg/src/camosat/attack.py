"""Oracle-guided recovery loop.

Each iteration asks the solver for two log-consistent configurations that
disagree on some query (input vector, optional stuck-at fault, probe set),
puts that query to the oracle and constrains both configurations with the
answer. When no such pair exists the log pins down the circuit up to
observational equivalence; a candidate is then extracted and checked for
structural uniqueness by blocking its canonical form and re-solving.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

from . import feasible
from .cnf import DEFAULT_BACKEND, CnfBuild, open_session
from .encoder import (
    CamouflagedModel,
    add_levelization,
    add_observation,
    block_structure,
    build_miter,
    build_skeleton,
    config_literals,
    decode_config,
    default_whitelist,
)
from .netlist import Netlist, NodeRef, floating_gates, serialize_netlist, structural_equal
from .oracle import FaultSpec, ObservationRecord, Oracle, Query, replay_consistent

log = logging.getLogger(__name__)

RECOVERED = "Recovered"
TIMEOUT = "Timeout"
ITERATION_CAP = "IterationCap"


class AttackError(RuntimeError):
    pass


def parse_probe_mode(text):
    """'off', 'all', 'budget=k' or an int k -> 'off' | 'all' | int."""
    if isinstance(text, int):
        return text
    if text in ("off", "all"):
        return text
    if text.startswith("budget="):
        text = text[len("budget="):]
    try:
        k = int(text)
    except ValueError:
        raise ValueError(f"bad probe mode {text!r}; use off, all or budget=k") from None
    if k < 0:
        raise ValueError("probe budget must be >= 0")
    return k


@dataclass
class AttackConfig:
    probe_mode: object = "all"
    fault_mode: bool = True
    allowed_functions: dict | None = None
    max_iterations: int = 100_000
    timeout: float = 3600.0
    seed: int | None = None
    backend: str = DEFAULT_BACKEND
    no_floating: bool = True
    warm_start: bool = False
    uniqueness_cap: int = 1
    check_progress: bool = False

    def __post_init__(self):
        self.probe_mode = parse_probe_mode(self.probe_mode)
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_iterations <= 0:
            raise ValueError("iteration cap must be > 0")

    @classmethod
    def limited(cls, **kw) -> "AttackConfig":
        return cls(allowed_functions=default_whitelist(), **kw)

    def describe(self) -> dict:
        return {
            "probe_mode": self.probe_mode,
            "fault_mode": self.fault_mode,
            "functions": "limited" if self.allowed_functions else "any",
            "max_iterations": self.max_iterations,
            "timeout": self.timeout,
            "seed": self.seed,
            "backend": self.backend,
        }


@dataclass
class AttackState:
    model: CamouflagedModel
    build: CnfBuild
    session: object
    miter: object
    log: list = field(default_factory=list)
    iterations: int = 0
    names: Netlist | None = None
    feasible: dict | None = None


@dataclass
class AttackReport:
    status: str
    iterations: int
    wall_time: float
    encoding: dict
    recovered: Netlist | None = None
    unique: bool | None = None
    structural_match: bool | None = None
    witness: Netlist | None = None
    log: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)

    def to_dict(self, include_time: bool = True) -> dict:
        d = {
            "status": self.status,
            "iterations": self.iterations,
            "unique": self.unique,
            "structural_match": self.structural_match,
            "recovered": serialize_netlist(self.recovered) if self.recovered else None,
            "witness": serialize_netlist(self.witness) if self.witness else None,
            "encoding": self.encoding,
            "config": self.config,
            "solver": self.solver,
        }
        if include_time:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_time), indent=2, sort_keys=True)


def _deadline_left(deadline):
    return max(deadline - time.monotonic(), 0.0)


def start_attack(oracle: Oracle, arities, config: AttackConfig, names: Netlist | None = None) -> AttackState:
    build = CnfBuild(store=False)
    session = open_session(build, config.backend, config.seed)
    model, build = build_skeleton(
        arities,
        oracle.n_inputs,
        oracle.n_outputs,
        config.allowed_functions,
        no_floating=config.no_floating,
        build=build,
    )
    add_levelization(model, build)
    miter = build_miter(model, build, config.probe_mode, config.fault_mode)
    return AttackState(model, build, session, miter, names=names)


def find_discriminating_query(state: AttackState, timeout: float | None = None):
    """Next query, or None once no two surviving hypotheses can be told apart.

    Raises TimeoutError if the solver runs out of time.
    """
    res = state.session.solve([state.miter.diff], timeout=timeout)
    if res is None:
        raise TimeoutError
    if not res:
        return None
    s, sig = state.session, state.miter.signals
    vector = tuple(s.value(v) for v in sig.inputs)
    fault = None
    for x, inj in enumerate(sig.inject):
        if s.value(inj):
            fault = FaultSpec(NodeRef.gate(x), s.value(sig.faultval))
    probes = frozenset(NodeRef.gate(x) for x, p in enumerate(sig.probes) if s.value(p))
    return Query(vector, fault, probes)


def record_observation(state: AttackState, record: ObservationRecord) -> None:
    for cfg in state.model.configs:
        add_observation(state.model, state.build, record, cfg)
    state.log.append(record)
    state.iterations += 1


def consistency_build(model_shape: CamouflagedModel, records, store=True):
    """Single-configuration CNF constrained by every record in ``records``."""
    model, build = build_skeleton(
        model_shape.gate_arities,
        model_shape.n_inputs,
        model_shape.n_outputs,
        model_shape.allowed_functions,
        no_floating=model_shape.no_floating,
        anchor_po_level=model_shape.anchor_po_level,
        build=CnfBuild(store=store),
    )
    add_levelization(model, build)
    for rec in records:
        add_observation(model, build, rec)
    return model, build


def extract_candidate(state: AttackState, timeout: float | None = None, backend=None):
    """Decode one log-consistent configuration.

    Returns (netlist, (model, build, session)); the session is left open for
    uniqueness checks.
    """
    model, build = consistency_build(state.model, state.log)
    if state.feasible is not None:
        # the miter only compared pruned hypotheses; extraction must match
        feasible.emit_blocking(state.feasible, model, build)
    session = open_session(build, backend or DEFAULT_BACKEND)
    res = session.solve(timeout=timeout)
    if res is None:
        session.close()
        raise TimeoutError
    if not res:
        session.close()
        raise AttackError("observation log is inconsistent with every configuration")
    cand = decode_config(session, model, names=state.names)
    if not replay_consistent(cand, state.log):
        raise AttackError("decoded candidate does not replay the observation log")
    return cand, (model, build, session)


def check_uniqueness(extraction, first: Netlist, cap: int = 1, timeout: float | None = None, names=None):
    """Block structural copies of ``first`` and look for survivors.

    Returns (unique, survivors) where unique is True/False, or None if the
    solver timed out; survivors holds up to ``cap`` structurally distinct
    log-consistent netlists other than ``first``.
    """
    model, build, session = extraction
    block_structure(model, build, model.configs[0], first)
    survivors = []
    deadline = None if timeout is None else time.monotonic() + timeout
    while len(survivors) < cap:
        res = session.solve(timeout=None if deadline is None else _deadline_left(deadline))
        if res is None:
            return None, survivors
        if not res:
            break
        other = decode_config(session, model, names=names)
        survivors.append(other)
        block_structure(model, build, model.configs[0], other)
    return (not survivors), survivors


def enumerate_consistent(shape: CamouflagedModel, records, cap: int = 10_000, backend=DEFAULT_BACKEND) -> list[Netlist]:
    """Every structurally distinct configuration consistent with ``records``."""
    model, build = consistency_build(shape, records)
    out = []
    with open_session(build, backend) as session:
        while len(out) < cap and session.solve():
            n = decode_config(session, model)
            out.append(n)
            block_structure(model, build, model.configs[0], n)
    return out


def _check_progress(state: AttackState, before: tuple[Netlist, Netlist]) -> None:
    lits = []
    for cfg, n in zip(state.model.configs, before):
        lits += config_literals(state.model, cfg, n)
    if state.session.solve(lits) is not False:
        raise AttackError("observation did not eliminate the discriminating pair")


def run_attack(
    oracle: Oracle,
    arities,
    config: AttackConfig | None = None,
    truth: Netlist | None = None,
    names: Netlist | None = None,
) -> AttackReport:
    """Run the loop against ``oracle``.

    ``truth`` is used only after termination, for the structural comparison.
    ``names`` (defaults to ``truth``) supplies node names for the report.
    """
    config = config or AttackConfig()
    names = names or truth
    t0 = time.monotonic()
    deadline = t0 + config.timeout
    state = start_attack(oracle, arities, config, names)

    if config.warm_start:
        traces = feasible.collect_traces(oracle, feasible.default_vectors(oracle.n_inputs, config.seed), len(arities))
        fs = feasible.feasible_set(traces, state.model)
        excluded = feasible.emit_blocking(fs, state.model, state.build)
        state.feasible = fs
        log.info("warm start excluded %d driver tuples", excluded)

    status = None
    while status is None:
        if state.iterations >= config.max_iterations:
            status = ITERATION_CAP
            break
        try:
            q = find_discriminating_query(state, _deadline_left(deadline))
        except TimeoutError:
            status = TIMEOUT
            break
        if q is None:
            break
        pair = None
        if config.check_progress:
            pair = tuple(decode_config(state.session, state.model, cfg) for cfg in state.model.configs[:2])
        rec = oracle.observe(q)
        record_observation(state, rec)
        if pair is not None:
            _check_progress(state, pair)
        log.debug("iteration %d: %s", state.iterations, q)

    report = AttackReport(
        status or RECOVERED,
        state.iterations,
        0.0,
        state.build.stats(),
        log=list(state.log),
        config=config.describe(),
    )
    report.solver = {
        "backend": state.session.backend,
        "seed_honored": state.session.seed_honored,
        "miter_calls": state.session.calls,
    }
    if status is None:
        try:
            cand, extraction = extract_candidate(state, _deadline_left(deadline), config.backend)
        except TimeoutError:
            report.status = TIMEOUT
        else:
            report.recovered = cand
            unique, survivors = check_uniqueness(
                extraction, cand, config.uniqueness_cap, _deadline_left(deadline), names
            )
            extraction[2].close()
            report.unique = unique
            if survivors:
                report.witness = survivors[0]
            if truth is not None:
                report.structural_match = structural_equal(cand, truth)
    if not report.solver["seed_honored"]:
        report.solver["note"] = "seed not honored by backend"
    state.session.close()
    report.wall_time = time.monotonic() - t0
    return report


def attack_netlist(truth: Netlist, config: AttackConfig | None = None) -> AttackReport:
    """Attack a known netlist through an in-process oracle."""
    config = config or AttackConfig()
    if config.no_floating and floating_gates(truth):
        raise AttackError(
            f"gates {floating_gates(truth)} have no fanout, which the model excludes; set no_floating=False"
        )
    return run_attack(Oracle(truth), truth.arities(), config, truth=truth)
