"""CNF model of a fully camouflaged circuit.

A configuration (one hypothesis about the hidden circuit) is a set of
variables: truth-table bits per gate, a one-hot driver selector per gate pin
and per primary output, and thermometer-coded level bits that force the
chosen wiring to be acyclic. A circuit *instance* evaluates one
configuration under one query: input values, an optional injected fault
(``inject[x]`` selects the node, ``faultval`` the forced value) and probe
enables. Instances read their drivers' fault-enabled values, so a fault on a
node is seen by every gate and output it feeds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .cnf import CnfBuild, at_most_k, at_most_one, exactly_one, neg
from .netlist import (
    LIMITED_FUNCTIONS,
    NAMED_FUNCTIONS,
    Gate,
    Netlist,
    NodeRef,
    TruthTable,
    canonical_gate,
    permute_table,
)
from .oracle import ObservationRecord


class EncodingError(ValueError):
    pass


def default_whitelist() -> dict[int, list[TruthTable]]:
    return {2: [NAMED_FUNCTIONS[f] for f in LIMITED_FUNCTIONS]}


@dataclass
class ConfigVars:
    tag: str
    function: list[list[int]]
    selectors: list[list[dict[NodeRef, int]]]
    po_selectors: list[dict[NodeRef, int]]
    levels: list[list[int]] | None = None
    reach: dict[tuple[int, int], int] = field(default_factory=dict)


@dataclass
class CamouflagedModel:
    n_inputs: int
    n_outputs: int
    gate_arities: list[int]
    allowed_functions: dict[int, list[TruthTable]] | None = None
    no_floating: bool = True
    anchor_po_level: bool = False
    configs: list[ConfigVars] = field(default_factory=list)

    @property
    def n_gates(self) -> int:
        return len(self.gate_arities)

    @property
    def n_levels(self) -> int:
        return self.n_gates

    def candidates(self, j: int) -> list[NodeRef]:
        cands = [NodeRef.pi(i) for i in range(self.n_inputs)]
        cands += [NodeRef.gate(k) for k in range(self.n_gates) if k != j]
        return cands

    def po_candidates(self) -> list[NodeRef]:
        cands = [NodeRef.pi(i) for i in range(self.n_inputs)]
        return cands + [NodeRef.gate(k) for k in range(self.n_gates)]


@dataclass
class QuerySignals:
    inputs: list
    inject: list
    faultval: object
    probes: list


@dataclass
class Instance:
    config: ConfigVars
    signals: QuerySignals
    pins: list[list]
    nodes: list
    fe: list
    outputs: list

    def value_of(self, ref: NodeRef):
        return self.signals.inputs[ref.index] if ref.is_pi else self.fe[ref.index]


@dataclass
class Miter:
    signals: QuerySignals
    copies: tuple[Instance, Instance]
    diff: int


# -- configuration -------------------------------------------------------------


def build_skeleton(
    arities: Sequence[int],
    n_inputs: int,
    n_outputs: int,
    allowed_functions: dict[int, list[TruthTable]] | None = None,
    no_floating: bool = True,
    anchor_po_level: bool = False,
    build: CnfBuild | None = None,
) -> tuple[CamouflagedModel, CnfBuild]:
    if len(arities) < 1:
        raise EncodingError("model needs at least one gate")
    if any(a < 1 for a in arities):
        raise EncodingError("gate arities must be >= 1")
    if allowed_functions is not None:
        for a in set(arities):
            if not allowed_functions.get(a):
                raise EncodingError(f"function whitelist is empty for arity {a}")
    model = CamouflagedModel(
        n_inputs, n_outputs, list(arities), allowed_functions, no_floating, anchor_po_level
    )
    build = build if build is not None else CnfBuild()
    add_config(model, build)
    return model, build


def add_config(model: CamouflagedModel, build: CnfBuild, tag: str | None = None) -> ConfigVars:
    tag = tag or f"C{len(model.configs) + 1}"
    function, selectors = [], []
    with build.role("function"):
        for j, k in enumerate(model.gate_arities):
            function.append([build.new_var(f"{tag}.g{j}.tt{m}") for m in range(1 << k)])
    with build.role("connection"):
        for j, k in enumerate(model.gate_arities):
            pins = []
            for p in range(k):
                sel = {c: build.new_var(f"{tag}.g{j}.pin{p}={c!r}") for c in model.candidates(j)}
                exactly_one(build, list(sel.values()))
                pins.append(sel)
            selectors.append(pins)
        po_selectors = []
        for o in range(model.n_outputs):
            sel = {c: build.new_var(f"{tag}.po{o}={c!r}") for c in model.po_candidates()}
            exactly_one(build, list(sel.values()))
            po_selectors.append(sel)
    cfg = ConfigVars(tag, function, selectors, po_selectors)

    if model.allowed_functions is not None:
        with build.role("function"):
            for j, k in enumerate(model.gate_arities):
                _restrict_function(build, cfg.function[j], model.allowed_functions[k])
    if model.no_floating:
        with build.role("connection"):
            for k in range(model.n_gates):
                ref = NodeRef.gate(k)
                users = [sel[ref] for j in range(model.n_gates) if j != k for sel in selectors[j]]
                users += [sel[ref] for sel in po_selectors]
                build.add(users)
    model.configs.append(cfg)
    return cfg


def _restrict_function(build: CnfBuild, bits: list[int], allowed: list[TruthTable]) -> None:
    choice = []
    for tt in allowed:
        a = build.new_var()
        for b, v in zip(bits, tt.bits):
            build.add([-a, b if v else -b])
        choice.append(a)
    build.add(choice)


def add_levelization(model: CamouflagedModel, build: CnfBuild, configs=None) -> None:
    """Thermometer level bits l_0..l_n per gate plus the ordering constraint.

    Levels grow from outputs toward inputs: a gate's drivers must sit at a
    strictly higher level. ``l_i(g)`` true means level(g) <= i.
    """
    n = model.n_levels
    for cfg in configs if configs is not None else model.configs:
        if cfg.levels is not None:
            continue
        with build.role("levelization"):
            levels = [[build.new_var(f"{cfg.tag}.g{j}.l{i}") for i in range(n + 1)] for j in range(model.n_gates)]
            for lv in levels:
                for i in range(1, n + 1):
                    build.add([lv[i], -lv[i - 1]])
                build.add([-lv[0]])
                build.add([lv[n]])
            for j in range(model.n_gates):
                for k in range(model.n_gates):
                    if k == j:
                        continue
                    sels = [sel[NodeRef.gate(k)] for sel in cfg.selectors[j]]
                    r = build.new_var(f"{cfg.tag}.R(g{k},g{j})")
                    for s in sels:
                        build.add([-s, r])
                    build.add([-r, *sels])
                    cfg.reach[(k, j)] = r
                    for i in range(1, n + 1):
                        build.add([levels[j][i - 1], -r, -levels[k][i]])
            if model.anchor_po_level:
                for sel in cfg.po_selectors:
                    for k in range(model.n_gates):
                        build.add([-sel[NodeRef.gate(k)], levels[k][1]])
        cfg.levels = levels


def decode_level(bits: Sequence[int]) -> int:
    for i, b in enumerate(bits):
        if b:
            return i
    raise EncodingError("level vector has no 1 bit")


# -- instances -----------------------------------------------------------------


def query_signals(
    model: CamouflagedModel, build: CnfBuild, fault_mode: bool = True, probe_mode="all"
) -> QuerySignals:
    """Free query signals for a miter. ``probe_mode`` is 'off', 'all' or an int budget."""
    with build.role("io"):
        inputs = [build.new_var(f"in{i}") for i in range(model.n_inputs)]
    if fault_mode:
        with build.role("fault"):
            inject = [build.new_var(f"injectFault_g{x}") for x in range(model.n_gates)]
            faultval = build.new_var("FaultVal")
            at_most_one(build, inject)
    else:
        inject = [False] * model.n_gates
        faultval = False
    with build.role("io"):
        if probe_mode == "off":
            probes = [False] * model.n_gates
        elif probe_mode == "all":
            probes = [True] * model.n_gates
        else:
            probes = [build.new_var(f"Probe_g{x}") for x in range(model.n_gates)]
            at_most_k(build, probes, int(probe_mode))
    return QuerySignals(inputs, inject, faultval, probes)


def constant_signals(model: CamouflagedModel, record: ObservationRecord) -> QuerySignals:
    q = record.query
    inject = [False] * model.n_gates
    faultval = False
    if q.fault is not None:
        inject[q.fault.target.index] = True
        faultval = bool(q.fault.value)
    probes = [NodeRef.gate(x) in q.probes for x in range(model.n_gates)]
    return QuerySignals([bool(b) for b in q.vector], inject, faultval, probes)


def instantiate(model: CamouflagedModel, build: CnfBuild, cfg: ConfigVars, signals: QuerySignals, tag: str = "") -> Instance:
    G = model.n_gates
    with build.role("function"):
        nodes = [build.new_var() for _ in range(G)]
    fe = []
    with build.role("fault"):
        for x in range(G):
            inj = signals.inject[x]
            if inj is False:
                fe.append(nodes[x])
            elif inj is True:
                fe.append(signals.faultval)
            else:
                v = build.new_var()
                fv = signals.faultval
                build.add([neg(inj), neg(fv), v])
                build.add([neg(inj), fv, -v])
                build.add([inj, -nodes[x], v])
                build.add([inj, nodes[x], -v])
                fe.append(v)

    def value(ref):
        return signals.inputs[ref.index] if ref.is_pi else fe[ref.index]

    pins = []
    with build.role("connection"):
        for j in range(G):
            row = []
            for sel in cfg.selectors[j]:
                p = build.new_var()
                for c, s in sel.items():
                    val = value(c)
                    build.add([-s, neg(val), p])
                    build.add([-s, val, -p])
                row.append(p)
            pins.append(row)
    with build.role("function"):
        for j in range(G):
            k = len(pins[j])
            for m in range(1 << k):
                mismatch = [pins[j][i] if (m >> i) & 1 == 0 else -pins[j][i] for i in range(k)]
                f = cfg.function[j][m]
                build.add([*mismatch, -f, nodes[j]])
                build.add([*mismatch, f, -nodes[j]])
    outputs = []
    with build.role("io"):
        for sel in cfg.po_selectors:
            o = build.new_var()
            for c, s in sel.items():
                val = value(c)
                build.add([-s, neg(val), o])
                build.add([-s, val, -o])
            outputs.append(o)
    return Instance(cfg, signals, pins, nodes, fe, outputs)


def add_observation(model: CamouflagedModel, build: CnfBuild, record: ObservationRecord, cfg: ConfigVars | None = None) -> Instance:
    """Constrain ``cfg`` to reproduce ``record``."""
    cfg = cfg or model.configs[0]
    inst = instantiate(model, build, cfg, constant_signals(model, record))
    with build.role("io"):
        for lit, bit in zip(inst.outputs, record.outputs):
            build.add([lit if bit else neg(lit)])
        for ref, bit in record.probed.items():
            lit = inst.fe[ref.index]
            build.add([lit if bit else neg(lit)])
    return inst


def build_miter(model: CamouflagedModel, build: CnfBuild, probe_mode="all", fault_mode: bool = True) -> Miter:
    """Two configurations sharing one query; ``diff`` is satisfiable exactly when
    they disagree on a primary output or on an enabled probe."""
    while len(model.configs) < 2:
        add_config(model, build)
    if model.configs[0].levels is not None:
        add_levelization(model, build)
    signals = query_signals(model, build, fault_mode, probe_mode)
    a = instantiate(model, build, model.configs[0], signals)
    b = instantiate(model, build, model.configs[1], signals)
    with build.role("io"):
        diffs = []
        for o1, o2 in zip(a.outputs, b.outputs):
            d = build.new_var()
            build.add([-d, o1, o2])
            build.add([-d, -o1, -o2])
            diffs.append(d)
        for x in range(model.n_gates):
            if signals.probes[x] is False:
                continue
            d = build.new_var()
            build.add([-d, signals.probes[x]])
            build.add([-d, a.fe[x], b.fe[x]])
            build.add([-d, neg(a.fe[x]), neg(b.fe[x])])
            diffs.append(d)
        diff = build.new_var("diff")
        build.add([-diff, *diffs])
    return Miter(signals, (a, b), diff)


# -- decoding and blocking -----------------------------------------------------


def decode_config(session, model: CamouflagedModel, cfg: ConfigVars | None = None, names: Netlist | None = None) -> Netlist:
    """Netlist for ``cfg`` under the session's current model.

    ``names`` copies node names from a reference netlist with the same shape.
    """
    cfg = cfg or model.configs[0]
    gates = []
    for j, k in enumerate(model.gate_arities):
        bits = tuple(session.value(v) for v in cfg.function[j])
        pins = tuple(next(c for c, s in sel.items() if session.value(s)) for sel in cfg.selectors[j])
        name = names.gate_name(j) if names is not None else ""
        gates.append(Gate(j, TruthTable(k, bits), pins, name))
    outputs = tuple(next(c for c, s in sel.items() if session.value(s)) for sel in cfg.po_selectors)
    if names is not None:
        return Netlist(model.n_inputs, tuple(gates), outputs, names.input_names, names.output_names)
    return Netlist(model.n_inputs, tuple(gates), outputs)


def decode_raw_wiring(session, model: CamouflagedModel, cfg: ConfigVars | None = None) -> list[list[NodeRef]]:
    """Pin drivers without Netlist validation (a wiring may be cyclic)."""
    cfg = cfg or model.configs[0]
    return [[next(c for c, s in sel.items() if session.value(s)) for sel in pins] for pins in cfg.selectors]


def decode_levels(session, model: CamouflagedModel, cfg: ConfigVars | None = None) -> list[int]:
    cfg = cfg or model.configs[0]
    return [decode_level([session.value(v) for v in lv]) for lv in cfg.levels]


def config_literals(model: CamouflagedModel, cfg: ConfigVars, netlist: Netlist) -> list[int]:
    """Assumptions fixing ``cfg`` to exactly ``netlist``'s functions and wiring."""
    _check_shape(model, netlist)
    lits = []
    for g in netlist.gates:
        lits += [v if b else -v for v, b in zip(cfg.function[g.id], g.function.bits)]
        lits += [cfg.selectors[g.id][p][drv] for p, drv in enumerate(g.pins)]
    lits += [sel[drv] for sel, drv in zip(cfg.po_selectors, netlist.outputs)]
    return lits


def _check_shape(model, netlist):
    if (netlist.n_inputs, netlist.n_outputs, netlist.arities()) != (model.n_inputs, model.n_outputs, model.gate_arities):
        raise EncodingError("netlist shape does not match the model")


def gate_variants(g: Gate) -> set[tuple[tuple[NodeRef, ...], tuple[int, ...]]]:
    """All (pins, table) assignments structurally equal to ``g``."""
    out = set()
    for perm in itertools.permutations(range(g.arity)):
        pins = tuple(g.pins[i] for i in perm)
        out.add((pins, permute_table(g.function, perm).bits))
    return out


def block_structure(model: CamouflagedModel, build: CnfBuild, cfg: ConfigVars, netlist: Netlist) -> None:
    """Forbid every configuration structurally equal to ``netlist``."""
    _check_shape(model, netlist)
    clause = []
    with build.role("connection"):
        for g in netlist.gates:
            match = build.new_var()
            for pins, bits in gate_variants(canonical_gate(g)):
                lits = [cfg.selectors[g.id][p][d] for p, d in enumerate(pins)]
                lits += [v if b else -v for v, b in zip(cfg.function[g.id], bits)]
                build.add([*(-l for l in lits), match])
            clause.append(-match)
        clause += [-sel[drv] for sel, drv in zip(cfg.po_selectors, netlist.outputs)]
        build.add(clause)


def role_breakdown(build: CnfBuild) -> dict[str, float]:
    counts = build.var_role_counts()
    total = sum(counts.values()) or 1
    return {r: counts[r] / total for r in counts}
