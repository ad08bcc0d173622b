"""Golden-model oracle: simulation, single stuck-at faults, probing, and logs.

Observation log format, one record per line (``#`` lines are comments)::

    vector=<bits> fault=<gate>:<0|1>|- probes=<g>,<g>...|- outputs=<bits> probed=<g>:<bit>,...|-

``vector`` character k is primary input k; ``outputs`` character k is
primary output k. Node names are the netlist's names. Records are replayable
against any netlist that uses the same names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .netlist import Netlist, NetlistError, NodeRef, row_index, topological_order

LOG_HEADER = "# camosat observation log v1"


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class FaultSpec:
    target: NodeRef
    value: int

    def __post_init__(self):
        if not self.target.is_gate:
            raise OracleError("faults may only target gate outputs")
        if self.value not in (0, 1):
            raise OracleError(f"stuck-at value must be 0 or 1, got {self.value}")


@dataclass(frozen=True)
class Query:
    vector: tuple[int, ...]
    fault: FaultSpec | None = None
    probes: frozenset[NodeRef] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(int(b) for b in self.vector))
        object.__setattr__(self, "probes", frozenset(self.probes))
        if any(not p.is_gate for p in self.probes):
            raise OracleError("only gate outputs can be probed")


@dataclass(frozen=True)
class ObservationRecord:
    query: Query
    outputs: tuple[int, ...]
    probed: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if set(self.probed) != set(self.query.probes):
            raise OracleError("probed values must cover exactly the query's probe set")


@dataclass(frozen=True)
class Valuation:
    gates: tuple[int, ...]
    outputs: tuple[int, ...]


def _check_query(n: Netlist, q: Query) -> None:
    if len(q.vector) != n.n_inputs:
        raise OracleError(f"vector has {len(q.vector)} bits, netlist has {n.n_inputs} inputs")
    if q.fault is not None and q.fault.target.index >= n.n_gates:
        raise OracleError(f"fault target {q.fault.target!r} out of range")
    for p in q.probes:
        if p.index >= n.n_gates:
            raise OracleError(f"probe {p!r} out of range")


def _evaluate(n: Netlist, vector: Sequence[int], fault: FaultSpec | None) -> Valuation:
    # Faulted node's forced value is what its fanout (and any probe) sees.
    values = [0] * n.n_gates
    for j in topological_order(n):
        g = n.gates[j]
        pins = [vector[p.index] if p.is_pi else values[p.index] for p in g.pins]
        values[j] = g.function.bits[row_index(pins)]
        if fault is not None and fault.target.index == j:
            values[j] = fault.value
    outputs = tuple(vector[o.index] if o.is_pi else values[o.index] for o in n.outputs)
    return Valuation(tuple(values), outputs)


def simulate(n: Netlist, vector: Sequence[int]) -> Valuation:
    if len(vector) != n.n_inputs:
        raise OracleError(f"vector has {len(vector)} bits, netlist has {n.n_inputs} inputs")
    return _evaluate(n, [int(b) for b in vector], None)


def observe(n: Netlist, q: Query) -> ObservationRecord:
    _check_query(n, q)
    val = _evaluate(n, q.vector, q.fault)
    probed = {p: val.gates[p.index] for p in q.probes}
    return ObservationRecord(q, val.outputs, probed)


def replay_consistent(n: Netlist, log: Iterable[ObservationRecord]) -> bool:
    for rec in log:
        try:
            got = observe(n, rec.query)
        except OracleError:
            return False
        if got.outputs != rec.outputs or got.probed != rec.probed:
            return False
    return True


class Oracle:
    """Query counter around a hidden netlist; the attack only sees ``observe``.

    Subclass and override ``observe`` to put a hardware or external simulator
    behind the same boundary.
    """

    def __init__(self, netlist: Netlist):
        self._netlist = netlist
        self.queries = 0
        self.n_inputs = netlist.n_inputs
        self.n_outputs = netlist.n_outputs

    def observe(self, q: Query) -> ObservationRecord:
        self.queries += 1
        return observe(self._netlist, q)


def all_vectors(n_inputs: int) -> list[tuple[int, ...]]:
    return [tuple((v >> (n_inputs - 1 - i)) & 1 for i in range(n_inputs)) for v in range(1 << n_inputs)]


def bits_to_str(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def str_to_bits(text: str) -> tuple[int, ...]:
    if set(text) - {"0", "1"}:
        raise OracleError(f"not a bitstring: {text!r}")
    return tuple(int(c) for c in text)


# -- log I/O -------------------------------------------------------------------


def format_record(n: Netlist, rec: ObservationRecord) -> str:
    q = rec.query
    fault = "-" if q.fault is None else f"{n.node_name(q.fault.target)}:{q.fault.value}"
    probes = sorted(q.probes)
    probe_txt = ",".join(n.node_name(p) for p in probes) or "-"
    probed_txt = ",".join(f"{n.node_name(p)}:{rec.probed[p]}" for p in probes) or "-"
    return (
        f"vector={bits_to_str(q.vector)} fault={fault} probes={probe_txt} "
        f"outputs={bits_to_str(rec.outputs)} probed={probed_txt}"
    )


def parse_record(n: Netlist, line: str) -> ObservationRecord:
    try:
        fields = dict(tok.split("=", 1) for tok in line.split())
        vector = str_to_bits(fields["vector"])
        fault = None
        if fields["fault"] != "-":
            name, val = fields["fault"].rsplit(":", 1)
            fault = FaultSpec(n.node_by_name(name), int(val))
        probes = frozenset()
        if fields["probes"] != "-":
            probes = frozenset(n.node_by_name(nm) for nm in fields["probes"].split(","))
        probed = {}
        if fields["probed"] != "-":
            for item in fields["probed"].split(","):
                name, val = item.rsplit(":", 1)
                probed[n.node_by_name(name)] = int(val)
        outputs = str_to_bits(fields["outputs"])
    except (KeyError, ValueError, NetlistError) as exc:
        raise OracleError(f"malformed log record {line!r}: {exc}") from None
    return ObservationRecord(Query(vector, fault, probes), outputs, probed)


def dump_log(n: Netlist, log: Iterable[ObservationRecord]) -> str:
    return "\n".join([LOG_HEADER, *(format_record(n, r) for r in log)]) + "\n"


def load_log(n: Netlist, text: str) -> list[ObservationRecord]:
    return [
        parse_record(n, line)
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
