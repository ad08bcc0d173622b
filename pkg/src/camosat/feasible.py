"""Driver-tuple pruning from fault-free probe traces.

A gate computes a deterministic function of its pin values. If two trace rows
agree on the values of a candidate driver tuple but the gate output differs,
that tuple cannot be the gate's fan-in. Tuples are unordered multisets since
pin order is not observable.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Sequence

from .netlist import Netlist, NodeRef
from .oracle import Oracle, Query, all_vectors

EXHAUSTIVE_LIMIT = 12
SAMPLE_SIZE = 4096


@dataclass
class ProbeTraceSet:
    vectors: list[tuple[int, ...]]
    nodes: list[NodeRef]
    rows: list[tuple[int, ...]] = field(default_factory=list)

    def column(self, ref: NodeRef) -> tuple[int, ...]:
        k = self.nodes.index(ref)
        return tuple(r[k] for r in self.rows)


FeasibleSet = dict  # gate index -> set of sorted driver tuples


def default_vectors(n_inputs: int, seed: int | None = None) -> list[tuple[int, ...]]:
    if n_inputs <= EXHAUSTIVE_LIMIT:
        return all_vectors(n_inputs)
    rng = random.Random(seed)
    return [tuple(rng.randint(0, 1) for _ in range(n_inputs)) for _ in range(SAMPLE_SIZE)]


def collect_traces(oracle, vectors: Sequence[Sequence[int]], n_gates: int | None = None) -> ProbeTraceSet:
    """One fault-free, fully probed observation per vector.

    ``oracle`` may be an Oracle or a Netlist (wrapped in an Oracle).
    """
    if isinstance(oracle, Netlist):
        n_gates = oracle.n_gates
        oracle = Oracle(oracle)
    if n_gates is None:
        raise ValueError("n_gates is required when querying an opaque oracle")
    probes = frozenset(NodeRef.gate(x) for x in range(n_gates))
    nodes = [NodeRef.pi(i) for i in range(oracle.n_inputs)] + sorted(probes)
    traces = ProbeTraceSet([], nodes)
    for v in vectors:
        rec = oracle.observe(Query(tuple(v), None, probes))
        traces.vectors.append(rec.query.vector)
        traces.rows.append(rec.query.vector + tuple(rec.probed[p] for p in sorted(probes)))
    return traces


def is_deterministic(traces: ProbeTraceSet, target: NodeRef, drivers: Sequence[NodeRef]) -> bool:
    cols = [traces.nodes.index(d) for d in drivers]
    out = traces.nodes.index(target)
    seen = {}
    for row in traces.rows:
        key = tuple(row[c] for c in cols)
        if seen.setdefault(key, row[out]) != row[out]:
            return False
    return True


def feasible_tuples(traces: ProbeTraceSet, target: NodeRef, arity: int, candidates: Sequence[NodeRef]) -> set[tuple[NodeRef, ...]]:
    cands = sorted(c for c in candidates if c != target)
    return {
        combo
        for combo in itertools.combinations_with_replacement(cands, arity)
        if is_deterministic(traces, target, combo)
    }


def feasible_set(traces: ProbeTraceSet, model) -> FeasibleSet:
    """Feasible driver tuples for every gate of a CamouflagedModel."""
    return {
        j: feasible_tuples(traces, NodeRef.gate(j), k, model.candidates(j))
        for j, k in enumerate(model.gate_arities)
    }


def emit_blocking(fs: FeasibleSet, model, build, configs=None) -> int:
    """Forbid every driver multiset outside the feasible set; returns how many
    multisets were excluded (per gate, counted once regardless of copies)."""
    excluded = 0
    with build.role("connection"):
        for j, allowed in fs.items():
            k = model.gate_arities[j]
            for combo in itertools.combinations_with_replacement(sorted(model.candidates(j)), k):
                if combo in allowed:
                    continue
                excluded += 1
                for cfg in configs if configs is not None else model.configs:
                    for order in set(itertools.permutations(combo)):
                        build.add([-cfg.selectors[j][p][d] for p, d in enumerate(order)])
    return excluded


def dump_feasible(fs: FeasibleSet, names: Netlist | None = None) -> str:
    def nm(ref):
        return names.node_name(ref) if names is not None else repr(ref)

    out = {}
    for j, tuples in sorted(fs.items()):
        key = names.gate_name(j) if names is not None else f"g{j}"
        out[key] = sorted([nm(d) for d in combo] for combo in tuples)
    return json.dumps(out, indent=2)
