"""Shared test utilities."""

from camosat.cnf import SatSession
from camosat.encoder import build_skeleton, config_literals, instantiate, query_signals
from camosat.netlist import NodeRef
from camosat.oracle import FaultSpec, Query, observe


def lit(v, bit):
    return v if bit else -v


class FixedCircuit:
    """The encoder's circuit model with its configuration pinned to ``truth``.

    Query signals are free variables, set per call through assumptions.
    """

    def __init__(self, truth, levelize=True):
        from camosat.encoder import add_levelization

        self.truth = truth
        self.model, self.build = build_skeleton(truth.arities(), truth.n_inputs, truth.n_outputs)
        if levelize:
            add_levelization(self.model, self.build)
        self.cfg = self.model.configs[0]
        self.signals = query_signals(self.model, self.build, fault_mode=True, probe_mode="all")
        self.inst = instantiate(self.model, self.build, self.cfg, self.signals)
        self.session = SatSession(self.build)
        self.fixed = config_literals(self.model, self.cfg, truth)

    def assumptions(self, vector, fault=None):
        a = list(self.fixed)
        a += [lit(v, b) for v, b in zip(self.signals.inputs, vector)]
        for x, inj in enumerate(self.signals.inject):
            a.append(lit(inj, fault is not None and fault.target.index == x))
        a.append(lit(self.signals.faultval, fault is not None and fault.value == 1))
        return a

    def evaluate(self, vector, fault=None):
        """(outputs, fault-enabled node values, unique) under the pinned config."""
        a = self.assumptions(vector, fault)
        assert self.session.solve(a)
        outs = tuple(self.session.value(o) for o in self.inst.outputs)
        fe = tuple(self.session.value(v) for v in self.inst.fe)
        # uniqueness: no model may differ on any output or fe value
        act = self.build.new_var()
        watched = list(self.inst.outputs) + list(self.inst.fe)
        current = outs + fe
        self.build.add([-act] + [lit(v, 1 - b) for v, b in zip(watched, current)])
        unique = self.session.solve(a + [act]) is False
        self.build.add([-act])
        return outs, fe, unique

    def close(self):
        self.session.close()


def all_faults(n):
    yield None
    for x in range(n.n_gates):
        for s in (0, 1):
            yield FaultSpec(NodeRef.gate(x), s)


def full_probe(n):
    return frozenset(NodeRef.gate(x) for x in range(n.n_gates))


def observe_all(n, vector, fault=None):
    return observe(n, Query(vector, fault, full_probe(n)))
