"""Gate-level netlist model, text format, and structural utilities.

Text format (line based, ``#`` starts a comment)::

    input a b c
    output y z
    gate g0 tt:0111 a b
    gate g1 tt:10 g0
    connect y g0
    connect z g1

``tt:`` lists ``2**k`` output bits, row 0 first; row ``m`` is selected by the
pin values read as a k-bit number with pin 0 as the least significant bit.
Drivers are primary-input or gate names. Gate ids follow declaration order.
Output names live in their own namespace, so ``connect N22 N22`` is legal.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

PI = 0
GATE = 1


class NetlistError(ValueError):
    """Raised for malformed or semantically invalid netlists."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CycleError(NetlistError):
    def __init__(self, cycle: Sequence[int]):
        self.cycle = list(cycle)
        super().__init__(f"combinational cycle through gates {self.cycle}")


@dataclass(frozen=True, order=True)
class NodeRef:
    """A primary input (``kind == PI``) or a gate output (``kind == GATE``).

    The dataclass ordering puts every primary input before every gate output,
    then orders by index; canonical pin order relies on this.
    """

    kind: int
    index: int

    @classmethod
    def pi(cls, index: int) -> "NodeRef":
        return cls(PI, index)

    @classmethod
    def gate(cls, index: int) -> "NodeRef":
        return cls(GATE, index)

    @property
    def is_pi(self) -> bool:
        return self.kind == PI

    @property
    def is_gate(self) -> bool:
        return self.kind == GATE

    def __repr__(self) -> str:
        return f"{'pi' if self.kind == PI else 'g'}{self.index}"


@dataclass(frozen=True)
class TruthTable:
    arity: int
    bits: tuple[int, ...]

    def __post_init__(self):
        if self.arity < 1:
            raise NetlistError(f"truth table arity must be >= 1, got {self.arity}")
        if len(self.bits) != 1 << self.arity:
            raise NetlistError(
                f"truth table of arity {self.arity} needs {1 << self.arity} bits, got {len(self.bits)}"
            )
        if any(b not in (0, 1) for b in self.bits):
            raise NetlistError("truth table bits must be 0 or 1")

    @classmethod
    def from_string(cls, text: str) -> "TruthTable":
        bits = tuple(int(c) for c in text)
        arity = max(len(bits).bit_length() - 1, 0)
        if len(bits) == 0 or 1 << arity != len(bits):
            raise NetlistError(f"truth table length {len(bits)} is not a power of two >= 2")
        return cls(arity, bits)

    @classmethod
    def from_function(cls, arity: int, fn) -> "TruthTable":
        rows = []
        for m in range(1 << arity):
            rows.append(int(bool(fn(*[(m >> i) & 1 for i in range(arity)]))))
        return cls(arity, tuple(rows))

    def __call__(self, *pins: int) -> int:
        return self.bits[row_index(pins)]

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def row_index(pins: Iterable[int]) -> int:
    m = 0
    for i, v in enumerate(pins):
        m |= (v & 1) << i
    return m


NAMED_FUNCTIONS = {
    "AND": TruthTable(2, (0, 0, 0, 1)),
    "OR": TruthTable(2, (0, 1, 1, 1)),
    "NAND": TruthTable(2, (1, 1, 1, 0)),
    "NOR": TruthTable(2, (1, 0, 0, 0)),
    "XOR": TruthTable(2, (0, 1, 1, 0)),
    "XNOR": TruthTable(2, (1, 0, 0, 1)),
    "NOT": TruthTable(1, (1, 0)),
    "BUF": TruthTable(1, (0, 1)),
}

LIMITED_FUNCTIONS = ("AND", "OR", "NAND", "NOR", "XOR", "XNOR")


@dataclass(frozen=True)
class Gate:
    id: int
    function: TruthTable
    pins: tuple[NodeRef, ...]
    name: str = field(default="", compare=False)

    @property
    def arity(self) -> int:
        return len(self.pins)

    def __post_init__(self):
        if self.function.arity != len(self.pins):
            raise NetlistError(
                f"gate {self.name or self.id}: truth table arity {self.function.arity} "
                f"does not match {len(self.pins)} pins"
            )
        if NodeRef.gate(self.id) in self.pins:
            raise NetlistError(f"gate {self.name or self.id} reads its own output")


@dataclass(frozen=True)
class Netlist:
    n_inputs: int
    gates: tuple[Gate, ...]
    outputs: tuple[NodeRef, ...]
    input_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.input_names:
            object.__setattr__(self, "input_names", tuple(f"i{k}" for k in range(self.n_inputs)))
        if not self.output_names:
            object.__setattr__(self, "output_names", tuple(f"o{k}" for k in range(len(self.outputs))))
        validate(self)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    def gate_name(self, index: int) -> str:
        return self.gates[index].name or f"g{index}"

    def node_name(self, ref: NodeRef) -> str:
        return self.input_names[ref.index] if ref.is_pi else self.gate_name(ref.index)

    def node_by_name(self, name: str) -> NodeRef:
        for k, nm in enumerate(self.input_names):
            if nm == name:
                return NodeRef.pi(k)
        for g in self.gates:
            if self.gate_name(g.id) == name:
                return NodeRef.gate(g.id)
        raise NetlistError(f"unknown node {name!r}")

    def arities(self) -> list[int]:
        return [g.arity for g in self.gates]


def validate(n: Netlist) -> None:
    if n.n_inputs < 0:
        raise NetlistError("negative input count")
    if len(n.input_names) != n.n_inputs or len(n.output_names) != len(n.outputs):
        raise NetlistError("name lists do not match declared counts")

    def check(ref: NodeRef, where: str):
        limit = n.n_inputs if ref.is_pi else len(n.gates)
        if not 0 <= ref.index < limit:
            raise NetlistError(f"{where}: reference {ref!r} out of range")

    for k, g in enumerate(n.gates):
        if g.id != k:
            raise NetlistError(f"gate at position {k} has id {g.id}")
        for p in g.pins:
            check(p, f"gate {n.gate_name(k)}")
    for o in n.outputs:
        check(o, "primary output")
    topological_order(n)


def topological_order(n: Netlist) -> list[int]:
    """Gate ids such that every gate follows the gates it reads from.

    Ties are broken by ascending gate id. Raises CycleError naming the gates on
    one cycle when no order exists.
    """
    fanout: list[list[int]] = [[] for _ in n.gates]
    indeg = [0] * len(n.gates)
    for g in n.gates:
        for p in set(g.pins):
            if p.is_gate:
                fanout[p.index].append(g.id)
                indeg[g.id] += 1
    ready = [g.id for g in n.gates if indeg[g.id] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        j = heapq.heappop(ready)
        order.append(j)
        for k in fanout[j]:
            indeg[k] -= 1
            if indeg[k] == 0:
                heapq.heappush(ready, k)
    if len(order) != len(n.gates):
        raise CycleError(_find_cycle(n, {j for j in range(len(n.gates)) if indeg[j] > 0}))
    return order


def _find_cycle(n: Netlist, stuck: set[int]) -> list[int]:
    # Every stuck gate has a stuck predecessor, so walking backwards must repeat.
    j = min(stuck)
    seen: dict[int, int] = {}
    path = []
    while j not in seen:
        seen[j] = len(path)
        path.append(j)
        j = min(p.index for p in n.gates[j].pins if p.is_gate and p.index in stuck)
    return list(reversed(path[seen[j]:]))


def is_acyclic(n_gates: int, pins: Sequence[Sequence[NodeRef]]) -> bool:
    """Acyclicity test for raw wiring that may not form a valid Netlist."""
    state = [0] * n_gates

    def visit(j):
        state[j] = 1
        for p in pins[j]:
            if p.is_gate:
                if state[p.index] == 1:
                    return False
                if state[p.index] == 0 and not visit(p.index):
                    return False
        state[j] = 2
        return True

    return all(state[j] or visit(j) for j in range(n_gates))


# -- canonical forms -----------------------------------------------------------


def permute_table(tt: TruthTable, perm: Sequence[int]) -> TruthTable:
    """Truth table for pins reordered so that new pin i is old pin perm[i]."""
    bits = []
    for m in range(1 << tt.arity):
        old = 0
        for i, src in enumerate(perm):
            old |= ((m >> i) & 1) << src
        bits.append(tt.bits[old])
    return TruthTable(tt.arity, tuple(bits))


def canonical_gate(g: Gate) -> Gate:
    """Gate with pins sorted and its table permuted to match.

    When pins repeat, several permutations sort them; the lexicographically
    smallest resulting table is chosen so the form is unique.
    """
    target = tuple(sorted(g.pins))
    best = None
    for perm in itertools.permutations(range(g.arity)):
        if tuple(g.pins[i] for i in perm) != target:
            continue
        tt = permute_table(g.function, perm)
        if best is None or tt.bits < best.bits:
            best = tt
    return Gate(g.id, best, target, g.name)


def canonical_key(n: Netlist) -> tuple:
    """Hashable structural fingerprint; equal keys iff structural_equal."""
    gates = tuple((c.pins, c.function.bits) for c in map(canonical_gate, n.gates))
    return (n.n_inputs, n.outputs, gates)


def structural_equal(a: Netlist, b: Netlist) -> bool:
    if a.n_inputs != b.n_inputs or a.outputs != b.outputs or len(a.gates) != len(b.gates):
        return False
    return canonical_key(a) == canonical_key(b)


# -- parser / serializer -------------------------------------------------------


def parse_netlist(text: str) -> Netlist:
    input_names: list[str] = []
    output_names: list[str] = []
    gate_decls: list[tuple[int, str, TruthTable, list[str]]] = []
    connects: dict[str, tuple[int, str]] = {}
    seen_nodes: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        kw, args = line[0], line[1:]
        if kw == "input":
            for nm in args:
                if nm in seen_nodes:
                    raise NetlistError(f"duplicate node name {nm!r}", lineno)
                seen_nodes[nm] = lineno
                input_names.append(nm)
        elif kw == "output":
            for nm in args:
                if nm in output_names:
                    raise NetlistError(f"duplicate output name {nm!r}", lineno)
                output_names.append(nm)
        elif kw == "gate":
            if len(args) < 3 or not args[1].startswith("tt:"):
                raise NetlistError("expected 'gate <name> tt:<bits> <driver>...'", lineno)
            nm = args[0]
            if nm in seen_nodes:
                raise NetlistError(f"duplicate node name {nm!r}", lineno)
            bits = args[1][3:]
            if not bits or set(bits) - {"0", "1"}:
                raise NetlistError(f"bad truth table {args[1]!r}", lineno)
            try:
                tt = TruthTable.from_string(bits)
            except NetlistError as exc:
                raise NetlistError(str(exc), lineno) from None
            if tt.arity != len(args) - 2:
                raise NetlistError(
                    f"gate {nm}: {len(bits)}-bit table needs {tt.arity} drivers, got {len(args) - 2}",
                    lineno,
                )
            seen_nodes[nm] = lineno
            gate_decls.append((lineno, nm, tt, args[2:]))
        elif kw == "connect":
            if len(args) != 2:
                raise NetlistError("expected 'connect <output> <driver>'", lineno)
            if args[0] in connects:
                raise NetlistError(f"output {args[0]!r} connected twice", lineno)
            connects[args[0]] = (lineno, args[1])
        else:
            raise NetlistError(f"unknown keyword {kw!r}", lineno)

    index = {nm: NodeRef.pi(k) for k, nm in enumerate(input_names)}
    index.update({decl[1]: NodeRef.gate(k) for k, decl in enumerate(gate_decls)})

    def resolve(nm, lineno):
        if nm not in index:
            raise NetlistError(f"undeclared node {nm!r}", lineno)
        return index[nm]

    gates = []
    for k, (lineno, nm, tt, drivers) in enumerate(gate_decls):
        pins = tuple(resolve(d, lineno) for d in drivers)
        if NodeRef.gate(k) in pins:
            raise NetlistError(f"gate {nm} reads its own output (self-loop)", lineno)
        gates.append(Gate(k, tt, pins, nm))

    outputs = []
    for nm in output_names:
        if nm not in connects:
            raise NetlistError(f"output {nm!r} is never connected")
        lineno, drv = connects[nm]
        outputs.append(resolve(drv, lineno))
    for nm, (lineno, _) in connects.items():
        if nm not in output_names:
            raise NetlistError(f"connect to undeclared output {nm!r}", lineno)

    return Netlist(len(input_names), tuple(gates), tuple(outputs), tuple(input_names), tuple(output_names))


def serialize_netlist(n: Netlist) -> str:
    lines = []
    if n.n_inputs:
        lines.append("input " + " ".join(n.input_names))
    if n.outputs:
        lines.append("output " + " ".join(n.output_names))
    for g in n.gates:
        drivers = " ".join(n.node_name(p) for p in g.pins)
        lines.append(f"gate {n.gate_name(g.id)} tt:{g.function} {drivers}")
    for nm, drv in zip(n.output_names, n.outputs):
        lines.append(f"connect {nm} {n.node_name(drv)}")
    return "\n".join(lines) + "\n"


def load_netlist(path) -> Netlist:
    with open(path) as fh:
        return parse_netlist(fh.read())


FIXTURES = ("c17", "present_sbox", "table1")


def fixture_path(name: str):
    if name not in FIXTURES:
        raise KeyError(f"no fixture named {name!r}; choose from {FIXTURES}")
    return resources.files("camosat") / "fixtures" / f"{name}.net"


def load_fixture(name: str) -> Netlist:
    return parse_netlist(fixture_path(name).read_text())


def internal_wire_count(n: Netlist) -> int:
    """Gates whose output feeds no primary output.

    This is the counting convention used by the bundled fixtures: c17 has 4,
    the S-Box 16.
    """
    po_drivers = {o.index for o in n.outputs if o.is_gate}
    return sum(1 for g in n.gates if g.id not in po_drivers)


def floating_gates(n: Netlist) -> list[int]:
    """Gates that drive neither a pin nor a primary output."""
    used = {p.index for g in n.gates for p in g.pins if p.is_gate}
    used |= {o.index for o in n.outputs if o.is_gate}
    return [g.id for g in n.gates if g.id not in used]


def random_netlist(
    rng: random.Random,
    n_inputs: int,
    n_gates: int,
    n_outputs: int,
    arity: int = 2,
    functions: Sequence[TruthTable] | None = None,
    no_floating: bool = False,
) -> Netlist:
    """Random acyclic netlist.

    Gates read only inputs and gates ranked earlier in a random permutation,
    so gate ids are generally not in topological order. With ``no_floating``
    the draw is repeated until every gate has fanout.
    """
    for _ in range(10_000):
        n = _random_netlist(rng, n_inputs, n_gates, n_outputs, arity, functions)
        if not no_floating or not floating_gates(n):
            return n
    raise ValueError("could not draw a netlist without floating gates; add outputs or arity")


def _random_netlist(rng, n_inputs, n_gates, n_outputs, arity, functions) -> Netlist:
    order = list(range(n_gates))
    rng.shuffle(order)
    rank = {g: r for r, g in enumerate(order)}
    gates = []
    for k in range(n_gates):
        cands = [NodeRef.pi(i) for i in range(n_inputs)]
        cands += [NodeRef.gate(j) for j in range(n_gates) if rank[j] < rank[k]]
        pins = tuple(rng.choice(cands) for _ in range(arity))
        if functions:
            tt = rng.choice(list(functions))
        else:
            tt = TruthTable(arity, tuple(rng.randint(0, 1) for _ in range(1 << arity)))
        gates.append(Gate(k, tt, pins))
    cands = [NodeRef.pi(i) for i in range(n_inputs)] + [NodeRef.gate(j) for j in range(n_gates)]
    outputs = tuple(rng.choice(cands) for _ in range(n_outputs))
    return Netlist(n_inputs, tuple(gates), outputs)
