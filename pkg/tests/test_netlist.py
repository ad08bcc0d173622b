import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from camosat.netlist import (
    NAMED_FUNCTIONS,
    CycleError,
    Gate,
    Netlist,
    NetlistError,
    NodeRef,
    TruthTable,
    canonical_gate,
    permute_table,
    internal_wire_count,
    parse_netlist,
    random_netlist,
    serialize_netlist,
    structural_equal,
    topological_order,
)
from camosat.oracle import all_vectors, simulate

SBOX = [int(c, 16) for c in "C56B90AD3EF84712"]


def order_is_valid(n, order):
    pos = {g: k for k, g in enumerate(order)}
    return sorted(order) == list(range(n.n_gates)) and all(
        pos[p.index] < pos[g.id] for g in n.gates for p in g.pins if p.is_gate
    )


def test_parse_inverter(inverter):
    assert inverter.n_inputs == 1 and inverter.n_outputs == 1 and inverter.n_gates == 1
    assert inverter.gates[0].function == NAMED_FUNCTIONS["NOT"]
    assert inverter.outputs == (NodeRef.gate(0),)


def test_c17_fixture_counts(c17):
    assert (c17.n_gates, c17.n_inputs, c17.n_outputs) == (6, 5, 2)
    assert internal_wire_count(c17) == 4
    assert all(g.function == NAMED_FUNCTIONS["NAND"] for g in c17.gates)


def test_sbox_fixture_counts(sbox):
    assert (sbox.n_gates, sbox.n_inputs, sbox.n_outputs) == (20, 4, 4)
    assert internal_wire_count(sbox) == 16
    assert all(g.arity == 2 for g in sbox.gates)


def test_sbox_fixture_realizes_present_sbox(sbox):
    for x, v in enumerate(all_vectors(4)):
        y = SBOX[x]
        assert simulate(sbox, v).outputs == tuple((y >> (3 - i)) & 1 for i in range(4))


@pytest.mark.parametrize("name", ["c17", "present_sbox", "table1"])
def test_fixture_round_trip(name, request):
    n = request.getfixturevalue({"present_sbox": "sbox"}.get(name, name))
    again = parse_netlist(serialize_netlist(n))
    assert structural_equal(n, again)
    assert again.input_names == n.input_names and again.output_names == n.output_names


def test_round_trip_random_netlists():
    rng = random.Random(7)
    for _ in range(1000):
        n = random_netlist(rng, rng.randint(1, 5), rng.randint(1, 8), rng.randint(1, 3), rng.randint(1, 3))
        assert structural_equal(n, parse_netlist(serialize_netlist(n)))


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("input a\noutput y\ngate g0 tt:10 b\nconnect y g0\n", "undeclared node 'b'"),
        ("input a\noutput y\ngate g0 tt:0110 a\nconnect y g0\n", "needs 2 drivers"),
        ("input a\noutput y\ngate g0 tt:0110 a g0\nconnect y g0\n", "self-loop"),
        ("input a\noutput y\nwire g0\n", "unknown keyword"),
        ("input a\noutput y\ngate g0 tt:012 a\nconnect y g0\n", "bad truth table"),
        ("input a\noutput y\ngate g0 tt:101 a\nconnect y g0\n", "power of two"),
        ("input a\noutput y\ngate g0 tt:10 a\n", "never connected"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(NetlistError, match=fragment):
        parse_netlist(text)


def test_parse_error_reports_line_number():
    with pytest.raises(NetlistError) as exc:
        parse_netlist("# header\ninput a\noutput y\ngate g0 tt:10 nope\nconnect y g0\n")
    assert exc.value.line == 4


def test_cycle_is_rejected():
    text = "input a\noutput y\ngate g0 tt:0110 a g1\ngate g1 tt:0110 a g0\nconnect y g0\n"
    with pytest.raises(CycleError) as exc:
        parse_netlist(text)
    assert sorted(exc.value.cycle) == [0, 1]


def test_topological_order_chain():
    text = "input a\noutput y\ngate g0 tt:10 a\ngate g1 tt:10 g0\ngate g2 tt:10 g1\nconnect y g2\n"
    assert topological_order(parse_netlist(text)) == [0, 1, 2]


def test_topological_order_reversed_declaration():
    text = "input a\noutput y\ngate g0 tt:10 g1\ngate g1 tt:10 g2\ngate g2 tt:10 a\nconnect y g0\n"
    assert topological_order(parse_netlist(text)) == [2, 1, 0]


def test_topological_order_tie_break():
    text = "input a b\noutput y z\ngate g0 tt:10 a\ngate g1 tt:10 b\nconnect y g0\nconnect z g1\n"
    assert topological_order(parse_netlist(text)) == [0, 1]


def test_topological_order_c17(c17):
    assert order_is_valid(c17, topological_order(c17))


def test_topological_order_random():
    rng = random.Random(3)
    for _ in range(200):
        n = random_netlist(rng, 3, rng.randint(1, 10), 2)
        assert order_is_valid(n, topological_order(n))


def evaluate(g, values):
    return g.function(*[values[p] for p in g.pins])


def all_assignments(g):
    nodes = sorted(set(g.pins))
    for bits in itertools.product((0, 1), repeat=len(nodes)):
        yield dict(zip(nodes, bits))


def test_canonical_and_gate():
    g = Gate(0, NAMED_FUNCTIONS["AND"], (NodeRef.gate(3), NodeRef.pi(0)))
    c = canonical_gate(g)
    assert c.pins == (NodeRef.pi(0), NodeRef.gate(3))
    for vals in all_assignments(g):
        assert evaluate(c, vals) == evaluate(g, vals)


def test_canonical_asymmetric_gate():
    x, y = NodeRef.pi(0), NodeRef.pi(1)
    # pin0 = y, pin1 = x; computes x AND NOT y
    g = Gate(0, TruthTable.from_function(2, lambda p0, p1: p1 and not p0), (y, x))
    c = canonical_gate(g)
    assert c.pins == (x, y)
    assert c.function == TruthTable.from_function(2, lambda p0, p1: p0 and not p1)
    for vals in all_assignments(g):
        assert evaluate(c, vals) == evaluate(g, vals)


gate_strategy = st.builds(
    lambda arity, bits, pins: Gate(
        0, TruthTable(arity, tuple(bits[: 1 << arity])), tuple(NodeRef(*p) for p in pins[:arity])
    ),
    st.integers(1, 3),
    st.lists(st.integers(0, 1), min_size=8, max_size=8),
    st.lists(st.tuples(st.integers(0, 1), st.integers(1, 3)), min_size=3, max_size=3),
)


@settings(max_examples=300, deadline=None)
@given(gate_strategy)
def test_canonical_gate_preserves_function_and_is_idempotent(g):
    c = canonical_gate(g)
    assert canonical_gate(c) == c
    assert list(c.pins) == sorted(g.pins)
    for vals in all_assignments(g):
        assert evaluate(c, vals) == evaluate(g, vals)


def test_canonical_idempotent_100_random_gates():
    rng = random.Random(11)
    for _ in range(100):
        k = rng.randint(1, 3)
        pins = tuple(NodeRef(rng.randint(0, 1), rng.randint(1, 4)) for _ in range(k))
        g = Gate(0, TruthTable(k, tuple(rng.randint(0, 1) for _ in range(1 << k))), pins)
        assert canonical_gate(canonical_gate(g)) == canonical_gate(g)


def test_canonical_duplicate_pins_unique_form():
    a = NodeRef.pi(0)
    g1 = Gate(0, TruthTable(2, (0, 1, 0, 1)), (a, a))
    g2 = Gate(0, TruthTable(2, (0, 0, 1, 1)), (a, a))
    assert canonical_gate(g1) == canonical_gate(g2)


def swap_pins(n: Netlist, gate: int) -> Netlist:
    gates = list(n.gates)
    g = gates[gate]
    gates[gate] = Gate(g.id, permute_table(g.function, (1, 0)), (g.pins[1], g.pins[0]), g.name)
    return Netlist(n.n_inputs, tuple(gates), n.outputs, n.input_names, n.output_names)


def replace_function(n: Netlist, gate: int, tt: TruthTable) -> Netlist:
    gates = list(n.gates)
    g = gates[gate]
    gates[gate] = Gate(g.id, tt, g.pins, g.name)
    return Netlist(n.n_inputs, tuple(gates), n.outputs, n.input_names, n.output_names)


def test_structural_equal_pin_swap(c17):
    assert structural_equal(c17, swap_pins(c17, 2))


def test_structural_equal_detects_nand_to_nor(c17):
    assert not structural_equal(c17, replace_function(c17, 3, NAMED_FUNCTIONS["NOR"]))


def fold_inversion(n: Netlist, gate: int) -> Netlist:
    """Invert ``gate``'s table and compensate in every reader; same I/O function."""
    ref = NodeRef.gate(gate)
    gates = list(n.gates)
    g = gates[gate]
    gates[gate] = Gate(g.id, TruthTable(g.arity, tuple(1 - b for b in g.function.bits)), g.pins, g.name)
    for k, h in enumerate(n.gates):
        if ref in h.pins:
            bits = []
            for m in range(1 << h.arity):
                pins = [((m >> i) & 1) ^ (h.pins[i] == ref) for i in range(h.arity)]
                bits.append(h.function(*pins))
            gates[k] = Gate(h.id, TruthTable(h.arity, tuple(bits)), h.pins, h.name)
    return Netlist(n.n_inputs, tuple(gates), n.outputs, n.input_names, n.output_names)


def test_structural_equal_rejects_functionally_equivalent_sbox(sbox):
    internal = next(g.id for g in sbox.gates if NodeRef.gate(g.id) not in sbox.outputs)
    other = fold_inversion(sbox, internal)
    for v in all_vectors(4):
        assert simulate(other, v).outputs == simulate(sbox, v).outputs
    assert not structural_equal(sbox, other)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_structural_equal_is_equivalence(seed):
    rng = random.Random(seed)
    base = random_netlist(rng, 2, 3, 1, functions=list(NAMED_FUNCTIONS[f] for f in ("AND", "XOR")))
    variants = [base, swap_pins(base, rng.randrange(3)), replace_function(base, 0, NAMED_FUNCTIONS["OR"])]
    for a in variants:
        assert structural_equal(a, a)
        for b in variants:
            assert structural_equal(a, b) == structural_equal(b, a)
            for c in variants:
                if structural_equal(a, b) and structural_equal(b, c):
                    assert structural_equal(a, c)
