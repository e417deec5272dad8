import json

import pytest

from conftest import bell_circuit, chain_circuit, random_compiled_circuit
from ghzforge.circuit import (
    Circuit,
    CircuitError,
    Gate,
    build_spacetime_tree,
    depth_stats,
    emit_circuit,
    parse_circuit_json,
)
from ghzforge.compiler import build_prep_circuit, grow_tree
from ghzforge import hwgraph


class TestCircuitValidation:
    def test_activation_derived(self):
        c = bell_circuit()
        assert c.activation == {0: 0, 1: 1}
        assert c.n_wire_layers == 2

    def test_qubit_twice_in_layer(self):
        with pytest.raises(CircuitError, match="twice"):
            Circuit([[Gate.h(0), Gate.cx(0, 1)]], data_qubits=[0, 1])

    def test_control_equals_target(self):
        with pytest.raises(CircuitError):
            Gate.cx(3, 3)

    def test_unreached_data_qubit(self):
        with pytest.raises(CircuitError, match="never excited"):
            Circuit([[Gate.h(0)]], data_qubits=[0, 1])

    def test_terminal_layers_end_wires(self):
        c = Circuit(
            [[Gate.h(0)], [Gate.cx(0, 1)], [Gate.rot(0, 0.3), Gate.rot(1, 0.3)]],
            data_qubits=[0, 1],
        )
        assert c.n_wire_layers == 2
        with pytest.raises(CircuitError, match="after terminal"):
            Circuit(
                [[Gate.h(0)], [Gate.rot(0, 0.1)], [Gate.cx(0, 1)]], data_qubits=[0, 1]
            )

    def test_ground_span_validation(self):
        with pytest.raises(CircuitError, match="ground span"):
            Circuit([[Gate.h(0)]], data_qubits=[0], ground_spans={0: [(3, 2)]})


class TestSpacetimeTree:
    def test_bell_tree(self):
        tree = build_spacetime_tree(bell_circuit())
        assert tree.nodes == {(0, 0), (0, 1), (1, 1)}
        assert tree.root == (0, 0)
        # Branch edge from the control's input location: faults on either
        # operand after the CNOT hang below (0, 0), not below (0, 1).
        assert tree.parent[(1, 1)] == (0, 0)
        assert tree.parent[(0, 1)] == (0, 0)

    def test_star_two_branch_edges(self):
        c = Circuit(
            [[Gate.h(1)], [Gate.cx(1, 0)], [Gate.cx(1, 2)]], data_qubits=[0, 1, 2]
        )
        tree = build_spacetime_tree(c)
        assert tree.parent[(0, 1)] == (1, 0)
        assert tree.parent[(2, 2)] == (1, 1)

    def test_node_set_matches_excitation_enumeration(self):
        for seed in range(8):
            _, _, c, _ = random_compiled_circuit(seed)
            tree = build_spacetime_tree(c)
            # Independent enumeration: walk layers forward tracking which
            # data qubits are excited after each layer.
            excited = set()
            expected = set()
            for t, layer in enumerate(c.layers):
                for g in layer:
                    if g.kind == "h":
                        excited.add(g.qubits[0])
                    elif g.kind in ("cx", "rcx") and g.target in c.data_qubits:
                        excited.add(g.target)
                    elif g.kind == "ucx":
                        excited.discard(g.target)
                expected |= {(q, t) for q in excited}
            assert tree.nodes == expected

    def test_tree_is_a_tree(self):
        for seed in range(8):
            _, _, c, _ = random_compiled_circuit(seed)
            tree = build_spacetime_tree(c)
            assert tree.n_edges() == len(tree.nodes) - 1
            for node in tree.nodes:  # connected: every node reaches the root
                assert tree.path_to_root(node)[-1] == tree.root

    def test_uncompute_hole_excluded(self):
        c = Circuit(
            [
                [Gate.h(0)],
                [Gate.cx(0, 1)],
                [Gate.cx(1, 0, "ucx")],
                [],
                [Gate.cx(1, 0, "rcx")],
            ],
            data_qubits=[0, 1],
            ground_spans={0: [(2, 4)]},
        )
        tree = build_spacetime_tree(c)
        assert (0, 2) not in tree.nodes and (0, 3) not in tree.nodes
        assert (0, 4) in tree.nodes
        # The recompute CNOT re-attaches the qubit below its partner's wire.
        assert tree.parent[(0, 4)] == (1, 3)


class TestEmission:
    def test_qasm_like_text(self):
        text = emit_circuit(bell_circuit(), "qasm-like-text")
        assert "h q0" in text and "cx q0 q1" in text

    def test_json_round_trip_identical_bytes(self):
        _, _, c, _ = random_compiled_circuit(3)
        blob = emit_circuit(c, "canonical-json")
        again = emit_circuit(parse_circuit_json(blob), "canonical-json")
        assert blob == again

    def test_round_trip_preserves_structure(self):
        c = Circuit(
            [
                [Gate.h(0)],
                [Gate.cx(0, 1)],
                [Gate.cx(1, 0, "ucx")],
                [Gate.cx(1, 0, "rcx")],
                [Gate.kcx(1, 2)],
            ],
            data_qubits=[0, 1],
            ancillas=[2],
            ground_spans={0: [(2, 3)]},
        )
        c2 = parse_circuit_json(emit_circuit(c, "canonical-json"))
        assert c2.layers == c.layers
        assert c2.ground_spans == c.ground_spans
        assert c2.activation == c.activation

    def test_line_count_equals_gates_plus_depth(self):
        g = hwgraph.heavy_hex_graph(8, 16, seed=7)
        tree = grow_tree(g, hwgraph.select_root(g), 120)
        c = build_prep_circuit(tree)
        text = emit_circuit(c, "qasm-like-text")
        lines = text.strip("\n").split("\n")
        assert len(lines) == c.gate_count() + c.depth

    def test_declared_activation_checked(self):
        data = json.loads(emit_circuit(bell_circuit(), "canonical-json"))
        data["activation"]["1"] = 0
        with pytest.raises(CircuitError, match="activation"):
            Circuit.from_dict(data)


class TestDepthStats:
    def test_bell(self):
        stats = depth_stats(bell_circuit())
        assert stats == {"total_depth": 2, "cnot_depth": 1, "prep_cnot_depth": 1}

    def test_p5_from_center_serializes_fanout(self):
        # The root cannot control two CNOTs in one layer, so the center-of-P5
        # prep costs eccentricity + 1 layers of CNOTs, not eccentricity.
        g = hwgraph.path_graph(5)
        tree = grow_tree(g, 2, 5)
        stats = depth_stats(build_prep_circuit(tree))
        assert hwgraph.eccentricity(g, 2) == 2
        assert stats["prep_cnot_depth"] == 3

    def test_path_from_end_matches_eccentricity(self):
        g = hwgraph.path_graph(6)
        tree = grow_tree(g, 0, 6)
        stats = depth_stats(build_prep_circuit(tree))
        assert stats["prep_cnot_depth"] == hwgraph.eccentricity(g, 0) == 5

    def test_depth_lower_bound_property(self):
        for seed in range(6):
            g, tree, c, _ = random_compiled_circuit(seed)
            stats = depth_stats(c)
            dists = hwgraph.bfs_distances(g, tree.root)
            reach = max(dists[q] for q in tree.support)
            assert stats["prep_cnot_depth"] >= reach
