import json

import networkx as nx
import pytest

from ghzforge import hwgraph
from ghzforge.hwgraph import (
    DropoutPolicy,
    EdgeSpec,
    GraphFormatError,
    HardwareGraph,
    QubitSpec,
    apply_dropouts,
    bfs_distances,
    eccentricity,
    heavy_hex_counts,
    heavy_hex_graph,
    parse_hardware_graph,
    select_root,
    serialize_hardware_graph,
)


def to_networkx(g: HardwareGraph) -> nx.Graph:
    nxg = nx.Graph()
    nxg.add_nodes_from(g.qubit_ids())
    nxg.add_edges_from(g.edges)
    return nxg


def line_graph_text(errors=(0.0, 0.0)) -> str:
    return json.dumps(
        {
            "qubits": [{"id": 0}, {"id": 1}, {"id": 2}],
            "edges": [
                {"a": 0, "b": 1, "gate_error": errors[0]},
                {"a": 1, "b": 2, "gate_error": errors[1]},
            ],
        }
    )


class TestParsing:
    def test_three_qubit_line(self):
        g = parse_hardware_graph(line_graph_text())
        assert g.adjacency == {0: (1,), 1: (0, 2), 2: (1,)}

    def test_self_loop_rejected(self):
        text = json.dumps({"qubits": [{"id": 0}], "edges": [{"a": 0, "b": 0}]})
        with pytest.raises(GraphFormatError, match="self-loop"):
            parse_hardware_graph(text)

    def test_duplicate_edge_rejected(self):
        text = json.dumps(
            {
                "qubits": [{"id": 0}, {"id": 1}],
                "edges": [{"a": 0, "b": 1}, {"a": 1, "b": 0}],
            }
        )
        with pytest.raises(GraphFormatError, match="duplicate edge"):
            parse_hardware_graph(text)

    def test_dangling_qubit_id_rejected(self):
        text = json.dumps({"qubits": [{"id": 0}], "edges": [{"a": 0, "b": 3}]})
        with pytest.raises(GraphFormatError, match="unknown qubit"):
            parse_hardware_graph(text)

    def test_probability_out_of_range(self):
        text = json.dumps(
            {"qubits": [{"id": 0, "readout_error": 1.2}], "edges": []}
        )
        with pytest.raises(GraphFormatError, match="readout_error"):
            parse_hardware_graph(text)

    def test_noncontiguous_ids_rejected(self):
        text = json.dumps({"qubits": [{"id": 0}, {"id": 2}], "edges": []})
        with pytest.raises(GraphFormatError, match="contiguous"):
            parse_hardware_graph(text)

    def test_heavy_hex_counts(self):
        g = heavy_hex_graph(8, 16, seed=1)
        # Independent closed-form count: rows of 16 contribute 8*16 qubits
        # and 8*15 edges; 7 gaps x 4 rungs add 28 qubits and 56 edges.
        assert (g.n_qubits, len(g.edges)) == (8 * 16 + 28, 8 * 15 + 56) == (156, 176)
        assert (g.n_qubits, len(g.edges)) == heavy_hex_counts(8, 16)
        assert max(len(g.neighbors(q)) for q in g.qubit_ids()) == 3

    def test_round_trip(self):
        g = heavy_hex_graph(3, 7, seed=5)
        text = serialize_hardware_graph(g)
        g2 = parse_hardware_graph(text)
        assert serialize_hardware_graph(g2) == text
        assert g2.adjacency == g.adjacency
        for key, e in g.edges.items():
            assert g2.edges[key].gate_error == e.gate_error


class TestDropouts:
    def test_noop_thresholds(self):
        g = parse_hardware_graph(line_graph_text((0.2, 0.3)))
        out = apply_dropouts(g, DropoutPolicy(1.0, 1.0))
        assert out.adjacency == g.adjacency
        assert out.qubit_ids() == g.qubit_ids()

    def test_gate_threshold(self):
        g = parse_hardware_graph(line_graph_text((0.001, 0.5)))
        out = apply_dropouts(g, DropoutPolicy(max_gate_error=0.01))
        assert (0, 1) in out.edges and (1, 2) not in out.edges

    def test_matches_brute_force_filter(self):
        g = hwgraph.grid_graph(2, 5, seed=17)
        policy = DropoutPolicy(max_gate_error=3e-3, max_readout_error=1.5e-2)
        out = apply_dropouts(g, policy)
        keep_q = {
            q for q, s in g.qubits.items() if s.readout_error <= policy.max_readout_error
        }
        keep_e = {
            k
            for k, e in g.edges.items()
            if e.gate_error <= policy.max_gate_error and e.a in keep_q and e.b in keep_q
        }
        assert set(out.qubit_ids()) == keep_q
        assert set(out.edges) == keep_e
        assert keep_q != set(g.qubit_ids()) or keep_e != set(g.edges)  # policy bites

    def test_idempotent(self):
        g = heavy_hex_graph(4, 8, seed=2)
        policy = DropoutPolicy(max_gate_error=4e-3, max_readout_error=2e-2)
        once = apply_dropouts(g, policy)
        twice = apply_dropouts(once, policy)
        assert serialize_hardware_graph(once) == serialize_hardware_graph(twice)

    def test_original_untouched(self):
        g = parse_hardware_graph(line_graph_text((0.5, 0.5)))
        apply_dropouts(g, DropoutPolicy(max_gate_error=0.01))
        assert len(g.edges) == 2


class TestGraphQueries:
    def test_path_eccentricities(self):
        g = hwgraph.path_graph(5)
        assert eccentricity(g, 2) == 2
        assert eccentricity(g, 0) == 4

    def test_star_center(self):
        g = HardwareGraph(
            [QubitSpec(id=i) for i in range(6)],
            [EdgeSpec(0, i) for i in range(1, 6)],
        )
        assert eccentricity(g, 0) == 1
        assert select_root(g) == 0

    def test_heavy_hex_eccentricity_matches_networkx(self):
        g = heavy_hex_graph(8, 16)
        nxg = to_networkx(g)
        oracle = nx.eccentricity(nxg)
        for u in g.qubit_ids():
            assert eccentricity(g, u) == oracle[u]

    def test_select_root_matches_oracle_with_tiebreak(self):
        g = heavy_hex_graph(8, 16)
        oracle = nx.eccentricity(to_networkx(g))
        best = min(oracle.values())
        expected = min(q for q, e in oracle.items() if e == best)
        assert select_root(g) == expected

    def test_root_minimality_property(self):
        for seed in range(3):
            g = hwgraph.grid_graph(3, 4, seed=seed)
            root_ecc = eccentricity(g, select_root(g))
            assert all(root_ecc <= eccentricity(g, u) for u in g.qubit_ids())

    def test_select_root_path_tiebreaks(self):
        assert select_root(hwgraph.path_graph(5)) == 2
        assert select_root(hwgraph.path_graph(4)) == 1  # ids 1 and 2 tie

    def test_disconnected_eccentricity_raises(self):
        g = HardwareGraph([QubitSpec(id=0), QubitSpec(id=1)], [])
        with pytest.raises(ValueError, match="disconnected"):
            eccentricity(g, 0)

    def test_bfs_blocked(self):
        g = hwgraph.grid_graph(2, 3)
        dist = bfs_distances(g, 0, blocked={1})
        assert dist == {0: 0, 3: 1, 4: 2, 5: 3, 2: 4}
