import json

import numpy as np
import pytest

from conftest import bell_circuit, random_compiled_circuit
from ghzforge import hwgraph
from ghzforge.circuit import Circuit, Gate, build_spacetime_tree, emit_circuit
from ghzforge.compiler import (
    CompileConfig,
    CompileError,
    ParityCheck,
    allocate_checks,
    back_propagate_z_support,
    back_propagator,
    build_prep_circuit,
    compute_exact_regions,
    coverage,
    detecting_region,
    grow_tree,
    insert_uncompute,
    randomized_compile,
    schedule_checks,
)
from ghzforge.hwgraph import EdgeSpec, HardwareGraph, QubitSpec
from ghzforge.statevector import check_flip, simulate_circuit


def star_graph(center: int, leaves) -> HardwareGraph:
    qubits = sorted({center, *leaves})
    return HardwareGraph(
        [QubitSpec(id=q) for q in qubits], [EdgeSpec(center, q) for q in leaves]
    )


class TestGrowTree:
    def test_p3_from_center(self):
        g = hwgraph.path_graph(3)
        tree = grow_tree(g, 1, 3)
        assert tree.parent == {0: 1, 2: 1}
        assert tree.support == (1, 0, 2)

    def test_grid_detours_around_block(self):
        g = hwgraph.grid_graph(2, 3)
        tree = grow_tree(g, 0, 4, blocked={1})
        assert set(tree.support) == {0, 3, 4, 5}
        assert tree.parent == {3: 0, 4: 3, 5: 4}

    def test_all_neighbors_blocked(self):
        g = hwgraph.path_graph(3)
        with pytest.raises(CompileError, match="reachable"):
            grow_tree(g, 1, 2, blocked={0, 2})

    def test_expansion_prefers_low_error_edges(self):
        g = HardwareGraph(
            [QubitSpec(id=i) for i in range(3)],
            [EdgeSpec(0, 1, gate_error=0.01), EdgeSpec(0, 2, gate_error=0.001)],
        )
        tree = grow_tree(g, 0, 2)
        assert tree.support == (0, 2)


class TestDetectingRegions:
    def test_chain_end_to_end(self):
        # 0 -> 1 -> 2 prep; leaves at the last prep layer.
        g = hwgraph.path_graph(3)
        c = build_prep_circuit(grow_tree(g, 0, 3))
        tree = build_spacetime_tree(c)
        region = detecting_region(tree, 0, 2)
        # Full chain below the junction; (1, 2) is NOT here: an X on the
        # middle qubit after the last CNOT leaves Z_0 Z_2 even.
        assert region.locations == {(0, 1), (0, 2), (1, 1), (2, 2)}

    def test_parent_child_region_is_two_sided(self):
        # An X on the parent after the entangling CNOT flips Z_i Z_j, so the
        # exact region covers the parent's post-branch wire too.
        g = hwgraph.path_graph(2)
        c = build_prep_circuit(grow_tree(g, 0, 2))
        tree = build_spacetime_tree(c)
        region = detecting_region(tree, 0, 1)
        assert region.locations == {(0, 1), (1, 1)}

    def test_same_qubit_rejected(self):
        g = hwgraph.path_graph(3)
        c = build_prep_circuit(grow_tree(g, 0, 3))
        tree = build_spacetime_tree(c)
        with pytest.raises(CompileError):
            detecting_region(tree, 1, 1)

    def test_back_propagator_bell(self):
        c = bell_circuit(check_ancilla=True)
        chk = ParityCheck(ancilla=2, i=0, j=1, leg_layers=(2, 3))
        bp = back_propagator(c, chk)
        z_locs = {loc for loc, v in bp.items() if v == "Z"}
        assert z_locs == {(0, 1), (1, 1), (1, 2), (2, 2), (2, 3)}
        assert bp[(0, 0)] == "I"
        assert bp[(0, 2)] == "I"  # post-check fault is invisible to the check

    def test_ground_span_location_is_silent(self):
        c = Circuit(
            [
                [Gate.h(0)],
                [Gate.cx(0, 1)],
                [Gate.cx(1, 0, "ucx")],
                [],
                [Gate.cx(1, 0, "rcx")],
                [Gate.kcx(0, 2)],
                [Gate.kcx(1, 2)],
            ],
            data_qubits=[0, 1],
            ancillas=[2],
            ground_spans={0: [(2, 4)]},
        )
        chk = ParityCheck(ancilla=2, i=0, j=1, leg_layers=(5, 6))
        bp = back_propagator(c, chk)
        assert (0, 2) not in bp and (0, 3) not in bp  # not eligible at all
        support = back_propagate_z_support(c, [2])
        assert (0, 2) not in support and (0, 3) not in support

    def test_lca_paths_agree_with_back_propagation(self):
        # On circuits without uncomputation the path-union region equals the
        # exact back-propagated one (restricted to data locations).
        hits = 0
        for seed in range(50):
            _, _, c, checks = random_compiled_circuit(seed)
            tree = build_spacetime_tree(c)
            data = set(c.data_qubits)
            for chk in checks:
                t_i, t_j = chk.leg_layers
                lca_region = detecting_region(
                    tree, chk.i, chk.j, leaf_i=(chk.i, t_i - 1), leaf_j=(chk.j, t_j - 1)
                )
                exact_data = {loc for loc in chk.region.locations if loc[0] in data}
                assert lca_region.locations == exact_data
                anc_tail = chk.region.locations - exact_data
                assert anc_tail == {
                    (chk.ancilla, t) for t in range(t_i, c.n_wire_layers)
                }
                hits += 1
        assert hits >= 15  # enough instances actually had checks

    def test_fault_injection_matches_regions_exactly(self):
        # Every single-Pauli fault at every eligible location: X/Y flip the
        # check iff the location is in its region; Z never flips anything.
        for seed in (0, 1, 2):
            _, _, c, checks = random_compiled_circuit(seed, max_checks=2)
            if c.n_qubits > 12 or not checks:
                continue
            for q, t in c.eligible_locations():
                for pauli in ("X", "Y", "Z"):
                    for chk in checks:
                        flips = check_flip(c, chk.ancilla, (t, q, pauli))
                        expected = pauli != "Z" and (q, t) in chk.region
                        assert flips == expected, (seed, q, t, pauli, chk)


class TestAllocateChecks:
    def two_branch_instance(self):
        # root 0 with two length-2 branches; ancilla 5 adjacent to both leaves.
        g = HardwareGraph(
            [QubitSpec(id=i) for i in range(6)],
            [
                EdgeSpec(0, 1),
                EdgeSpec(1, 2),
                EdgeSpec(0, 3),
                EdgeSpec(3, 4),
                EdgeSpec(2, 5),
                EdgeSpec(4, 5),
            ],
        )
        tree = grow_tree(g, 0, 5)
        c = build_prep_circuit(tree)
        return g, tree, c

    def test_two_branches_converging(self):
        g, tree, c = self.two_branch_instance()
        checks = allocate_checks(g, tree, c)
        assert len(checks) == 1
        chk = checks[0]
        assert (chk.ancilla, chk.i, chk.j) == (5, 2, 4)
        # Region = both branches: 4 branch edges + wire edges.
        c2 = schedule_checks(c, checks)
        compute_exact_regions(c2, checks)
        data_region = {loc for loc in checks[0].region.locations if loc[0] != 5}
        st = build_spacetime_tree(c2)
        t_i, t_j = chk.leg_layers
        lca = detecting_region(st, 2, 4, (2, t_i - 1), (4, t_j - 1))
        assert data_region == lca.locations
        assert chk.score == len(
            {loc for loc in lca.locations if loc[1] < c.n_wire_layers}
        )

    def test_parent_child_pair_rejected(self):
        # Ancilla adjacent only to a parent-child pair gets no check.
        g = HardwareGraph(
            [QubitSpec(id=i) for i in range(4)],
            [EdgeSpec(0, 1), EdgeSpec(1, 2), EdgeSpec(1, 3), EdgeSpec(2, 3)],
        )
        tree = grow_tree(g, 0, 3)  # support {0,1,2}; 3 free, adjacent to 1,2
        assert tree.parent[2] == 1
        c = build_prep_circuit(tree)
        checks = allocate_checks(g, tree, c)
        assert checks == []

    def test_each_data_qubit_used_once(self):
        for seed in range(20):
            _, _, _, checks = random_compiled_circuit(seed)
            used = [q for chk in checks for q in (chk.i, chk.j)]
            assert len(used) == len(set(used))
            ancs = [chk.ancilla for chk in checks]
            assert len(ancs) == len(set(ancs))


class TestCoverage:
    def test_no_checks_zero(self):
        g = hwgraph.path_graph(3)
        c = build_prep_circuit(grow_tree(g, 0, 3))
        rep = coverage(c, [])
        assert rep.fraction == 0.0 and rep.covered == 0 and rep.total > 0

    def test_chain_fraction_by_enumeration(self):
        g = hwgraph.path_graph(3)
        tree = grow_tree(g, 0, 3)
        c = build_prep_circuit(tree)
        chk = ParityCheck(ancilla=None, i=0, j=2)
        # attach a synthetic ancilla adjacent to 0 and 2 via direct circuit edit
        c2 = Circuit(
            list(c.layers) + [[Gate.kcx(0, 3)], [Gate.kcx(2, 3)]],
            data_qubits=c.data_qubits,
            ancillas=[3],
        )
        chk = ParityCheck(ancilla=3, i=0, j=2, leg_layers=(3, 4))
        compute_exact_regions(c2, [chk])
        rep = coverage(c2, [chk])
        eligible = set(c2.eligible_locations())
        brute = {
            loc
            for loc in eligible
            if loc in chk.region
        }
        assert rep.covered == len(brute)
        assert rep.total == len(eligible)
        assert rep.fraction == len(brute) / len(eligible)

    def test_disjoint_regions_add(self):
        _, _, c, checks = random_compiled_circuit(4)
        if len(checks) >= 2:
            r0, r1 = checks[0].region, checks[1].region
            if not (r0.locations & r1.locations):
                rep = coverage(c, checks[:2])
                assert rep.covered == len(r0) + len(r1)

    def test_monotonicity(self):
        for seed in range(12):
            _, _, c, checks = random_compiled_circuit(seed)
            covered = [coverage(c, checks[:k]).covered for k in range(len(checks) + 1)]
            assert all(b >= a for a, b in zip(covered, covered[1:]))


class TestInsertUncompute:
    def test_threshold_not_met(self):
        g = hwgraph.path_graph(2)
        tree = grow_tree(g, 0, 2)
        c = build_prep_circuit(tree)
        assert insert_uncompute(c, tree, 1000) is c

    def test_root_uncomputed_on_deep_tree(self):
        g = hwgraph.path_graph(8)
        tree = grow_tree(g, 0, 8)
        c = build_prep_circuit(tree)
        out = insert_uncompute(c, tree, 3)
        assert 0 in out.ground_spans
        (a, b) = out.ground_spans[0][0]
        assert b - a >= 3
        kinds = [g2.kind for layer in out.layers for g2 in layer]
        assert "ucx" in kinds and "rcx" in kinds

    def test_noiseless_state_unchanged(self):
        for seed in range(10):
            g, tree, c, checks = random_compiled_circuit(seed)
            if c.n_qubits > 12:
                continue
            out = insert_uncompute(c, tree, 2)
            if out is c:
                continue
            before = simulate_circuit(c)
            after = simulate_circuit(out)
            assert abs(abs(after.overlap(before)) - 1.0) < 1e-9, seed

    def test_multi_uncompute_state_unchanged(self):
        # Aggressive threshold on a long chain forces several uncomputes and
        # exercises the partner-crossing constraint.
        g = hwgraph.path_graph(8)
        tree = grow_tree(g, 0, 8)
        c = build_prep_circuit(tree)
        out = insert_uncompute(c, tree, 1)
        assert len(out.ground_spans) >= 2
        before = simulate_circuit(c)
        after = simulate_circuit(out)
        assert abs(abs(after.overlap(before)) - 1.0) < 1e-9

    def test_eligible_count_shrinks_by_span(self):
        g = hwgraph.path_graph(8)
        tree = grow_tree(g, 0, 8)
        c = build_prep_circuit(tree)
        out = insert_uncompute(c, tree, 3)
        span = sum(b - a for spans in out.ground_spans.values() for a, b in spans)
        assert span > 0
        assert len(out.eligible_locations()) == len(c.eligible_locations()) - span
        assert out.depth == c.depth  # packs into existing layers

    def test_region_unchanged_at_and_after_recompute(self):
        for seed in range(10):
            g, tree, c, checks = random_compiled_circuit(seed)
            if not checks:
                continue
            out = insert_uncompute(c, tree, 2)
            if out is c:
                continue
            recompute = max(b for spans in out.ground_spans.values() for _, b in spans)
            for chk in checks:
                before = {l for l in chk.region.locations if l[1] >= recompute}
                after_region = back_propagate_z_support(out, [chk.ancilla])
                after = {l for l in after_region if l[1] >= recompute}
                assert before == after

    def test_explicit_qubit_without_partner_raises(self):
        g = hwgraph.path_graph(3)
        tree = grow_tree(g, 0, 3)
        c = build_prep_circuit(tree)
        with pytest.raises(CompileError, match="partner"):
            insert_uncompute(c, tree, 1, qubits=[1])  # no layer room


class TestRandomizedCompile:
    def test_degenerate_search_equals_plain_bfs(self):
        g = hwgraph.grid_graph(3, 3, seed=3)
        cfg = CompileConfig(n_data=6, trials=1, block_probability=0.0, seed=9)
        res = randomized_compile(g, cfg)
        root = hwgraph.select_root(g)
        tree = grow_tree(g, root, 6)
        prep = build_prep_circuit(tree)
        checks = allocate_checks(g, tree, prep)
        c = schedule_checks(prep, checks)
        c = insert_uncompute(c, tree, res_threshold(res, prep))
        assert emit_circuit(res.circuit) == emit_circuit(c)

    def test_same_seed_identical_bytes(self):
        g = hwgraph.heavy_hex_graph(4, 8, seed=5)
        cfg = CompileConfig(n_data=20, trials=25, seed=123)
        a = randomized_compile(g, cfg)
        b = randomized_compile(g, cfg)
        assert emit_circuit(a.circuit) == emit_circuit(b.circuit)
        assert a.best_trial == b.best_trial

    def test_threads_do_not_change_result(self):
        g = hwgraph.heavy_hex_graph(4, 8, seed=5)
        cfg = CompileConfig(n_data=20, trials=25, seed=123)
        a = randomized_compile(g, cfg, threads=1)
        b = randomized_compile(g, cfg, threads=4)
        assert emit_circuit(a.circuit) == emit_circuit(b.circuit)
        assert [r.coverage for r in a.trial_log] == [r.coverage for r in b.trial_log]

    def test_search_beats_or_matches_baseline(self, heavy_hex_156):
        cfg = CompileConfig(n_data=120, trials=40, seed=17)
        res = randomized_compile(heavy_hex_156, cfg)
        baseline = next(r for r in res.trial_log if r.trial == 0)
        best = max(r.coverage for r in res.trial_log if r.accepted)
        assert best >= baseline.coverage
        assert res.trial_log[res.best_trial].coverage == best

    def test_too_few_qubits(self):
        g = hwgraph.path_graph(3)
        with pytest.raises(CompileError, match="need n_data"):
            randomized_compile(g, CompileConfig(n_data=3, trials=1))


def res_threshold(res, prep) -> int:
    from ghzforge.circuit import depth_stats
    from ghzforge.compiler import _auto_uncompute_threshold

    return _auto_uncompute_threshold(depth_stats(prep)["prep_cnot_depth"])
