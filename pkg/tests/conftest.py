import math

import pytest

from ghzforge.circuit import Circuit, Gate
from ghzforge.compiler import (
    allocate_checks,
    build_prep_circuit,
    compute_exact_regions,
    grow_tree,
    insert_uncompute,
    schedule_checks,
)
from ghzforge.hwgraph import HardwareGraph, QubitSpec, EdgeSpec
from ghzforge import hwgraph, rng


def bell_circuit(check_ancilla: bool = False) -> Circuit:
    """H(0); CX(0,1); optionally a (0,1) parity check on ancilla 2."""
    layers = [[Gate.h(0)], [Gate.cx(0, 1)]]
    ancillas = []
    if check_ancilla:
        layers += [[Gate.kcx(0, 2)], [Gate.kcx(1, 2)]]
        ancillas = [2]
    return Circuit(layers, data_qubits=[0, 1], ancillas=ancillas)


def chain_circuit(n: int, check: tuple[int, int] | None = None, idle_tail: int = 0):
    """Linear GHZ chain 0 -> 1 -> ... -> n-1 with an optional end check."""
    layers = [[Gate.h(0)]]
    for q in range(1, n):
        layers.append([Gate.cx(q - 1, q)])
    for _ in range(idle_tail):
        layers.append([])
    ancillas = []
    if check is not None:
        i, j = check
        anc = n
        layers.append([Gate.kcx(i, anc)])
        layers.append([Gate.kcx(j, anc)])
        ancillas = [anc]
    return Circuit(layers, data_qubits=range(n), ancillas=ancillas)


def random_compiled_circuit(seed: int, n_data: int | None = None, max_checks: int | None = None):
    """A randomly compiled small instance (graph, tree, circuit, checks)."""
    r = rng.CounterRNG(seed)
    shapes = ["grid", "path", "hex"]
    shape = shapes[r.next_below(len(shapes))]
    if shape == "grid":
        g = hwgraph.grid_graph(3, 4, seed=seed)
    elif shape == "path":
        g = hwgraph.path_graph(10, seed=seed)
    else:
        g = hwgraph.heavy_hex_graph(2, 5, seed=seed)
    n = n_data or (6 + r.next_below(4))
    n = min(n, g.n_qubits - 1)
    blocked = frozenset(
        q for q in g.qubit_ids() if r.next_unit() < 0.12 and q != hwgraph.select_root(g)
    )
    try:
        tree = grow_tree(g, hwgraph.select_root(g), n, blocked)
    except Exception:
        tree = grow_tree(g, hwgraph.select_root(g), n)
    c = build_prep_circuit(tree)
    checks = allocate_checks(g, tree, c)
    if max_checks is not None:
        checks = checks[:max_checks]
    c = schedule_checks(c, checks)
    compute_exact_regions(c, checks)
    return g, tree, c, checks


@pytest.fixture(scope="session")
def heavy_hex_156():
    return hwgraph.heavy_hex_graph(8, 16, seed=7)
