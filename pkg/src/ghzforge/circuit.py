"""Layered circuit IR with explicit spacetime locations.

A circuit is a list of gate layers.  Spacetime location ``(q, t)`` means
"qubit q in the interval immediately after layer t", so a fault at
``(q, t)`` is a Pauli applied after layer t's gates.  Location ``t`` runs
over the unitary layers only; terminal measurement (and any pre-measurement
basis rotations) sit after the last location.

Error-eligible locations ("W_err"): a data qubit is eligible from its
activation layer onward, minus any ground spans created by temporary
uncomputation; a check ancilla is eligible from its first check CNOT
onward.  Qubits in the ground state host no faults in this model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

GATE_H = "h"          # Hadamard on |0> (root preparation)
GATE_CX = "cx"        # entangling CNOT of the preparation tree
GATE_UCX = "ucx"      # uncompute CNOT (target returns to |0>)
GATE_RCX = "rcx"      # recompute CNOT (target re-entangled)
GATE_KCX = "kcx"      # check CNOT (data -> ancilla)
GATE_MZ = "mz"        # terminal Z-basis measurement
GATE_ROT = "rot"      # terminal basis rotation Rz(-phi) then Ry(-pi/2)

CNOT_KINDS = frozenset({GATE_CX, GATE_UCX, GATE_RCX, GATE_KCX})
TERMINAL_KINDS = frozenset({GATE_MZ, GATE_ROT})


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    phi: float = 0.0

    @staticmethod
    def h(q: int) -> "Gate":
        return Gate(GATE_H, (q,))

    @staticmethod
    def cx(control: int, target: int, kind: str = GATE_CX) -> "Gate":
        if control == target:
            raise CircuitError("control equals target")
        return Gate(kind, (control, target))

    @staticmethod
    def kcx(data: int, ancilla: int) -> "Gate":
        return Gate.cx(data, ancilla, GATE_KCX)

    @staticmethod
    def mz(q: int) -> "Gate":
        return Gate(GATE_MZ, (q,))

    @staticmethod
    def rot(q: int, phi: float) -> "Gate":
        return Gate(GATE_ROT, (q,), phi=float(phi))

    @property
    def control(self) -> int:
        return self.qubits[0]

    @property
    def target(self) -> int:
        return self.qubits[1]

    def to_wire(self) -> list:
        if self.kind == GATE_ROT:
            return [self.kind, self.qubits[0], self.phi]
        return [self.kind, *self.qubits]

    @staticmethod
    def from_wire(item: list) -> "Gate":
        kind = item[0]
        if kind == GATE_ROT:
            return Gate(kind, (int(item[1]),), phi=float(item[2]))
        if kind in (GATE_H, GATE_MZ):
            return Gate(kind, (int(item[1]),))
        if kind in CNOT_KINDS:
            return Gate.cx(int(item[1]), int(item[2]), kind)
        raise CircuitError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class SpacetimeLocation:
    qubit: int
    layer: int


class Circuit:
    """Immutable layered circuit over hardware qubit ids.

    ``activation[q]`` is the first layer after which q is excited:
    layer of the root Hadamard, of the entangling CNOT targeting a data
    qubit, or of the first check CNOT writing to an ancilla.
    ``ground_spans[q]`` lists half-open location intervals ``[a, b)``
    during which q is back in |0> between an uncompute and its recompute.
    """

    def __init__(
        self,
        layers: Iterable[Iterable[Gate]],
        data_qubits: Iterable[int],
        ancillas: Iterable[int] = (),
        ground_spans: dict[int, list[tuple[int, int]]] | None = None,
    ):
        self.layers: tuple[tuple[Gate, ...], ...] = tuple(tuple(l) for l in layers)
        self.data_qubits: tuple[int, ...] = tuple(sorted(data_qubits))
        self.ancillas: tuple[int, ...] = tuple(sorted(ancillas))
        if set(self.data_qubits) & set(self.ancillas):
            raise CircuitError("data and ancilla sets overlap")
        self.ground_spans: dict[int, tuple[tuple[int, int], ...]] = {
            int(q): tuple((int(a), int(b)) for a, b in spans)
            for q, spans in (ground_spans or {}).items()
        }
        self._validate_and_index()

    # -- construction-time validation and derived indexes ------------------

    def _validate_and_index(self):
        known = set(self.data_qubits) | set(self.ancillas)
        activation: dict[int, int] = {}
        seen_terminal_layer = None
        for t, layer in enumerate(self.layers):
            used: set[int] = set()
            terminal_here = False
            for g in layer:
                for q in g.qubits:
                    if q in used:
                        raise CircuitError(f"qubit {q} used twice in layer {t}")
                    if q not in known:
                        raise CircuitError(f"gate on undeclared qubit {q}")
                    used.add(q)
                if g.kind in TERMINAL_KINDS:
                    terminal_here = True
                elif seen_terminal_layer is not None:
                    raise CircuitError(
                        f"unitary gate in layer {t} after terminal layer {seen_terminal_layer}"
                    )
                if g.kind == GATE_H:
                    activation.setdefault(g.qubits[0], t)
                elif g.kind in (GATE_CX, GATE_RCX):
                    activation.setdefault(g.target, t)
                elif g.kind == GATE_KCX:
                    if g.target not in self.ancillas:
                        raise CircuitError("check CNOT must target an ancilla")
                    activation.setdefault(g.target, t)
            if terminal_here and seen_terminal_layer is None:
                seen_terminal_layer = t
        self.activation: dict[int, int] = activation
        self.n_wire_layers: int = (
            seen_terminal_layer if seen_terminal_layer is not None else len(self.layers)
        )
        for q in self.data_qubits:
            if q not in activation:
                raise CircuitError(f"data qubit {q} is never excited")
        for q, spans in self.ground_spans.items():
            prev_end = activation.get(q, 0)
            for a, b in spans:
                if not activation.get(q, 0) <= a < b:
                    raise CircuitError(f"bad ground span [{a}, {b}) on qubit {q}")
                if a < prev_end:
                    raise CircuitError(f"overlapping ground spans on qubit {q}")
                prev_end = b
        # Dense index over all circuit qubits, ascending hardware id.
        self.qubits: tuple[int, ...] = tuple(sorted(known))
        self.qubit_index: dict[int, int] = {q: i for i, q in enumerate(self.qubits)}

    # -- basic accessors ----------------------------------------------------

    @property
    def n_data(self) -> int:
        return len(self.data_qubits)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def gate_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def gates_of_kind(self, *kinds: str):
        for t, layer in enumerate(self.layers):
            for g in layer:
                if g.kind in kinds:
                    yield t, g

    def in_ground_span(self, q: int, t: int) -> bool:
        for a, b in self.ground_spans.get(q, ()):
            if a <= t < b:
                return True
        return False

    def is_eligible(self, q: int, t: int) -> bool:
        """True if location (q, t) can host a fault."""
        if not 0 <= t < self.n_wire_layers:
            return False
        l_q = self.activation.get(q)
        if l_q is None or t < l_q:
            return False
        return not self.in_ground_span(q, t)

    def eligible_locations(self, include_ancillas: bool = True) -> list[tuple[int, int]]:
        """All fault-eligible locations, ordered by (layer, qubit)."""
        qubits = self.qubits if include_ancillas else self.data_qubits
        return [
            (q, t)
            for t in range(self.n_wire_layers)
            for q in qubits
            if self.is_eligible(q, t)
        ]

    def last_layer_of(self, q: int) -> int:
        """Last layer with a gate touching q, or -1."""
        for t in range(self.depth - 1, -1, -1):
            if any(q in g.qubits for g in self.layers[t]):
                return t
        return -1

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n_data": self.n_data,
            "data_qubits": list(self.data_qubits),
            "ancillas": list(self.ancillas),
            "layers": [[g.to_wire() for g in layer] for layer in self.layers],
            "activation": {str(q): t for q, t in sorted(self.activation.items())},
            "ground_spans": {
                str(q): [list(span) for span in spans]
                for q, spans in sorted(self.ground_spans.items())
            },
        }

    @staticmethod
    def from_dict(data: dict) -> "Circuit":
        c = Circuit(
            layers=[[Gate.from_wire(item) for item in layer] for layer in data["layers"]],
            data_qubits=data["data_qubits"],
            ancillas=data.get("ancillas", ()),
            ground_spans={
                int(q): [tuple(span) for span in spans]
                for q, spans in data.get("ground_spans", {}).items()
            },
        )
        declared = {int(q): int(t) for q, t in data.get("activation", {}).items()}
        if declared and declared != c.activation:
            raise CircuitError("declared activation map disagrees with gates")
        if int(data["n_data"]) != c.n_data:
            raise CircuitError("declared n_data disagrees with data_qubits")
        return c


def emit_circuit(c: Circuit, format: str = "canonical-json") -> str:
    """Deterministic textual emission.

    ``canonical-json`` round-trips losslessly; ``qasm-like-text`` is a
    write-only listing with one gate per line and a barrier line closing
    each layer (line count = gate count + depth).
    """
    if format == "canonical-json":
        return json.dumps(c.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
    if format == "qasm-like-text":
        lines = []
        for layer in c.layers:
            for g in layer:
                if g.kind == GATE_H:
                    lines.append(f"h q{g.qubits[0]}")
                elif g.kind in CNOT_KINDS:
                    op = {GATE_CX: "cx", GATE_UCX: "cx", GATE_RCX: "cx", GATE_KCX: "cx"}[g.kind]
                    lines.append(f"{op} q{g.control} q{g.target}")
                elif g.kind == GATE_MZ:
                    lines.append(f"measure q{g.qubits[0]}")
                elif g.kind == GATE_ROT:
                    lines.append(f"rot({g.phi!r}) q{g.qubits[0]}")
            lines.append("barrier")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")


def parse_circuit_json(text: str) -> Circuit:
    return Circuit.from_dict(json.loads(text))


def depth_stats(c: Circuit) -> dict[str, int]:
    """Layer counts: total, layers with any CNOT kind, layers with plain
    entangling CNOTs (the preparation section only)."""
    cnot_layers = 0
    prep_layers = 0
    for layer in c.layers:
        kinds = {g.kind for g in layer}
        if kinds & CNOT_KINDS:
            cnot_layers += 1
        if GATE_CX in kinds:
            prep_layers += 1
    return {
        "total_depth": c.depth,
        "cnot_depth": cnot_layers,
        "prep_cnot_depth": prep_layers,
    }


# -- spacetime tree --------------------------------------------------------


@dataclass
class SpacetimeTree:
    """Rooted tree over the data qubits' eligible spacetime locations.

    Wire edges run ``(q, t-1) -> (q, t)``.  When a CNOT excites a fresh
    (or recomputed) target q at layer t, the branch edge runs from the
    control's input location ``(p, t-1)`` to ``(q, t)``: faults on the
    control before the gate and on either operand after it are downstream
    of that point, faults that predate the target's excitation are not.
    """

    root: tuple[int, int]
    parent: dict[tuple[int, int], tuple[int, int] | None]
    children: dict[tuple[int, int], list[tuple[int, int]]] = field(default_factory=dict)
    leaves: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def nodes(self) -> set[tuple[int, int]]:
        return set(self.parent)

    def n_edges(self) -> int:
        return sum(1 for p in self.parent.values() if p is not None)

    def path_to_root(self, node: tuple[int, int]) -> list[tuple[int, int]]:
        path = [node]
        while (up := self.parent[path[-1]]) is not None:
            path.append(up)
        return path

    def lca(self, a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
        anc = set(self.path_to_root(a))
        node = b
        while node not in anc:
            node = self.parent[node]
            if node is None:
                raise ValueError("nodes are in disjoint trees")
        return node


def build_spacetime_tree(c: Circuit) -> SpacetimeTree:
    """Spacetime tree of a GHZ-preparation circuit.

    Nodes are the eligible data-qubit locations.  Every node except the
    root (the prepared qubit at its Hadamard layer) has exactly one
    parent: its own wire one step earlier, or, at an excitation layer,
    the entangling control's input location.
    """
    prep = [(t, g) for t, g in c.gates_of_kind(GATE_H)]
    if len(prep) != 1:
        raise CircuitError("expected exactly one preparation Hadamard")
    t_root, g_root = prep[0]
    root = (g_root.qubits[0], t_root)

    nodes = {
        (q, t)
        for q in c.data_qubits
        for t in range(c.activation[q], c.n_wire_layers)
        if not c.in_ground_span(q, t)
    }
    if root not in nodes:
        raise CircuitError("root location is not eligible")

    # Branch edges: excitation events (first entangling CNOT or a recompute).
    branch_parent: dict[tuple[int, int], tuple[int, int]] = {}
    for t, g in c.gates_of_kind(GATE_CX, GATE_RCX):
        tgt, ctl = g.target, g.control
        if (tgt, t) in nodes and (tgt, t - 1) not in nodes:
            branch_parent[(tgt, t)] = (ctl, t - 1)

    parent: dict[tuple[int, int], tuple[int, int] | None] = {}
    for node in nodes:
        q, t = node
        if node == root:
            parent[node] = None
        elif (q, t - 1) in nodes:
            parent[node] = (q, t - 1)
        elif node in branch_parent:
            up = branch_parent[node]
            if up not in nodes:
                raise CircuitError(f"branch parent {up} of {node} is not eligible")
            parent[node] = up
        else:
            raise CircuitError(f"location {node} is unreachable in the spacetime tree")

    tree = SpacetimeTree(root=root, parent=parent)
    for node, up in parent.items():
        if up is not None:
            tree.children.setdefault(up, []).append(node)
    for lst in tree.children.values():
        lst.sort()
    last = c.n_wire_layers - 1
    tree.leaves = {q: (q, last) for q in c.data_qubits}
    return tree
