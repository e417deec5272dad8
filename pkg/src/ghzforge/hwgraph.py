"""Hardware connectivity graphs with error-rate annotations.

A :class:`HardwareGraph` is the qubit/coupler inventory the compiler works
on: vertices are qubits (with readout and idle error rates), edges are
native two-qubit gates (with gate error rates).  Instances are immutable
after construction; every operation returns a new graph or a plain value,
so graphs can be shared freely across worker threads.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from . import rng


class GraphFormatError(ValueError):
    """Malformed graph file or invariant violation."""


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise GraphFormatError(f"{name} must be in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class QubitSpec:
    """Per-qubit error rates.  All probabilities are per-layer."""

    id: int
    readout_error: float = 0.0
    idle_dephasing: float = 0.0
    idle_relaxation: float = 0.0

    def __post_init__(self):
        _check_prob("readout_error", self.readout_error)
        _check_prob("idle_dephasing", self.idle_dephasing)
        _check_prob("idle_relaxation", self.idle_relaxation)


@dataclass(frozen=True)
class EdgeSpec:
    """A native two-qubit gate between qubits ``a`` and ``b``."""

    a: int
    b: int
    gate_error: float = 0.0

    def __post_init__(self):
        if self.a == self.b:
            raise GraphFormatError(f"self-loop on qubit {self.a}")
        _check_prob("gate_error", self.gate_error)

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass(frozen=True)
class DropoutPolicy:
    """Thresholds above which qubits/edges are treated as defective."""

    max_gate_error: float = 1.0
    max_readout_error: float = 1.0

    def __post_init__(self):
        _check_prob("max_gate_error", self.max_gate_error)
        _check_prob("max_readout_error", self.max_readout_error)


class HardwareGraph:
    """Undirected connectivity graph over qubits.

    Qubit ids are arbitrary non-negative integers (contiguity is enforced
    only when parsing a file, so graphs that survived dropouts keep their
    original hardware ids).
    """

    def __init__(self, qubits: Iterable[QubitSpec], edges: Iterable[EdgeSpec]):
        self.qubits: dict[int, QubitSpec] = {}
        for q in qubits:
            if q.id in self.qubits:
                raise GraphFormatError(f"duplicate qubit id {q.id}")
            if q.id < 0:
                raise GraphFormatError(f"negative qubit id {q.id}")
            self.qubits[q.id] = q
        self.edges: dict[tuple[int, int], EdgeSpec] = {}
        adjacency: dict[int, list[int]] = {q: [] for q in self.qubits}
        for e in edges:
            if e.a not in self.qubits or e.b not in self.qubits:
                raise GraphFormatError(f"edge ({e.a}, {e.b}) references unknown qubit")
            if e.key in self.edges:
                raise GraphFormatError(f"duplicate edge {e.key}")
            self.edges[e.key] = e
            adjacency[e.a].append(e.b)
            adjacency[e.b].append(e.a)
        self.adjacency: dict[int, tuple[int, ...]] = {
            q: tuple(sorted(nbrs)) for q, nbrs in adjacency.items()
        }

    # -- queries ---------------------------------------------------------

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def qubit_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.qubits))

    def neighbors(self, q: int) -> tuple[int, ...]:
        return self.adjacency[q]

    def edge(self, a: int, b: int) -> EdgeSpec:
        return self.edges[(a, b) if a < b else (b, a)]

    def gate_error(self, a: int, b: int) -> float:
        return self.edge(a, b).gate_error

    def __contains__(self, q: int) -> bool:
        return q in self.qubits

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "qubits": [
                {
                    "id": q.id,
                    "readout_error": q.readout_error,
                    "idle_dephasing": q.idle_dephasing,
                    "idle_relaxation": q.idle_relaxation,
                }
                for q in (self.qubits[i] for i in self.qubit_ids())
            ],
            "edges": [
                {"a": e.a, "b": e.b, "gate_error": e.gate_error}
                for _, e in sorted(self.edges.items())
            ],
        }


def parse_hardware_graph(text: str) -> HardwareGraph:
    """Parse the JSON graph-file format.

    The file is an object with ``qubits`` (id plus optional rates,
    defaulting to 0) and ``edges`` (a, b, optional gate_error).  Qubit ids
    must be unique and contiguous from 0.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict) or "qubits" not in data or "edges" not in data:
        raise GraphFormatError("graph file must be an object with 'qubits' and 'edges'")
    qubits = []
    for entry in data["qubits"]:
        if "id" not in entry:
            raise GraphFormatError("qubit entry missing 'id'")
        qubits.append(
            QubitSpec(
                id=int(entry["id"]),
                readout_error=float(entry.get("readout_error", 0.0)),
                idle_dephasing=float(entry.get("idle_dephasing", 0.0)),
                idle_relaxation=float(entry.get("idle_relaxation", 0.0)),
            )
        )
    edges = []
    for entry in data["edges"]:
        if "a" not in entry or "b" not in entry:
            raise GraphFormatError("edge entry missing 'a'/'b'")
        edges.append(
            EdgeSpec(
                a=int(entry["a"]),
                b=int(entry["b"]),
                gate_error=float(entry.get("gate_error", 0.0)),
            )
        )
    g = HardwareGraph(qubits, edges)
    ids = g.qubit_ids()
    if ids and ids != tuple(range(len(ids))):
        raise GraphFormatError("qubit ids must be contiguous from 0 in graph files")
    return g


def serialize_hardware_graph(g: HardwareGraph) -> str:
    return json.dumps(g.to_dict(), indent=2, sort_keys=True) + "\n"


def apply_dropouts(g: HardwareGraph, policy: DropoutPolicy) -> HardwareGraph:
    """Remove qubits/edges whose error rates exceed the policy thresholds.

    Qubits above ``max_readout_error`` go (taking incident edges with
    them); edges above ``max_gate_error`` go independently.  The input is
    untouched; ids of survivors are preserved.
    """
    keep_q = {
        q for q, spec in g.qubits.items() if spec.readout_error <= policy.max_readout_error
    }
    qubits = [g.qubits[q] for q in sorted(keep_q)]
    edges = [
        e
        for e in g.edges.values()
        if e.a in keep_q and e.b in keep_q and e.gate_error <= policy.max_gate_error
    ]
    return HardwareGraph(qubits, edges)


# -- graph algorithms ----------------------------------------------------


def bfs_distances(
    g: HardwareGraph, source: int, blocked: frozenset[int] | set[int] = frozenset()
) -> dict[int, int]:
    """Hop distances from ``source`` to every reachable unblocked qubit."""
    if source not in g:
        raise KeyError(f"unknown qubit id {source}")
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in dist and v not in blocked:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def eccentricity(g: HardwareGraph, u: int) -> int:
    """Largest hop distance from ``u``; requires a connected graph."""
    dist = bfs_distances(g, u)
    if len(dist) != g.n_qubits:
        raise ValueError("graph is disconnected; eccentricity undefined")
    return max(dist.values())


def select_root(g: HardwareGraph) -> int:
    """Minimal-eccentricity qubit, smallest id on ties."""
    if g.n_qubits == 0:
        raise ValueError("empty graph")
    best_id = -1
    best_ecc = None
    for q in g.qubit_ids():
        e = eccentricity(g, q)
        if best_ecc is None or e < best_ecc:
            best_ecc, best_id = e, q
    return best_id


def connected_components(g: HardwareGraph) -> list[frozenset[int]]:
    """Components sorted by (descending size, smallest member id)."""
    seen: set[int] = set()
    comps = []
    for q in g.qubit_ids():
        if q in seen:
            continue
        comp = frozenset(bfs_distances(g, q))
        seen |= comp
        comps.append(comp)
    comps.sort(key=lambda c: (-len(c), min(c)))
    return comps


def largest_component_subgraph(g: HardwareGraph) -> HardwareGraph:
    comps = connected_components(g)
    if not comps:
        raise ValueError("empty graph")
    keep = comps[0]
    return HardwareGraph(
        [g.qubits[q] for q in sorted(keep)],
        [e for e in g.edges.values() if e.a in keep and e.b in keep],
    )


# -- lattice generators --------------------------------------------------


def _synthetic_rates(n_qubits: int, edge_keys: list[tuple[int, int]], seed: int):
    """Synthetic per-qubit/per-edge rates (log-uniform with a few outliers).

    These stand in for device calibration data, which is not shipped; a
    small fraction of elements get large rates so dropout policies have
    something to remove.
    """
    r = rng.CounterRNG(rng.derive(seed, rng.STREAM_RATES))

    def loguni(lo, hi):
        import math

        u = r.next_unit()
        return math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))

    qubits = []
    for q in range(n_qubits):
        readout = loguni(3e-3, 2.5e-2)
        if r.next_unit() < 0.02:
            readout = loguni(0.10, 0.30)
        qubits.append(
            QubitSpec(
                id=q,
                readout_error=readout,
                idle_dephasing=loguni(4e-4, 2e-3),
                idle_relaxation=loguni(8e-5, 4e-4),
            )
        )
    edges = []
    for a, b in edge_keys:
        err = loguni(8e-4, 6e-3)
        if r.next_unit() < 0.02:
            err = loguni(3e-2, 1e-1)
        edges.append(EdgeSpec(a=a, b=b, gate_error=err))
    return qubits, edges


def path_graph(n: int, seed: int | None = None) -> HardwareGraph:
    keys = [(i, i + 1) for i in range(n - 1)]
    if seed is None:
        return HardwareGraph([QubitSpec(id=i) for i in range(n)], [EdgeSpec(a, b) for a, b in keys])
    return HardwareGraph(*_synthetic_rates(n, keys, seed))


def grid_graph(rows: int, cols: int, seed: int | None = None) -> HardwareGraph:
    """rows x cols square lattice, qubit id = r * cols + c."""
    keys = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                keys.append((q, q + 1))
            if r + 1 < rows:
                keys.append((q, q + cols))
    n = rows * cols
    if seed is None:
        return HardwareGraph([QubitSpec(id=i) for i in range(n)], [EdgeSpec(a, b) for a, b in keys])
    return HardwareGraph(*_synthetic_rates(n, keys, seed))


def heavy_hex_graph(rows: int = 8, row_width: int = 16, seed: int | None = None) -> HardwareGraph:
    """Heavy-hex lattice: horizontal rows of qubits joined by rung qubits.

    Rows are chains of ``row_width`` qubits.  Between consecutive rows,
    rung qubits sit at every fourth column, offset by two columns in
    alternating gaps.  The default 8 x 16 instance has 156 qubits and 176
    edges (128 row qubits + 28 rungs; 120 row edges + 56 rung edges).
    """
    if rows < 1 or row_width < 3:
        raise ValueError("need rows >= 1 and row_width >= 3")
    n_row_qubits = rows * row_width
    keys = []
    for r in range(rows):
        base = r * row_width
        keys.extend((base + c, base + c + 1) for c in range(row_width - 1))
    next_id = n_row_qubits
    for gap in range(rows - 1):
        offset = 0 if gap % 2 == 0 else 2
        for col in range(offset, row_width, 4):
            rung = next_id
            next_id += 1
            keys.append((gap * row_width + col, rung))
            keys.append((rung, (gap + 1) * row_width + col))
    if seed is None:
        return HardwareGraph(
            [QubitSpec(id=i) for i in range(next_id)], [EdgeSpec(a, b) for a, b in keys]
        )
    return HardwareGraph(*_synthetic_rates(next_id, keys, seed))


def heavy_hex_counts(rows: int, row_width: int) -> tuple[int, int]:
    """Closed-form (qubits, edges) for :func:`heavy_hex_graph`."""
    rungs = sum(
        len(range(0 if gap % 2 == 0 else 2, row_width, 4)) for gap in range(rows - 1)
    )
    qubits = rows * row_width + rungs
    edges = rows * (row_width - 1) + 2 * rungs
    return qubits, edges
