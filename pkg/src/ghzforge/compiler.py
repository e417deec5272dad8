"""GHZ-preparation compiler for arbitrary connectivity graphs.

Pipeline per candidate circuit: grow a BFS entangling tree from a
minimal-eccentricity root (optionally detouring around randomly blocked
vertices), attach parity-check ancillas where two support qubits share an
unused neighbor, score the checks by the spacetime area they detect, and
keep the best-covered candidate over many randomized trials.  The winner
then receives temporary uncomputation of long-idling qubits.

Detecting regions come in two flavors:

* a fast path/LCA computation on the preparation spacetime tree, used to
  score candidate checks during the search, and
* exact backward propagation of the measured ancilla-Z observable through
  the full circuit (:func:`back_propagate_z_support`), which also handles
  check-wait wires, ancilla wires and uncomputation holes.  Final reports
  always use the exact regions.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

from . import rng
from .circuit import (
    GATE_CX,
    GATE_KCX,
    GATE_RCX,
    GATE_UCX,
    Circuit,
    Gate,
    SpacetimeTree,
    depth_stats,
)
from .hwgraph import DropoutPolicy, HardwareGraph, apply_dropouts, largest_component_subgraph, select_root


class CompileError(RuntimeError):
    pass


@dataclass
class GhzTree:
    """Entangling tree over hardware qubits (parent[root] is absent)."""

    root: int
    parent: dict[int, int]
    children: dict[int, list[int]]
    support: tuple[int, ...]  # BFS discovery order, root first

    def depth_of(self, q: int) -> int:
        d = 0
        while q != self.root:
            q = self.parent[q]
            d += 1
        return d

    def tree_neighbors(self, q: int) -> list[int]:
        nbrs = list(self.children.get(q, ()))
        if q != self.root:
            nbrs.append(self.parent[q])
        return nbrs

    def lca(self, i: int, j: int) -> int:
        anc = {i}
        q = i
        while q != self.root:
            q = self.parent[q]
            anc.add(q)
        while j not in anc:
            j = self.parent[j]
        return j


@dataclass
class DetectingRegion:
    """Spacetime locations whose X/Y fault flips the check."""

    locations: frozenset[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.locations)

    def __contains__(self, loc: tuple[int, int]) -> bool:
        return loc in self.locations


@dataclass
class ParityCheck:
    """ZZ parity check of data qubits (i, j) via a shared ancilla."""

    ancilla: int
    i: int
    j: int
    score: int = 0
    region: DetectingRegion | None = None
    leg_layers: tuple[int, int] | None = None  # layers of the (i, j) check CNOTs


@dataclass
class CoverageReport:
    covered: int
    total: int
    fraction: float
    per_check: list[int]
    weighted_fraction: float | None = None

    def to_dict(self) -> dict:
        d = {
            "covered": self.covered,
            "total": self.total,
            "fraction": self.fraction,
            "per_check": list(self.per_check),
            "n_checks": len(self.per_check),
        }
        if self.weighted_fraction is not None:
            d["weighted_fraction"] = self.weighted_fraction
        return d


@dataclass
class CompileConfig:
    n_data: int
    trials: int = 1
    block_probability: float = 0.06
    seed: int = 0
    uncompute_idle_threshold: int | None = None  # None -> auto from prep depth
    enable_uncompute: bool = True
    dropout: DropoutPolicy = field(default_factory=DropoutPolicy)
    weighted_coverage: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.block_probability < 1.0:
            raise ValueError("block_probability must be in [0, 1)")


# -- tree growth and circuit construction ----------------------------------


def grow_tree(
    g: HardwareGraph, root: int, n_data: int, blocked: frozenset[int] | set[int] = frozenset()
) -> GhzTree:
    """BFS entangling tree from ``root`` over unblocked vertices.

    Neighbor expansion is ordered by (ascending edge gate_error,
    ascending id); growth stops once ``n_data`` vertices are in support.
    """
    if root in blocked:
        raise CompileError("root is blocked")
    if n_data < 1:
        raise CompileError("n_data must be >= 1")
    parent: dict[int, int] = {}
    children: dict[int, list[int]] = {}
    support = [root]
    visited = {root}
    queue = deque([root])
    while queue and len(support) < n_data:
        u = queue.popleft()
        nbrs = sorted(
            (v for v in g.neighbors(u) if v not in visited and v not in blocked),
            key=lambda v: (g.gate_error(u, v), v),
        )
        for v in nbrs:
            if len(support) >= n_data:
                break
            visited.add(v)
            parent[v] = u
            children.setdefault(u, []).append(v)
            support.append(v)
            queue.append(v)
    if len(support) < n_data:
        raise CompileError(
            f"only {len(support)} of {n_data} qubits reachable from root {root}"
        )
    return GhzTree(root=root, parent=parent, children=children, support=tuple(support))


def build_prep_circuit(t: GhzTree) -> Circuit:
    """ASAP-layered preparation circuit for the tree.

    The root Hadamard sits in layer 0; the CNOT entangling each child is
    placed in layer max(last use of parent, last use of child) + 1,
    following BFS discovery order, so sibling fan-out serializes while
    independent branches run in parallel.
    """
    layers: list[list[Gate]] = [[Gate.h(t.root)]]
    busy = {t.root: 0}
    for q in t.support:
        for child in t.children.get(q, ()):
            layer = max(busy.get(q, 0), busy.get(child, 0)) + 1
            while len(layers) <= layer:
                layers.append([])
            layers[layer].append(Gate.cx(q, child))
            busy[q] = layer
            busy[child] = layer
    return Circuit(layers, data_qubits=t.support)


def schedule_checks(c: Circuit, checks: list[ParityCheck]) -> Circuit:
    """Append the check CNOT block after the preparation.

    All first legs share one layer and all second legs the next: checks
    use disjoint data qubits and distinct ancillas, so two layers always
    suffice.  Leg layers are recorded on the checks.
    """
    if not checks:
        return c
    t1 = c.depth
    first = [Gate.kcx(chk.i, chk.ancilla) for chk in checks]
    second = [Gate.kcx(chk.j, chk.ancilla) for chk in checks]
    for chk in checks:
        chk.leg_layers = (t1, t1 + 1)
    return Circuit(
        layers=list(c.layers) + [first, second],
        data_qubits=c.data_qubits,
        ancillas=sorted(set(c.ancillas) | {chk.ancilla for chk in checks}),
        ground_spans={q: list(s) for q, s in c.ground_spans.items()},
    )


# -- detecting regions ------------------------------------------------------


def _pair_segments(
    t: GhzTree, activation: dict[int, int], n_layers: int, i: int, j: int
) -> tuple[int, list[tuple[int, int, int]]] | None:
    """Detecting region of a prep-tree check pair as per-qubit intervals.

    Returns (score, [(qubit, t_lo, t_hi_inclusive), ...]) with leaves taken
    at the last preparation layer, or None when one qubit is an ancestor of
    the other (those pairs have a one-sided, poorly-detecting region and
    are rejected outright).
    """
    if i == j:
        raise CompileError("check pair must be distinct")
    a = t.lca(i, j)
    if a == i or a == j:
        return None
    last = n_layers - 1
    segments: list[tuple[int, int, int]] = []
    entries = []
    for leaf in (i, j):
        chain = [leaf]
        q = leaf
        while t.parent[q] != a:
            q = t.parent[q]
            chain.append(q)
        # chain runs leaf -> child-of-lca; each qubit hands off to the one
        # below it at that qubit's activation layer.
        segments.append((chain[0], activation[chain[0]], last))
        for m in range(1, len(chain)):
            segments.append((chain[m], activation[chain[m]], activation[chain[m - 1]] - 1))
        entries.append(activation[chain[-1]])
    lo, hi = min(entries), max(entries)
    if lo != hi:
        segments.append((a, lo, hi - 1))
    score = 2 * (n_layers - lo)
    return score, segments


def detecting_region(
    tree: SpacetimeTree,
    i: int,
    j: int,
    leaf_i: tuple[int, int] | None = None,
    leaf_j: tuple[int, int] | None = None,
) -> DetectingRegion:
    """Path-union detecting region on the spacetime tree.

    The region is the symmetric difference of the two root paths from the
    measured leaves (by default each qubit's final location; pass the
    pre-check locations when check CNOTs exist).  Valid for circuits
    without uncomputation holes; the exact general computation is
    :func:`back_propagate_z_support`.
    """
    if i == j:
        raise CompileError("check pair must be distinct")
    leaf_i = leaf_i or tree.leaves[i]
    leaf_j = leaf_j or tree.leaves[j]
    path_i = tree.path_to_root(leaf_i)
    path_j = tree.path_to_root(leaf_j)
    return DetectingRegion(frozenset(path_i) ^ frozenset(path_j))


def back_propagate_z_support(c: Circuit, observable_qubits) -> frozenset[tuple[int, int]]:
    """Eligible locations where the back-propagated Z observable has a Z.

    Walks the unitary layers backward, conjugating the Z mask through each
    CNOT (Z on the target picks up a Z on the control).  A fault with an
    X/Y component at a returned location anticommutes with the observable
    and flips the measurement; Z faults never do.  Z weight on ineligible
    (ground) locations is carried through the algebra but not recorded,
    which is exact because Z acts trivially on |0>.
    """
    zmask = 0
    for q in observable_qubits:
        zmask |= 1 << c.qubit_index[q]
    support: set[tuple[int, int]] = set()

    def record(t: int):
        m = zmask
        while m:
            low = m & -m
            idx = low.bit_length() - 1
            q = c.qubits[idx]
            if c.is_eligible(q, t):
                support.add((q, t))
            m ^= low

    for t in range(c.n_wire_layers - 1, -1, -1):
        record(t)
        if t == 0:
            break
        for g in c.layers[t]:
            if g.kind in (GATE_CX, GATE_UCX, GATE_RCX, GATE_KCX):
                ci = 1 << c.qubit_index[g.control]
                ti = 1 << c.qubit_index[g.target]
                if zmask & ti:
                    zmask ^= ci
    return frozenset(support)


def back_propagator(c: Circuit, chk: ParityCheck) -> dict[tuple[int, int], str]:
    """Map every eligible location to 'Z' or 'I' for one check's observable."""
    z_support = back_propagate_z_support(c, [chk.ancilla])
    return {
        loc: ("Z" if loc in z_support else "I") for loc in c.eligible_locations()
    }


def compute_exact_regions(c: Circuit, checks: list[ParityCheck]) -> None:
    for chk in checks:
        chk.region = DetectingRegion(back_propagate_z_support(c, [chk.ancilla]))


# -- check allocation -------------------------------------------------------


def allocate_checks(g: HardwareGraph, t: GhzTree, c: Circuit) -> list[ParityCheck]:
    """Attach parity checks to unused qubits adjacent to two support qubits.

    Each candidate ancilla proposes its highest-scoring pair (region size
    on the preparation tree, lexicographic tie-break); ancillas are then
    granted greedily in score order under the constraints that every
    ancilla is used at most once and every data qubit sits in at most one
    check.  Ancestor/descendant pairs are rejected.
    """
    support = set(t.support)
    n_layers = c.n_wire_layers
    pool: dict[int, list[int]] = {}
    for anc in g.qubit_ids():
        if anc in support:
            continue
        nbrs = [v for v in g.neighbors(anc) if v in support]
        if len(nbrs) >= 2:
            pool[anc] = sorted(nbrs)

    available = set(support)

    def best_pair(nbrs):
        best = None
        for i, j in combinations(nbrs, 2):
            if i not in available or j not in available:
                continue
            info = _pair_segments(t, c.activation, n_layers, i, j)
            if info is None:
                continue
            score = info[0]
            if best is None or score > best[0] or (score == best[0] and (i, j) < best[1:]):
                best = (score, i, j)
        return best

    chosen: list[ParityCheck] = []
    while pool:
        ranked = []
        for anc, nbrs in pool.items():
            bp = best_pair(nbrs)
            if bp is not None:
                ranked.append((-bp[0], anc, bp))
        if not ranked:
            break
        ranked.sort()
        _, anc, (score, i, j) = ranked[0]
        chosen.append(ParityCheck(ancilla=anc, i=i, j=j, score=score))
        available -= {i, j}
        del pool[anc]
    chosen.sort(key=lambda chk: chk.ancilla)
    return chosen


# -- coverage ---------------------------------------------------------------


def coverage(
    c: Circuit,
    checks: list[ParityCheck],
    weights: dict[tuple[int, int], float] | None = None,
) -> CoverageReport:
    """Fraction of eligible locations inside at least one detecting region.

    Regions must already be computed against this circuit.  The optional
    ``weights`` map adds a weighted fraction alongside the plain one.
    """
    eligible = c.eligible_locations()
    union: set[tuple[int, int]] = set()
    per_check = []
    for chk in checks:
        if chk.region is None:
            raise CompileError("check region not computed")
        per_check.append(len(chk.region))
        union |= chk.region.locations
    total = len(eligible)
    covered = len(union & set(eligible))
    report = CoverageReport(
        covered=covered,
        total=total,
        fraction=(covered / total) if total else 0.0,
        per_check=per_check,
    )
    if weights is not None:
        wtot = sum(weights.get(loc, 0.0) for loc in eligible)
        wcov = sum(weights.get(loc, 0.0) for loc in union)
        report.weighted_fraction = (wcov / wtot) if wtot > 0 else 0.0
    return report


def _search_coverage(
    t: GhzTree, c: Circuit, checks: list[ParityCheck]
) -> float:
    """Cheap interval-union coverage of the preparation circuit.

    Uses the path regions on the prep tree (leaves at the last prep
    layer); the denominator is the prep-only eligible location count.
    This is the metric the randomized search optimizes; final reports
    recompute coverage exactly on the finished circuit.
    """
    n_layers = c.n_wire_layers
    per_qubit: dict[int, list[tuple[int, int]]] = {}
    for chk in checks:
        info = _pair_segments(t, c.activation, n_layers, chk.i, chk.j)
        if info is None:
            continue
        for q, lo, hi in info[1]:
            if lo <= hi:
                per_qubit.setdefault(q, []).append((lo, hi))
    covered = 0
    for q, ivals in per_qubit.items():
        ivals.sort()
        cur_lo, cur_hi = ivals[0]
        for lo, hi in ivals[1:]:
            if lo > cur_hi + 1:
                covered += cur_hi - cur_lo + 1
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        covered += cur_hi - cur_lo + 1
    total = sum(n_layers - c.activation[q] for q in c.data_qubits)
    return covered / total if total else 0.0


# -- temporary uncomputation -------------------------------------------------


def insert_uncompute(
    c: Circuit,
    t: GhzTree,
    threshold: int,
    qubits: list[int] | None = None,
) -> Circuit:
    """Temporarily disentangle long-idling qubits back to |0>.

    A data qubit whose gate-free span before the check block exceeds
    ``threshold`` layers is uncomputed as soon as its last entangling CNOT
    is done (via a still-entangled tree neighbor) and recomputed as late
    as possible before the checks, creating a ground span during which it
    hosts no faults.  Candidates are processed root-first.  The noiseless
    final state is unchanged.

    With an explicit ``qubits`` list, failure to place a partner raises;
    in threshold mode unplaceable candidates are skipped.
    """
    if threshold < 1:
        raise CompileError("threshold must be >= 1")
    layers: list[list[Gate]] = [list(layer) for layer in c.layers]
    barrier = next((tt for tt, _ in c.gates_of_kind(GATE_KCX)), c.n_wire_layers)

    busy: dict[int, set[int]] = {}
    for tt, layer in enumerate(layers):
        for g in layer:
            for q in g.qubits:
                busy.setdefault(q, set()).add(tt)

    def last_use(q: int) -> int:
        return max(busy.get(q, {0}))

    def last_use_before(q: int, stop: int) -> int:
        uses = [tt for tt in busy.get(q, ()) if tt < stop]
        return max(uses) if uses else -1

    explicit = qubits is not None
    if explicit:
        candidates = list(qubits)
    else:
        candidates = [
            q
            for q in c.data_qubits
            if t.children.get(q)
            and barrier - last_use_before(q, barrier) - 1 > threshold
        ]
        candidates.sort(key=lambda q: (c.activation[q], q))

    ground_spans = {q: list(s) for q, s in c.ground_spans.items()}
    uncomputed: set[int] = set(ground_spans)
    placed_any = False

    for q in candidates:
        if q in uncomputed:
            continue
        lq = last_use_before(q, barrier)
        best = None
        for p in sorted(t.tree_neighbors(q), key=lambda p: (last_use_before(p, barrier), p)):
            if p in uncomputed or p not in c.data_qubits:
                continue
            u = max(lq, c.activation[p]) + 1
            while u < barrier and (u in busy.get(p, ()) or u in busy.get(q, ())):
                u += 1
            if u >= barrier:
                continue
            # The span may not swallow a later gate on q (q may serve as
            # another qubit's un/recompute control and must be entangled
            # there), so the recompute scan stops at q's next engagement.
            limit = min((tt for tt in busy.get(q, ()) if tt > u), default=barrier)
            r = min(barrier - 1, limit - 1)
            while r > u and (r in busy.get(p, ()) or r in busy.get(q, ())):
                r -= 1
            if r <= u:
                continue
            if best is None or (u, p) < (best[0], best[2]):
                best = (u, r, p)
        if best is None:
            if explicit:
                raise CompileError(f"no uncompute partner available for qubit {q}")
            continue
        u, r, p = best
        layers[u].append(Gate.cx(p, q, GATE_UCX))
        layers[r].append(Gate.cx(p, q, GATE_RCX))
        busy.setdefault(p, set()).update((u, r))
        busy.setdefault(q, set()).update((u, r))
        ground_spans.setdefault(q, []).append((u, r))
        uncomputed.add(q)
        placed_any = True

    if not placed_any:
        return c
    return Circuit(
        layers=layers,
        data_qubits=c.data_qubits,
        ancillas=c.ancillas,
        ground_spans=ground_spans,
    )


def _auto_uncompute_threshold(prep_depth: int) -> int:
    """Idle-span threshold that, on typical instances, singles out the
    root: only a qubit idling through four fifths of the preparation
    qualifies, and only the root (done once its last child is entangled)
    normally idles that long."""
    return max(4, (4 * prep_depth) // 5)


# -- randomized compilation ---------------------------------------------------


@dataclass
class TrialRow:
    trial: int
    seed: int
    n_checks: int
    coverage: float
    cnot_depth: int
    accepted: bool


@dataclass
class CompileResult:
    circuit: Circuit
    checks: list[ParityCheck]
    coverage: CoverageReport
    trial_log: list[TrialRow]
    tree: GhzTree
    root: int
    blocked: frozenset[int]
    best_trial: int
    graph: HardwareGraph


def _run_trial(g: HardwareGraph, root: int, n_data: int, blocked: frozenset[int]):
    tree = grow_tree(g, root, n_data, blocked)
    prep = build_prep_circuit(tree)
    checks = allocate_checks(g, tree, prep)
    cov = _search_coverage(tree, prep, checks)
    err_sum = sum(g.gate_error(tree.parent[q], q) for q in tree.support if q != tree.root)
    return tree, prep, checks, cov, err_sum


def randomized_compile(
    g: HardwareGraph, cfg: CompileConfig, threads: int = 1
) -> CompileResult:
    """Randomized search for the best-covered GHZ circuit.

    Trial 0 always uses the empty blocked set (the plain BFS compile), so
    the winner can never score below the unblocked baseline; subsequent
    trials block each non-root vertex independently with
    ``block_probability``.  Winner selection is argmax coverage with ties
    broken by (more checks, lower summed tree-edge error, earlier trial).
    Fully deterministic given (graph, config); trials are independent and
    may run on a thread pool, with reduction in trial order.
    """
    g = apply_dropouts(g, cfg.dropout)
    if g.n_qubits == 0:
        raise CompileError("no qubits survive the dropout policy")
    g = largest_component_subgraph(g)
    if g.n_qubits < cfg.n_data + 1:
        raise CompileError(
            f"largest component has {g.n_qubits} qubits; need n_data + 1 = {cfg.n_data + 1}"
        )
    root = select_root(g)
    compile_key = rng.derive(cfg.seed, rng.STREAM_COMPILE)
    others = [q for q in g.qubit_ids() if q != root]

    def blocked_for(trial: int) -> frozenset[int]:
        if trial == 0:
            return frozenset()
        key = rng.derive(compile_key, trial)
        return frozenset(
            q for idx, q in enumerate(others) if rng.unit(key, idx) < cfg.block_probability
        )

    def attempt(trial: int):
        blocked = blocked_for(trial)
        try:
            tree, prep, checks, cov, err_sum = _run_trial(g, root, cfg.n_data, blocked)
        except CompileError:
            return trial, None
        row = TrialRow(
            trial=trial,
            seed=rng.derive(compile_key, trial),
            n_checks=len(checks),
            coverage=cov,
            cnot_depth=depth_stats(prep)["prep_cnot_depth"],
            accepted=True,
        )
        return trial, (row, cov, len(checks), err_sum, blocked)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(attempt, range(cfg.trials)))
    else:
        results = [attempt(tr) for tr in range(cfg.trials)]

    rows: list[TrialRow] = []
    best_key = None
    best_trial = -1
    best_blocked: frozenset[int] = frozenset()
    for trial, payload in results:
        if payload is None:
            rows.append(
                TrialRow(
                    trial=trial,
                    seed=rng.derive(compile_key, trial),
                    n_checks=0,
                    coverage=0.0,
                    cnot_depth=0,
                    accepted=False,
                )
            )
            continue
        row, cov, n_checks, err_sum, blocked = payload
        rows.append(row)
        key = (-cov, -n_checks, err_sum, trial)
        if best_key is None or key < best_key:
            best_key = key
            best_trial = trial
            best_blocked = blocked
    if best_key is None:
        raise CompileError("all trials failed to reach n_data qubits")

    tree, prep, checks, _, _ = _run_trial(g, root, cfg.n_data, best_blocked)
    c = schedule_checks(prep, checks)
    if cfg.enable_uncompute:
        threshold = cfg.uncompute_idle_threshold
        if threshold is None:
            threshold = _auto_uncompute_threshold(depth_stats(prep)["prep_cnot_depth"])
        c = insert_uncompute(c, tree, threshold)
    compute_exact_regions(c, checks)
    weights = None
    if cfg.weighted_coverage:
        weights = _error_weights(g, c)
    report = coverage(c, checks, weights=weights)
    return CompileResult(
        circuit=c,
        checks=checks,
        coverage=report,
        trial_log=rows,
        tree=tree,
        root=root,
        blocked=best_blocked,
        best_trial=best_trial,
        graph=g,
    )


def _error_weights(g: HardwareGraph, c: Circuit) -> dict[tuple[int, int], float]:
    """Per-location weights from the graph's noise annotations: gate error
    at two-qubit-gate outputs, idle rates elsewhere."""
    weights: dict[tuple[int, int], float] = {}
    for q, tt in c.eligible_locations():
        spec = g.qubits.get(q)
        if spec is not None:
            weights[(q, tt)] = spec.idle_dephasing + spec.idle_relaxation
    for tt, gate in c.gates_of_kind(GATE_CX, GATE_UCX, GATE_RCX, GATE_KCX):
        a, b = gate.qubits
        try:
            err = g.gate_error(a, b)
        except KeyError:
            err = 0.0
        for q in (a, b):
            if c.is_eligible(q, tt):
                weights[(q, tt)] = weights.get((q, tt), 0.0) + err
    return weights


def trial_log_csv(rows: list[TrialRow]) -> str:
    lines = ["trial,seed,n_checks,coverage,cnot_depth,accepted"]
    for r in rows:
        lines.append(
            f"{r.trial},{r.seed},{r.n_checks},{r.coverage!r},{r.cnot_depth},{str(r.accepted).lower()}"
        )
    return "\n".join(lines) + "\n"
