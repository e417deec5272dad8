"""Pauli-frame sampling of noisy circuit executions.

The preparation circuit is Clifford, so a noisy run is the ideal state
plus a Pauli "frame": the XOR of every sampled fault conjugated forward
to the end of the circuit.  :class:`FramePlan` precomputes, for every
fault site, the final-frame bit masks of each possible fault Pauli; a
shot is then just Bernoulli draws over sites plus mask XORs, which is
what the compiled/NumPy kernels execute.

Syndromes come for free: a check ancilla is only ever a CNOT target, so
the frame's X component on an ancilla at measurement time is exactly
"this shot's faults flip that check".  Z-basis data bits are the GHZ
branch bit XOR the frame's X mask; rotated-basis parity observables are
sampled at the observable level from the closed-form expectation, which
is exact for every quantity consumed downstream.

Per-shot draw schedule (fixed so that all backends agree bit-for-bit):
site draws occupy counters [0, S); ancilla readout flips [S, S + A);
then the setting block: Z basis uses one branch-bit draw followed by one
readout draw per data qubit; parity/stabilizer settings use one outcome
draw and one aggregated sign-flip draw.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .circuit import CNOT_KINDS, Circuit
from .hwgraph import HardwareGraph
from .noise import NoiseModel

try:  # compiled kernel; the NumPy fallback is bit-identical
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on build environment
    _compiled = None

from . import _kernels_py as _numpy_kernel

COMPILED_AVAILABLE = _compiled is not None


def kernel_backends() -> list[str]:
    return (["compiled"] if COMPILED_AVAILABLE else []) + ["numpy"]


@dataclass(frozen=True)
class PauliFrame:
    """Accumulated Pauli (up to phase) acting on the ideal final state.

    Bit i of each mask refers to dense qubit index i of the circuit.
    """

    x_mask: int
    z_mask: int

    def pauli_on(self, index: int) -> str:
        x = (self.x_mask >> index) & 1
        z = (self.z_mask >> index) & 1
        return ("I", "X", "Z", "Y")[x + 2 * z]

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0


@dataclass(frozen=True)
class MeasurementSetting:
    """What happens at the terminal measurement.

    ``z``: plain Z-basis readout of all data qubits.
    ``parity``: every data qubit rotated by the same angle phi, then the
    +/-1 product observable is read out.
    ``stab``: like parity but per-qubit angles 0 or pi/2; ``y_mask`` marks
    (by data position, ascending qubit id) the pi/2 qubits.
    """

    kind: str
    phi: float = 0.0
    y_mask: int = 0

    def __post_init__(self):
        if self.kind not in ("z", "parity", "stab"):
            raise ValueError(f"unknown setting kind {self.kind!r}")
        if not math.isfinite(self.phi):
            raise ValueError("phi must be finite")

    def serialize(self) -> str:
        if self.kind == "z":
            return "z"
        if self.kind == "parity":
            return f"parity:{self.phi!r}"
        return f"stab:{self.y_mask:x}"

    @staticmethod
    def parse(text: str) -> "MeasurementSetting":
        if text == "z":
            return MeasurementSetting("z")
        kind, _, arg = text.partition(":")
        if kind == "parity":
            return MeasurementSetting("parity", phi=float(arg))
        if kind == "stab":
            return MeasurementSetting("stab", y_mask=int(arg, 16))
        raise ValueError(f"unparseable setting {text!r}")


def _mask_to_words(mask: int, n_words: int) -> np.ndarray:
    words = np.zeros(n_words, dtype=np.uint64)
    for w in range(n_words):
        words[w] = (mask >> (64 * w)) & rng.MASK64
    return words


class FramePlan:
    """Precomputed fault sites and final-frame effects for one circuit.

    Site order (fixing the draw schedule): layers in time order; within a
    layer the two-qubit gate faults in gate-list order, then per-qubit
    idle faults in ascending dense-index order, dephasing before
    relaxation.  Sites with zero probability are omitted.
    """

    def __init__(self, c: Circuit, nm: NoiseModel, graph: HardwareGraph | None = None):
        self.circuit = c
        self.noise = nm
        self.n_qubits = c.n_qubits
        self.n_words = max(1, (c.n_qubits + 63) // 64)
        L = c.n_wire_layers

        # Backward sweep: eff_x[t][qi] is the final x-mask of an X injected
        # on dense qubit qi right after layer t (Z effects likewise; CNOTs
        # never mix the two).
        n = c.n_qubits
        fx = [1 << i for i in range(n)]
        fz = [1 << i for i in range(n)]
        eff_x: list[list[int]] = [None] * L
        eff_z: list[list[int]] = [None] * L
        for t in range(L - 1, -1, -1):
            eff_x[t] = list(fx)
            eff_z[t] = list(fz)
            for g in c.layers[t]:
                if g.kind in CNOT_KINDS:
                    ci = c.qubit_index[g.control]
                    ti = c.qubit_index[g.target]
                    fx[ci] ^= fx[ti]
                    fz[ti] ^= fz[ci]
        self._eff_x = eff_x
        self._eff_z = eff_z

        site_p: list[float] = []
        site_kind: list[int] = []
        site_tab: list[int] = []
        fixed_rows: list[tuple[int, int]] = []
        gate_rows: list[list[tuple[int, int]]] = []
        self.site_info: list[tuple] = []  # ("gate",t,c,tg) | ("idle_z"|"idle_x"|"ground_x",t,q)

        def component(code: int, qi: int, t: int) -> tuple[int, int]:
            if code == 0:
                return 0, 0
            if code == 1:
                return eff_x[t][qi], 0
            if code == 2:
                return eff_x[t][qi], eff_z[t][qi]
            return 0, eff_z[t][qi]

        for t in range(L):
            gated: set[int] = set()
            for g in c.layers[t]:
                if g.kind not in CNOT_KINDS:
                    continue
                ci = c.qubit_index[g.control]
                ti = c.qubit_index[g.target]
                gated.update((ci, ti))
                rate = nm.gate_rate(graph, g.control, g.target)
                if rate <= 0.0:
                    continue
                rows = []
                for k in range(15):
                    p1, p2 = (k + 1) >> 2, (k + 1) & 3
                    x1, z1 = component(p1, ci, t)
                    x2, z2 = component(p2, ti, t)
                    rows.append((x1 ^ x2, z1 ^ z2))
                site_p.append(rate)
                site_kind.append(1)
                site_tab.append(len(gate_rows))
                gate_rows.append(rows)
                self.site_info.append(("gate", t, g.control, g.target))
            for qi, q in enumerate(c.qubits):
                if qi in gated:
                    continue
                if c.is_eligible(q, t):
                    pz = nm.dephasing_rate(graph, q)
                    px = nm.relaxation_rate(graph, q)
                    x_tag = "idle_x"
                elif c.in_ground_span(q, t) and nm.ground_residual > 0.0:
                    pz, px = 0.0, nm.ground_residual
                    x_tag = "ground_x"
                else:
                    continue
                if pz > 0.0:
                    site_p.append(pz)
                    site_kind.append(0)
                    site_tab.append(len(fixed_rows))
                    fixed_rows.append((0, eff_z[t][qi]))
                    self.site_info.append(("idle_z", t, q))
                if px > 0.0:
                    site_p.append(px)
                    site_kind.append(0)
                    site_tab.append(len(fixed_rows))
                    fixed_rows.append((eff_x[t][qi], 0))
                    self.site_info.append((x_tag, t, q))

        W = self.n_words
        self.site_p = np.asarray(site_p, dtype=np.float64)
        self.site_kind = np.asarray(site_kind, dtype=np.int8)
        self.site_tab = np.asarray(site_tab, dtype=np.int32)
        self.fixed_eff = np.zeros((max(1, len(fixed_rows)), 2, W), dtype=np.uint64)
        for i, (x, z) in enumerate(fixed_rows):
            self.fixed_eff[i, 0] = _mask_to_words(x, W)
            self.fixed_eff[i, 1] = _mask_to_words(z, W)
        self.gate_eff = np.zeros((max(1, len(gate_rows)), 15, 2, W), dtype=np.uint64)
        for i, rows in enumerate(gate_rows):
            for k, (x, z) in enumerate(rows):
                self.gate_eff[i, k, 0] = _mask_to_words(x, W)
                self.gate_eff[i, k, 1] = _mask_to_words(z, W)
        self.n_sites = len(site_p)

        # Measurement metadata.
        self.data_positions = [c.qubit_index[q] for q in c.data_qubits]
        self.anc_positions = [c.qubit_index[a] for a in c.ancillas]
        data_mask = 0
        for i in self.data_positions:
            data_mask |= 1 << i
        self.data_mask = data_mask
        self.data_mask_words = _mask_to_words(data_mask, W)
        self.data_eps = np.array(
            [nm.readout_rate(graph, q) for q in c.data_qubits], dtype=np.float64
        )
        self.anc_eps = np.array(
            [nm.readout_rate(graph, a) for a in c.ancillas], dtype=np.float64
        )
        prod = float(np.prod(1.0 - 2.0 * self.data_eps)) if len(self.data_eps) else 1.0
        self.parity_flip_p = 0.5 * (1.0 - prod)

    # -- effect lookups (tests and analytics) -------------------------------

    def final_effect(self, q: int, t: int, pauli: str) -> PauliFrame:
        """Final frame of a single Pauli injected after layer t on qubit q."""
        qi = self.circuit.qubit_index[q]
        x = self._eff_x[t][qi]
        z = self._eff_z[t][qi]
        if pauli == "X":
            return PauliFrame(x, 0)
        if pauli == "Z":
            return PauliFrame(0, z)
        if pauli == "Y":
            return PauliFrame(x, z)
        raise ValueError(f"unknown pauli {pauli!r}")

    def _anc_mask(self) -> int:
        m = 0
        for i in self.anc_positions:
            m |= 1 << i
        return m

    def first_order_reject_rate(self) -> float:
        """Leading-order probability that a shot trips any syndrome."""
        anc = self._anc_mask()
        total = 0.0
        for s in range(self.n_sites):
            p = float(self.site_p[s])
            if self.site_kind[s] == 0:
                x = int(self.fixed_eff[self.site_tab[s], 0, 0])
                x_full = self._words_to_mask(self.fixed_eff[self.site_tab[s], 0])
                total += p if (x_full & anc) else 0.0
            else:
                rows = self.gate_eff[self.site_tab[s]]
                flips = sum(
                    1 for k in range(15) if self._words_to_mask(rows[k, 0]) & anc
                )
                total += p * flips / 15.0
        return total

    def first_order_syndrome_rates(self) -> np.ndarray:
        """Leading-order per-check syndrome rates."""
        rates = np.zeros(len(self.anc_positions))
        for ci, pos in enumerate(self.anc_positions):
            bit = 1 << pos
            total = 0.0
            for s in range(self.n_sites):
                p = float(self.site_p[s])
                if self.site_kind[s] == 0:
                    if self._words_to_mask(self.fixed_eff[self.site_tab[s], 0]) & bit:
                        total += p
                else:
                    rows = self.gate_eff[self.site_tab[s]]
                    flips = sum(
                        1 for k in range(15) if self._words_to_mask(rows[k, 0]) & bit
                    )
                    total += p * flips / 15.0
            rates[ci] = total
        return rates

    @staticmethod
    def _words_to_mask(words: np.ndarray) -> int:
        mask = 0
        for w, word in enumerate(words):
            mask |= int(word) << (64 * w)
        return mask

    # -- sampling ------------------------------------------------------------

    def sample_one(self, shot_key: int, trace: list | None = None) -> PauliFrame:
        """Reference scalar sampler (the contract both kernels implement)."""
        x_acc = 0
        z_acc = 0
        for s in range(self.n_sites):
            u = rng.unit(shot_key, s)
            p = float(self.site_p[s])
            if u >= p:
                continue
            if self.site_kind[s] == 0:
                k = -1
                row = self.fixed_eff[self.site_tab[s]]
            else:
                k = min(14, int((u / p) * 15.0))
                row = self.gate_eff[self.site_tab[s], k]
            x_acc ^= self._words_to_mask(row[0])
            z_acc ^= self._words_to_mask(row[1])
            if trace is not None:
                trace.append((s, k))
        return PauliFrame(x_acc, z_acc)

    def sample_frames(
        self,
        setting_key: int,
        n_shots: int,
        backend: str = "auto",
        threads: int = 1,
        shot0: int = 0,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Frames for shots [shot0, shot0 + n_shots) as packed word arrays."""
        impl = resolve_backend(backend)
        out_x = np.zeros((n_shots, self.n_words), dtype=np.uint64)
        out_z = np.zeros((n_shots, self.n_words), dtype=np.uint64)
        args = (self.site_p, self.site_kind, self.site_tab, self.fixed_eff, self.gate_eff)
        if threads <= 1 or n_shots < 2 * threads:
            impl.sample_block(setting_key, shot0, *args, out_x, out_z)
            return out_x, out_z
        bounds = [
            (shot0 + (n_shots * k) // threads, shot0 + (n_shots * (k + 1)) // threads)
            for k in range(threads)
        ]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futures = [
                ex.submit(
                    impl.sample_block,
                    setting_key,
                    lo,
                    *args,
                    out_x[lo - shot0 : hi - shot0],
                    out_z[lo - shot0 : hi - shot0],
                )
                for lo, hi in bounds
                if hi > lo
            ]
            for f in futures:
                f.result()
        return out_x, out_z


def resolve_backend(name: str):
    if name == "auto":
        return _compiled if COMPILED_AVAILABLE else _numpy_kernel
    if name == "compiled":
        if not COMPILED_AVAILABLE:
            raise RuntimeError("compiled kernel not available")
        return _compiled
    if name == "numpy":
        return _numpy_kernel
    raise ValueError(f"unknown backend {name!r}")


# -- public single-shot operations ------------------------------------------


def sample_frame(
    c: Circuit, nm: NoiseModel, shot_key: int, graph: HardwareGraph | None = None
) -> PauliFrame:
    """One noisy execution's final Pauli frame."""
    return FramePlan(c, nm, graph).sample_one(shot_key)


def check_syndromes(frame: PauliFrame, c: Circuit) -> tuple[int, ...]:
    """Ideal (readout-noise-free) syndrome bits, ascending ancilla order.

    A check fires exactly when the frame carries an X component on its
    ancilla at measurement time.
    """
    return tuple((frame.x_mask >> c.qubit_index[a]) & 1 for a in c.ancillas)


def frame_parity_expectation(
    frame: PauliFrame, setting: MeasurementSetting, plan: FramePlan
) -> float:
    """Exact <observable> on (frame applied to the ideal GHZ state).

    Per data qubit the frame Pauli maps the measurement angle phi to
    itself (I), -phi (X), pi - phi (Y) or pi + phi (Z); the GHZ fringe is
    the cosine of the summed angles.
    """
    n = len(plan.data_positions)
    wtx = wtz = wtxa = 0
    for d, pos in enumerate(plan.data_positions):
        x = (frame.x_mask >> pos) & 1
        z = (frame.z_mask >> pos) & 1
        wtx += x
        wtz += z
        if (setting.y_mask >> d) & 1:
            wtxa += x
    if setting.kind == "parity":
        return (-1.0) ** wtz * math.cos(setting.phi * (n - 2 * wtx))
    if setting.kind == "stab":
        a = bin(setting.y_mask).count("1")
        return float((-1) ** ((a // 2 - wtxa + wtz) % 2))
    raise ValueError("expectation is defined for parity/stab settings")


def sample_data_outcome(
    frame: PauliFrame,
    setting: MeasurementSetting,
    plan: FramePlan,
    shot_key: int,
):
    """Sample one shot's data outcome for a frame (reference scalar path).

    Z basis: returns the data bitstring as an int (bit d = data qubit d in
    ascending-id order), including readout flips.  Parity/stab: returns
    +/-1, sampled from the exact expectation then sign-flipped with the
    aggregated readout probability.
    """
    S = plan.n_sites
    base = S + len(plan.anc_positions)
    if setting.kind == "z":
        branch = 1 if rng.unit(shot_key, base) < 0.5 else 0
        bits = 0
        for d, pos in enumerate(plan.data_positions):
            b = branch ^ ((frame.x_mask >> pos) & 1)
            if rng.unit(shot_key, base + 1 + d) < plan.data_eps[d]:
                b ^= 1
            bits |= b << d
        return bits
    v = frame_parity_expectation(frame, setting, plan)
    outcome = 1 if rng.unit(shot_key, base) < 0.5 * (1.0 + v) else -1
    if rng.unit(shot_key, base + 1) < plan.parity_flip_p:
        outcome = -outcome
    return outcome


# -- batched runs -------------------------------------------------------------


@dataclass
class SettingRun:
    """All shots of one measurement setting."""

    setting: MeasurementSetting
    syndromes: np.ndarray  # uint64, bit k = check k fired (after readout noise)
    accepted: np.ndarray  # bool
    bit_words: np.ndarray | None = None  # z basis: packed data bits (n, Wd)
    outcomes: np.ndarray | None = None  # parity/stab: +/-1 int8

    @property
    def n_shots(self) -> int:
        return len(self.syndromes)

    @property
    def n_accepted(self) -> int:
        return int(self.accepted.sum())

    def bitstring_int(self, shot: int) -> int:
        mask = 0
        for w in range(self.bit_words.shape[1]):
            mask |= int(self.bit_words[shot, w]) << (64 * w)
        return mask


@dataclass
class ShotData:
    runs: list[SettingRun]
    shots_per_setting: int
    n_data: int
    n_checks: int

    @property
    def retention(self) -> float:
        total = sum(r.n_shots for r in self.runs)
        acc = sum(r.n_accepted for r in self.runs)
        return acc / total if total else 1.0

    def run_for(self, setting: MeasurementSetting) -> SettingRun:
        key = setting.serialize()
        for r in self.runs:
            if r.setting.serialize() == key:
                return r
        raise KeyError(f"no shots for setting {key}")


def _shot_unit_column(setting_key: int, n_shots: int, draw_index: int) -> np.ndarray:
    """unit(derive(setting_key, i), draw_index) for i in [0, n_shots)."""
    keys = rng.raw_array(setting_key, 0, n_shots)
    g = np.uint64(((draw_index + 1) * rng.GOLDEN) & rng.MASK64)
    return (rng.mix64_array(keys + g) >> np.uint64(11)) * 2.0**-53


def run_shots(
    c: Circuit,
    nm: NoiseModel,
    settings: list[MeasurementSetting],
    shots: int,
    seed: int,
    graph: HardwareGraph | None = None,
    threads: int = 1,
    backend: str = "auto",
) -> ShotData:
    """Independent shots per setting; retention pooled over settings.

    Fully deterministic given (circuit, noise, settings, seed): the shot
    substream key is derive(derive(seed, SIMULATE), setting string), so
    neither thread count nor backend changes any output bit.
    """
    plan = FramePlan(c, nm, graph)
    sim_key = rng.derive(seed, rng.STREAM_SIMULATE)
    S = plan.n_sites
    A = len(plan.anc_positions)
    runs: list[SettingRun] = []
    n_data = len(plan.data_positions)
    Wd = max(1, (n_data + 63) // 64)
    for setting in settings:
        skey = rng.derive_string(sim_key, setting.serialize())
        x_words, z_words = plan.sample_frames(skey, shots, backend=backend, threads=threads)

        syn = np.zeros(shots, dtype=np.uint64)
        for k, pos in enumerate(plan.anc_positions):
            w, b = divmod(pos, 64)
            bit = (x_words[:, w] >> np.uint64(b)) & np.uint64(1)
            if plan.anc_eps[k] > 0.0:
                flips = _shot_unit_column(skey, shots, S + k) < plan.anc_eps[k]
                bit = bit ^ flips.astype(np.uint64)
            syn |= bit << np.uint64(k)
        accepted = syn == 0

        base = S + A
        if setting.kind == "z":
            branch = (_shot_unit_column(skey, shots, base) < 0.5).astype(np.uint64)
            bits = np.zeros((shots, Wd), dtype=np.uint64)
            for d, pos in enumerate(plan.data_positions):
                w, b = divmod(pos, 64)
                val = ((x_words[:, w] >> np.uint64(b)) & np.uint64(1)) ^ branch
                if plan.data_eps[d] > 0.0:
                    flips = _shot_unit_column(skey, shots, base + 1 + d) < plan.data_eps[d]
                    val = val ^ flips.astype(np.uint64)
                wd, bd = divmod(d, 64)
                bits[:, wd] |= val << np.uint64(bd)
            runs.append(SettingRun(setting, syn, accepted, bit_words=bits))
        else:
            wtx = _masked_popcount(x_words, plan.data_mask_words)
            wtz = _masked_popcount(z_words, plan.data_mask_words)
            if setting.kind == "parity":
                v = np.where(wtz % 2 == 0, 1.0, -1.0) * np.cos(
                    setting.phi * (n_data - 2.0 * wtx)
                )
            else:
                a_mask = 0
                for d, pos in enumerate(plan.data_positions):
                    if (setting.y_mask >> d) & 1:
                        a_mask |= 1 << pos
                a_words = _mask_to_words(a_mask, plan.n_words)
                wtxa = _masked_popcount(x_words, a_words)
                half = bin(setting.y_mask).count("1") // 2
                v = np.where((half - wtxa + wtz) % 2 == 0, 1.0, -1.0)
            u = _shot_unit_column(skey, shots, base)
            outcome = np.where(u < 0.5 * (1.0 + v), 1, -1).astype(np.int8)
            if plan.parity_flip_p > 0.0:
                flip = _shot_unit_column(skey, shots, base + 1) < plan.parity_flip_p
                outcome = np.where(flip, -outcome, outcome).astype(np.int8)
            runs.append(SettingRun(setting, syn, accepted, outcomes=outcome))
    return ShotData(runs=runs, shots_per_setting=shots, n_data=n_data, n_checks=A)


def _masked_popcount(words: np.ndarray, mask_words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words & mask_words[None, :]).sum(axis=1).astype(np.int64)


# -- shot record serialization -------------------------------------------------


def iter_shot_records(data: ShotData):
    """Yield per-shot dicts in (setting order, shot order)."""
    for r in data.runs:
        name = r.setting.serialize()
        for i in range(r.n_shots):
            if r.bit_words is not None:
                bits = r.bitstring_int(i)
                payload = format(bits, f"0{data.n_data}b")[::-1]  # bit d first
            else:
                payload = int(r.outcomes[i])
            yield {
                "setting": name,
                "syndromes": format(int(r.syndromes[i]), "x"),
                "data": payload,
                "accepted": bool(r.accepted[i]),
            }


def write_shot_records(data: ShotData, fh) -> dict:
    total = 0
    accepted = 0
    for rec in iter_shot_records(data):
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
        total += 1
        accepted += 1 if rec["accepted"] else 0
    return {"retention": accepted / total if total else 1.0, "shots": total, "accepted": accepted}


def read_shot_records(lines) -> list[dict]:
    return [json.loads(line) for line in lines if line.strip()]
