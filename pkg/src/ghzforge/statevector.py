"""Dense statevector simulation for small-circuit validation.

This is the slow, obviously-correct oracle the fast Pauli-frame machinery
is tested against: exact final states, exact check-flip behavior under
injected faults, and exact expectation values of the rotated-basis parity
observables.  Capped at 14 qubits.
"""

from __future__ import annotations

import math

import numpy as np

from .circuit import (
    GATE_CX,
    GATE_H,
    GATE_KCX,
    GATE_MZ,
    GATE_RCX,
    GATE_ROT,
    GATE_UCX,
    Circuit,
)

MAX_QUBITS = 14

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_PAULI = {"I": np.eye(2, dtype=np.complex128), "X": _X, "Y": _Y, "Z": _Z}


def basis_rotation_matrix(phi: float) -> np.ndarray:
    """Rz(-phi) followed by Ry(-pi/2); conjugates Z to cos(phi)X + sin(phi)Y."""
    s = 1.0 / math.sqrt(2.0)
    ep = np.exp(0.5j * phi)
    em = np.exp(-0.5j * phi)
    return np.array([[s * ep, s * em], [-s * ep, s * em]], dtype=np.complex128)


class StateVector:
    """Amplitudes over n qubits; basis index bit q is qubit q's value."""

    def __init__(self, n_qubits: int):
        if n_qubits > MAX_QUBITS:
            raise ValueError(f"statevector oracle capped at {MAX_QUBITS} qubits")
        self.n = n_qubits
        self.amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        self.amps[0] = 1.0

    def copy(self) -> "StateVector":
        sv = StateVector.__new__(StateVector)
        sv.n = self.n
        sv.amps = self.amps.copy()
        return sv

    def apply_1q(self, q: int, m: np.ndarray):
        a = self.amps.reshape(-1, 2, 1 << q)
        a0 = a[:, 0, :].copy()
        a1 = a[:, 1, :].copy()
        a[:, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
        a[:, 1, :] = m[1, 0] * a0 + m[1, 1] * a1

    def apply_h(self, q: int):
        self.apply_1q(q, _H)

    def apply_pauli(self, q: int, p: str):
        self.apply_1q(q, _PAULI[p])

    def apply_rotation(self, q: int, phi: float):
        self.apply_1q(q, basis_rotation_matrix(phi))

    def apply_cx(self, control: int, target: int):
        idx = np.arange(self.amps.size)
        src = ((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)
        i0 = idx[src]
        i1 = i0 | (1 << target)
        self.amps[i0], self.amps[i1] = self.amps[i1].copy(), self.amps[i0].copy()

    # -- readouts ----------------------------------------------------------

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def prob_one(self, q: int) -> float:
        p = self.probabilities()
        idx = np.arange(p.size)
        return float(p[(idx >> q) & 1 == 1].sum())

    def expectation_pauli_string(self, paulis: dict[int, str]) -> float:
        sv = self.copy()
        for q, p in paulis.items():
            if p != "I":
                sv.apply_1q(q, _PAULI[p])
        return float(np.real(np.vdot(self.amps, sv.amps)))

    def expectation_m_phi(self, qubits: list[int], phis) -> float:
        """<prod_j cos(phi_j) X_j + sin(phi_j) Y_j> over the given qubits."""
        sv = self.copy()
        for q, phi in zip(qubits, phis):
            m = math.cos(phi) * _X + math.sin(phi) * _Y
            sv.apply_1q(q, m)
        return float(np.real(np.vdot(self.amps, sv.amps)))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(other.amps, self.amps))


def ghz_state(n: int) -> StateVector:
    sv = StateVector(n)
    sv.amps[:] = 0
    sv.amps[0] = sv.amps[-1] = 1.0 / math.sqrt(2.0)
    return sv


def random_state(n: int, seed: int) -> StateVector:
    r = np.random.default_rng(seed)
    sv = StateVector(n)
    v = r.normal(size=1 << n) + 1j * r.normal(size=1 << n)
    sv.amps = (v / np.linalg.norm(v)).astype(np.complex128)
    return sv


def simulate_circuit(
    c: Circuit,
    inject: list[tuple[int, int, str]] = (),
    rotation_phis: dict[int, float] | None = None,
) -> StateVector:
    """Exact final state of a circuit with optional injected faults.

    ``inject`` lists (layer, qubit, pauli) faults applied after that
    layer's gates — the same spacetime convention the frame simulator and
    detecting regions use.  ``rotation_phis`` appends terminal basis
    rotations (qubit -> phi) after the last layer.
    """
    if c.n_qubits > MAX_QUBITS:
        raise ValueError(f"statevector oracle capped at {MAX_QUBITS} qubits")
    by_layer: dict[int, list[tuple[int, str]]] = {}
    for t, q, p in inject:
        by_layer.setdefault(t, []).append((q, p))
    sv = StateVector(c.n_qubits)
    qi = c.qubit_index
    for t, layer in enumerate(c.layers):
        for g in layer:
            if g.kind == GATE_H:
                sv.apply_h(qi[g.qubits[0]])
            elif g.kind in (GATE_CX, GATE_UCX, GATE_RCX, GATE_KCX):
                sv.apply_cx(qi[g.control], qi[g.target])
            elif g.kind == GATE_ROT:
                sv.apply_rotation(qi[g.qubits[0]], g.phi)
            elif g.kind == GATE_MZ:
                pass  # terminal; read out via probabilities
        for q, p in by_layer.get(t, ()):
            sv.apply_pauli(qi[q], p)
    if rotation_phis:
        for q, phi in rotation_phis.items():
            sv.apply_rotation(qi[q], phi)
    return sv


def check_flip(c: Circuit, ancilla: int, fault: tuple[int, int, str]) -> bool:
    """Whether a single injected fault deterministically flips the check.

    The ancilla's measured bit under one Pauli fault is always
    deterministic for these circuits; anything in between signals a bug.
    """
    t, q, p = fault
    sv = simulate_circuit(c, inject=[(t, q, p)])
    prob = sv.prob_one(c.qubit_index[ancilla])
    if prob > 1 - 1e-9:
        return True
    if prob < 1e-9:
        return False
    raise AssertionError(f"non-deterministic check outcome {prob} for fault {fault}")
