import math

import numpy as np
import pytest

from conftest import bell_circuit
from ghzforge.circuit import Circuit, Gate
from ghzforge.statevector import (
    StateVector,
    basis_rotation_matrix,
    check_flip,
    ghz_state,
    random_state,
    simulate_circuit,
)


def test_bell_preparation():
    sv = simulate_circuit(bell_circuit())
    expect = np.zeros(4, dtype=complex)
    expect[0] = expect[3] = 1 / math.sqrt(2)
    assert np.allclose(sv.amps, expect)


def test_rotation_measures_m_phi():
    # Measuring Z after the basis rotation is the same as measuring
    # cos(phi) X + sin(phi) Y before it.
    for phi in (0.0, 0.4, 1.1, math.pi / 2, 2.9):
        sv = random_state(1, seed=int(phi * 100))
        direct = sv.expectation_m_phi([0], [phi])
        rotated = sv.copy()
        rotated.apply_rotation(0, phi)
        z_after = 1.0 - 2.0 * rotated.prob_one(0)
        assert abs(direct - z_after) < 1e-12


def test_rotation_matrix_is_unitary():
    m = basis_rotation_matrix(0.7)
    assert np.allclose(m @ m.conj().T, np.eye(2))


def test_ghz_fringe_cos_n_phi():
    sv = ghz_state(4)
    for phi in np.linspace(0, math.pi, 20):
        val = sv.expectation_m_phi(range(4), [phi] * 4)
        assert abs(val - math.cos(4 * phi)) < 1e-10


def test_fault_injection_flips_bell_check():
    c = bell_circuit(check_ancilla=True)
    assert check_flip(c, 2, (1, 0, "X")) is True  # X on control after CX
    assert check_flip(c, 2, (0, 0, "X")) is False  # X on |+> before CX
    assert check_flip(c, 2, (1, 1, "Z")) is False  # Z never flips
    assert check_flip(c, 2, (2, 1, "X")) is True  # X between the check legs


def test_size_cap():
    with pytest.raises(ValueError, match="capped"):
        StateVector(15)


def test_expectation_pauli_string():
    sv = ghz_state(3)
    assert abs(sv.expectation_pauli_string({0: "Z", 1: "Z"}) - 1.0) < 1e-12
    assert abs(sv.expectation_pauli_string({0: "X", 1: "X", 2: "X"}) - 1.0) < 1e-12
    assert abs(sv.expectation_pauli_string({0: "Z"})) < 1e-12


def test_injection_timing_convention():
    # X injected after layer 0 (on |+>) leaves the Bell state unchanged;
    # X after layer 1 flips one arm.
    c = bell_circuit()
    sv_pre = simulate_circuit(c, inject=[(0, 0, "X")])
    assert abs(abs(sv_pre.overlap(simulate_circuit(c))) - 1.0) < 1e-12
    sv_post = simulate_circuit(c, inject=[(1, 0, "X")])
    probs = sv_post.probabilities()
    assert abs(probs[1] - 0.5) < 1e-12 and abs(probs[2] - 0.5) < 1e-12
