"""Noise model: gate faults, idle faults, readout flips.

Two-qubit gates emit, with some probability, a uniformly random
non-identity two-qubit Pauli on their operands.  Idle (gate-free) eligible
locations suffer independent Z (dephasing) and X (relaxation) faults per
layer.  Measured bits flip classically with a per-qubit probability.

Global rates override the per-element rates carried by the hardware
graph when set; ``None`` means "use the graph's numbers".  Dynamical
decoupling is modeled as a multiplicative suppression of idle dephasing.
"""

from __future__ import annotations

from dataclasses import dataclass

from .hwgraph import HardwareGraph


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


@dataclass
class NoiseModel:
    cnot_error: float | None = None
    idle_dephasing: float | None = None
    idle_relaxation: float | None = None
    readout_flip: float | None = None
    dd_enabled: bool = False
    dd_residual: float = 0.05
    ground_residual: float = 0.0
    scale: float = 1.0
    twirl_readout: bool = False

    def __post_init__(self):
        for name in ("cnot_error", "idle_dephasing", "idle_relaxation", "readout_flip"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.scale < 0:
            raise ValueError("scale must be >= 0")
        if not 0.0 <= self.dd_residual <= 1.0:
            raise ValueError("dd_residual must be in [0, 1]")
        if not 0.0 <= self.ground_residual <= 1.0:
            raise ValueError("ground_residual must be in [0, 1]")

    @staticmethod
    def zero() -> "NoiseModel":
        return NoiseModel(cnot_error=0.0, idle_dephasing=0.0, idle_relaxation=0.0, readout_flip=0.0)

    # -- per-element resolution -------------------------------------------

    def gate_rate(self, graph: HardwareGraph | None, a: int, b: int) -> float:
        if self.cnot_error is not None:
            return _clip01(self.cnot_error * self.scale)
        if graph is None:
            return 0.0
        try:
            err = graph.gate_error(a, b)
        except KeyError:
            err = 0.0
        return _clip01(err * self.scale)

    def dephasing_rate(self, graph: HardwareGraph | None, q: int) -> float:
        if self.idle_dephasing is not None:
            rate = self.idle_dephasing
        elif graph is not None and q in graph.qubits:
            rate = graph.qubits[q].idle_dephasing
        else:
            rate = 0.0
        if self.dd_enabled:
            rate *= self.dd_residual
        return _clip01(rate * self.scale)

    def relaxation_rate(self, graph: HardwareGraph | None, q: int) -> float:
        if self.idle_relaxation is not None:
            rate = self.idle_relaxation
        elif graph is not None and q in graph.qubits:
            rate = graph.qubits[q].idle_relaxation
        else:
            rate = 0.0
        return _clip01(rate * self.scale)

    def readout_rate(self, graph: HardwareGraph | None, q: int) -> float:
        if self.readout_flip is not None:
            return _clip01(self.readout_flip * self.scale)
        if graph is not None and q in graph.qubits:
            return _clip01(graph.qubits[q].readout_error * self.scale)
        return 0.0

    def to_dict(self) -> dict:
        return {
            "cnot_error": self.cnot_error,
            "idle_dephasing": self.idle_dephasing,
            "idle_relaxation": self.idle_relaxation,
            "readout_flip": self.readout_flip,
            "dd_enabled": self.dd_enabled,
            "dd_residual": self.dd_residual,
            "ground_residual": self.ground_residual,
            "scale": self.scale,
            "twirl_readout": self.twirl_readout,
        }

    @staticmethod
    def from_dict(data: dict) -> "NoiseModel":
        return NoiseModel(**{k: data[k] for k in data})
