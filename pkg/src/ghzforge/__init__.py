"""ghzforge: GHZ-state compilation, noisy simulation and certification.

Compiles GHZ preparation circuits onto arbitrary hardware connectivity
graphs while maximizing error-detection coverage of ancilla parity
checks, simulates noisy executions with an exact Pauli-frame sampler
(compiled kernel with a pure-NumPy fallback), and estimates state
fidelity by direct stabilizer sampling and by parity oscillations.
"""

__version__ = "0.1.0"

from .circuit import Circuit, Gate, build_spacetime_tree, depth_stats, emit_circuit
from .compiler import (
    CompileConfig,
    CompileError,
    CoverageReport,
    ParityCheck,
    allocate_checks,
    back_propagator,
    coverage,
    detecting_region,
    grow_tree,
    insert_uncompute,
    randomized_compile,
)
from .estimation import (
    FidelityEstimate,
    ReadoutCalibration,
    StabilizerLabel,
    chi_uniform_phase,
    combine_fidelity,
    dfe_fidelity,
    fourier_components,
    population,
    sample_stabilizer_uniform,
    tensored_inverse_mitigate,
    trex_mitigate,
    variance_of_mean,
)
from .frames import (
    COMPILED_AVAILABLE,
    FramePlan,
    MeasurementSetting,
    PauliFrame,
    check_syndromes,
    run_shots,
    sample_frame,
)
from .hwgraph import (
    DropoutPolicy,
    EdgeSpec,
    HardwareGraph,
    QubitSpec,
    apply_dropouts,
    eccentricity,
    heavy_hex_graph,
    parse_hardware_graph,
    select_root,
    serialize_hardware_graph,
)
from .noise import NoiseModel
