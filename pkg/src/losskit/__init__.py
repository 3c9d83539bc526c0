"""losskit: simulation of loss-tolerant quantum codes and one-way computation.

The package covers four protocol layers on top of a dense little simulator:
parity/redundancy erasure codes, detected-loss recovery with feedforward,
cluster-state one-way computation under photon loss, and measurement-setting
fidelity estimation with shot noise.
"""

from .qsim import (
    ATOL,
    DensityMatrix,
    NoiseSpec,
    PauliString,
    Seed,
    StateVector,
    apply_channel,
    apply_gate,
    expectation,
    fidelity_pure,
    measure,
    partial_trace,
)
from .codes import CodeParams, LogicalInput, PRESETS, encode, encode_circuit_22, logical_basis, stabilizers
from .recovery import (
    LossPattern,
    RecoveryPlan,
    RecoveryRecord,
    best_effort_plan,
    erase,
    execute_recovery,
    plan_recovery,
    recoverable,
    recovery_sweep,
)
from .cluster import (
    Graph,
    MeasurementPattern,
    OneWayResult,
    PatternStep,
    graph_cluster_state,
    graph_xx_contract,
    graph_z_remove,
    indirect_z,
    loss_tolerant_rotation,
    phi5,
    phi5_graph,
    rotation_target,
    run_pattern,
)
from .tomography import (
    CountsTable,
    PauliDecomposition,
    Setting,
    decompose_projector,
    estimate_fidelity,
    group_settings,
    simulate_counts,
)

__version__ = "0.1.0"

__all__ = [
    "ATOL",
    "CodeParams",
    "CountsTable",
    "DensityMatrix",
    "Graph",
    "LogicalInput",
    "LossPattern",
    "MeasurementPattern",
    "NoiseSpec",
    "OneWayResult",
    "PRESETS",
    "PatternStep",
    "PauliDecomposition",
    "PauliString",
    "RecoveryPlan",
    "RecoveryRecord",
    "Seed",
    "Setting",
    "StateVector",
    "apply_channel",
    "apply_gate",
    "best_effort_plan",
    "decompose_projector",
    "encode",
    "encode_circuit_22",
    "erase",
    "estimate_fidelity",
    "execute_recovery",
    "expectation",
    "fidelity_pure",
    "graph_cluster_state",
    "graph_xx_contract",
    "graph_z_remove",
    "group_settings",
    "indirect_z",
    "logical_basis",
    "loss_tolerant_rotation",
    "measure",
    "partial_trace",
    "phi5",
    "phi5_graph",
    "plan_recovery",
    "recoverable",
    "recovery_sweep",
    "rotation_target",
    "run_pattern",
    "simulate_counts",
    "stabilizers",
]
