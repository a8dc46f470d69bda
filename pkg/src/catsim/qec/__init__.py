"""Repetition-code layer: fault circuits, Pauli-frame simulation and decoding."""

from .circuit import (
    CNOT_KEYS,
    GADGETS,
    TOFFOLI_KEYS,
    FaultCircuit,
    Location,
    QECStage,
    RepCodeParams,
    build_qec_round,
    cnot_gadget,
    hadamard_gadget,
    logical_gadget,
    measure_xl_gadget,
    memory_circuit,
    prep_plus_gadget,
    toffoli_gadget,
)
from .decoder import CachedDecoder, detection_events, majority_decode, mwpm_decode
from .rates import (
    LogicalRate,
    ScalingFit,
    below_threshold_fit,
    first_order_x_rate,
    hadamard_gadget_logical_check,
    iid_memory_rate,
    logical_cnot_check,
    logical_error_rate,
    logical_toffoli_check,
    minimum_failing_faults,
    rates_to_csv,
    single_fault_failures,
    truncated_enumeration,
)
from .simulate import PauliFrame, ShotResult, propagate, run_branches, sample

SyndromeHistory = list
