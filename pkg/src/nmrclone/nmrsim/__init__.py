"""Pulse-level NMR simulation of the three-spin cloning experiment."""
from .system import SpinSystem, SystemConfigError, default_system, load_system, parse_system, format_system
from .sequences import (
    Crush,
    Delay,
    Gradient,
    HardPulse,
    JumpReturn90,
    Sequence,
    SequenceFormatError,
    ZFilter,
    ZRotation,
    cloning_sequence,
    delays,
    echo_sequence,
    format_sequence,
    gradient_ratio,
    input_pulse,
    load_sequence,
    parse_sequence,
    purification_sequence,
)
from .engine import (
    Ensemble,
    RunOptions,
    SequenceError,
    crush,
    free_evolution,
    gradient,
    hard_pulse,
    jump_return_90,
    op,
    purification,
    relax,
    run_ensemble,
    run_sequence,
    selective_error,
    target_pseudopure,
    thermal_deviation,
    z_filter,
)
