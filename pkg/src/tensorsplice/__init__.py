"""Streaming top-k dense block tracking in sparse N-mode tensors."""

from .blocks import Block, Event, TensorSlice
from .detect import DetectParams, detect_top_blocks, mode_masses, peel_once
from .engine import EngineConfig, EngineState, StepOutput, run_stream, step
from .errors import (
    BadTimestamp,
    ConfigError,
    DegenerateBlock,
    DensityInfeasible,
    MalformedLine,
    NegativeValue,
    NotASubblock,
    OutOfOrderSlice,
    PreconditionViolated,
    ShapeMismatch,
    TensorSpliceError,
    TimeRegression,
)
from .ingest import IngestConfig, ModeDictionary, emit_step_output, parse_tuples
from .splice import (
    CandidateMerge,
    MergeHeap,
    SpliceModesReport,
    empty_q_step,
    enumerate_candidates,
    required_new_modes,
    splice_condition,
    splice_pair,
)
from .synth import (
    EvalReport,
    InjectedTruth,
    InjectionSpec,
    ScalingReport,
    generate_stream,
    rerun_scaling_run,
    scaling_run,
    score,
)

__version__ = "0.1.0"

__all__ = [
    "Block",
    "Event",
    "TensorSlice",
    "DetectParams",
    "detect_top_blocks",
    "mode_masses",
    "peel_once",
    "EngineConfig",
    "EngineState",
    "StepOutput",
    "run_stream",
    "step",
    "IngestConfig",
    "ModeDictionary",
    "emit_step_output",
    "parse_tuples",
    "CandidateMerge",
    "MergeHeap",
    "SpliceModesReport",
    "empty_q_step",
    "enumerate_candidates",
    "required_new_modes",
    "splice_condition",
    "splice_pair",
    "EvalReport",
    "InjectedTruth",
    "InjectionSpec",
    "ScalingReport",
    "generate_stream",
    "rerun_scaling_run",
    "scaling_run",
    "score",
    "TensorSpliceError",
    "ShapeMismatch",
    "DegenerateBlock",
    "NotASubblock",
    "PreconditionViolated",
    "OutOfOrderSlice",
    "TimeRegression",
    "MalformedLine",
    "BadTimestamp",
    "NegativeValue",
    "DensityInfeasible",
    "ConfigError",
]
