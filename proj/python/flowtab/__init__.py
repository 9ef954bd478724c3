"""Flow-table usage reduction: traffic models, simulation and analytic evaluation."""

from ._core import (
    ConsistencyError,
    DegenerateError,
    DominanceError,
    Error,
    PacketizeError,
    SchemaError,
    SweepResult,
    TrafficModel,
    UnreachableError,
    ValidationError,
    WeightError,
    analytic,
    check_model,
    generate,
    invert_for_coverage,
    load_model,
    p_eff_avg,
    p_eff_paths,
    p_total,
    packetize,
    parse_model,
    sampled_fraction,
    simulate,
)

__all__ = [
    "ConsistencyError",
    "DegenerateError",
    "DominanceError",
    "Error",
    "PacketizeError",
    "SchemaError",
    "SweepResult",
    "TrafficModel",
    "UnreachableError",
    "ValidationError",
    "WeightError",
    "analytic",
    "check_model",
    "generate",
    "invert_for_coverage",
    "load_model",
    "p_eff_avg",
    "p_eff_paths",
    "p_total",
    "packetize",
    "parse_model",
    "sampled_fraction",
    "simulate",
]
