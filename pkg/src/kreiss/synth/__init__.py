"""Structured controller synthesis by worst-scenario min-max design."""

from .objectives import LoopModel, objective_pieces, objective_value
from .optimizer import OptimizerState, local_step, min_norm_element, minimize_max
from .problem import (
    OBJECTIVES,
    DiskRegion,
    ScenarioRecord,
    ScenarioState,
    SynthesisProblem,
    SynthesisResult,
)
from .scenario import (
    degrade,
    destabilize,
    multimodel_min,
    run_restart,
    scenario_loop,
    verify_family,
)

__all__ = [
    "OBJECTIVES",
    "DiskRegion",
    "ScenarioRecord",
    "ScenarioState",
    "SynthesisProblem",
    "SynthesisResult",
    "LoopModel",
    "objective_pieces",
    "objective_value",
    "OptimizerState",
    "local_step",
    "min_norm_element",
    "minimize_max",
    "multimodel_min",
    "destabilize",
    "degrade",
    "scenario_loop",
    "run_restart",
    "verify_family",
]
