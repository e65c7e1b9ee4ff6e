"""Standing pulses of a three-component activator-inhibitor system and their Maslov index."""
from __future__ import annotations

from .maslov import MaslovReport, maslov_index
from .model import ModelParams
from .pipeline import PipelineResult, run_pipeline
from .pulse import PulseProfile, solve_pulse
from .singular_limit import singular_limit_report, stability_criterion
from .singular_orbit import JumpSolution, build_singular_orbit, solve_jump_condition
from .spectrum import SpectrumReport, point_spectrum

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "JumpSolution",
    "solve_jump_condition",
    "build_singular_orbit",
    "stability_criterion",
    "singular_limit_report",
    "PulseProfile",
    "solve_pulse",
    "MaslovReport",
    "maslov_index",
    "SpectrumReport",
    "point_spectrum",
    "PipelineResult",
    "run_pipeline",
]
