"""Subwavelength resonances and scattering in time-modulated 1D resonator arrays."""
from __future__ import annotations

from .energy import ModeScatteringTable, energy_sweep, mode_table
from .model import (
    ConfigError,
    IncidentSpec,
    PhysicalParams,
    ResonatorArray,
    SimulationConfig,
    Truncation,
    build_config,
    load_config,
    paper_config,
    uniform_array,
)
from .modulation import ModulationEntry, ModulationProfile
from .quasifreq import (
    capacitance_matrix,
    closed_form_single,
    det_root_quasifrequencies,
    floquet_quasifrequencies,
)
from .scattering import evaluate_field, pole_pencil, scattered_field_approx, solve

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "IncidentSpec",
    "ModeScatteringTable",
    "ModulationEntry",
    "ModulationProfile",
    "PhysicalParams",
    "ResonatorArray",
    "SimulationConfig",
    "Truncation",
    "build_config",
    "capacitance_matrix",
    "closed_form_single",
    "det_root_quasifrequencies",
    "energy_sweep",
    "evaluate_field",
    "floquet_quasifrequencies",
    "load_config",
    "mode_table",
    "paper_config",
    "pole_pencil",
    "scattered_field_approx",
    "solve",
    "uniform_array",
]
