"""Push gates, cluster sweeps and heralded links for ion Coulomb crystals."""

from .crystal import IonCrystal, TrapConfig, equilibrium, minimize
from .errors import (
    ConfigError,
    ConvergenceError,
    CrystalGateError,
    DegenerateInputError,
    InstabilityError,
    PreconditionError,
    ResonanceError,
    TruncationError,
)
from .gatesim import GatePulse, GateResult, LaserParams, gate_fidelity
from .phonons import PhononModes, ThermalState, modes_for, normal_modes, thermal_occupation

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "CrystalGateError",
    "DegenerateInputError",
    "GatePulse",
    "GateResult",
    "InstabilityError",
    "IonCrystal",
    "LaserParams",
    "PhononModes",
    "PreconditionError",
    "ResonanceError",
    "ThermalState",
    "TrapConfig",
    "TruncationError",
    "equilibrium",
    "gate_fidelity",
    "minimize",
    "modes_for",
    "normal_modes",
    "thermal_occupation",
]
