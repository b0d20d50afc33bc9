"""Photonic band structure and storage efficiency of quantum memories in
periodically modulated atomic ensembles."""

from .scenario import (
    CellGrid,
    DerivedParams,
    Modulation,
    Scenario,
    build_cell,
    derive_params,
    modulation,
    potential,
)

__all__ = [
    "CellGrid",
    "DerivedParams",
    "Modulation",
    "Scenario",
    "build_cell",
    "derive_params",
    "modulation",
    "potential",
]

__version__ = "0.1.0"
