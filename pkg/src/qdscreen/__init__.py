"""Screening engine for optically active point defects in silicon.

Raw defect records go in; ranked spin-photon-interface candidates come out,
together with formation-energy diagrams, optical transition properties,
bound-exciton stability and phonon-sideband spectra.
"""

from .constants import CONSTANTS, UnitConstants, convert_dipole
from .pipeline import ElementSpec, ScreeningReport, TierConfig, emit_report, enumerate_candidates, run_screen
from .records import ChemPotSet, DefectRecord, EnergyLevelSet, HostSpec, PlaneWaveState, parse_record, serialize_record
from .store import DefectStore

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS",
    "ChemPotSet",
    "DefectRecord",
    "DefectStore",
    "ElementSpec",
    "EnergyLevelSet",
    "HostSpec",
    "PlaneWaveState",
    "ScreeningReport",
    "TierConfig",
    "UnitConstants",
    "convert_dipole",
    "emit_report",
    "enumerate_candidates",
    "parse_record",
    "run_screen",
    "serialize_record",
]
