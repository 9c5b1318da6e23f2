"""Physical constants and the few unit conversions the pipeline needs.

Values are CODATA-2018 and are pinned here rather than pulled from
``scipy.constants`` so that results do not drift with the installed scipy.
Canonical internal units are eV, Angstrom, amu, Debye and seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class UnitConstants:
    planck_h: float = 6.62607015e-34  # J s
    elementary_charge: float = 1.602176634e-19  # C
    electron_mass: float = 9.1093837015e-31  # kg
    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    speed_of_light: float = 299792458.0  # m/s
    atomic_mass: float = 1.66053906660e-27  # kg

    @property
    def hbar(self) -> float:
        return self.planck_h / (2 * math.pi)

    @property
    def ev_in_joule(self) -> float:
        return self.elementary_charge

    @property
    def debye_in_coulomb_meter(self) -> float:
        # 1 D = 1e-21 / c  C m
        return 1e-21 / self.speed_of_light

    @property
    def coulomb_constant_ev_angstrom(self) -> float:
        """e^2 / (4 pi eps0) in eV Angstrom."""
        return self.elementary_charge / (4 * math.pi * self.vacuum_permittivity) * 1e10

    @property
    def hbar_ev_s(self) -> float:
        return self.hbar / self.elementary_charge

    @property
    def hbar2_over_me(self) -> float:
        """hbar^2 / m_e in eV Angstrom^2."""
        return self.hbar**2 / self.electron_mass / self.elementary_charge * 1e20

    @property
    def hbar2_over_amu(self) -> float:
        """hbar^2 / (amu Angstrom^2) in eV."""
        return self.hbar**2 / (self.atomic_mass * 1e-20) / self.elementary_charge

    @property
    def phonon_mev_factor(self) -> float:
        """hbar * sqrt(eV / (Angstrom^2 amu)) expressed in meV."""
        omega = math.sqrt(self.elementary_charge / (1e-20 * self.atomic_mass))
        return self.hbar_ev_s * omega * 1e3

    @property
    def eangstrom_in_debye(self) -> float:
        return self.elementary_charge * 1e-10 / self.debye_in_coulomb_meter


CONSTANTS = UnitConstants()

_DIPOLE_TO_CM = {
    "e*A": CONSTANTS.elementary_charge * 1e-10,
    "debye": CONSTANTS.debye_in_coulomb_meter,
    "C*m": 1.0,
}
_DIPOLE_ALIASES = {
    "e*a": "e*A",
    "ea": "e*A",
    "e·å": "e*A",
    "eang": "e*A",
    "d": "debye",
    "debye": "debye",
    "c*m": "C*m",
    "cm": "C*m",
    "c·m": "C*m",
}


def _dipole_unit(tag: str) -> str:
    try:
        return _DIPOLE_ALIASES[tag.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown dipole unit {tag!r}") from None


def convert_dipole(value, from_unit: str, to_unit: str):
    """Convert a dipole magnitude (scalar or array) between e*A, Debye and C*m."""
    src = _DIPOLE_TO_CM[_dipole_unit(from_unit)]
    dst = _DIPOLE_TO_CM[_dipole_unit(to_unit)]
    if src == dst:
        return value
    return value * (src / dst)
