"""Formation energies, point-charge finite-size correction, charge transition
levels and Fermi-level stability windows.

Formation energies are affine in the Fermi level ``E_F`` (measured from the
VBM), so each charged record reduces to a :class:`FormationLine`. Everything
downstream (windows, CTLs, diagrams) works on lines only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erfc

from .constants import CONSTANTS
from .records import ChemPotSet, DefectRecord, HostSpec

MIN_WINDOW = 1e-6
CORRECTION_SCHEMES = ("none", "point_charge")


class ThermoError(ValueError):
    pass


@dataclass(frozen=True)
class FormationLine:
    defect_id: str
    charge: int
    intercept: float

    @property
    def slope(self) -> int:
        return self.charge

    def __call__(self, fermi_level):
        return self.intercept + self.charge * fermi_level


@dataclass(frozen=True)
class StabilityWindow:
    charge: int
    fermi_lo: float
    fermi_hi: float

    @property
    def width(self) -> float:
        return self.fermi_hi - self.fermi_lo


@dataclass(frozen=True)
class ChargeTransitionLevel:
    q_upper: int
    q_lower: int
    level: float

    @property
    def label(self) -> str:
        def fmt(q):
            return f"{q:+d}" if q else "0"

        return f"({fmt(self.q_upper)}/{fmt(self.q_lower)})"


def exchanged_species(record: DefectRecord, host: HostSpec) -> dict[str, int]:
    """Atoms added (+) or removed (-) to form the defect from the pristine host."""
    n = {record.element: 1}
    if record.site == "substitutional":
        n[host.host_element] = n.get(host.host_element, 0) - 1
    return n


def _chemical_term(record: DefectRecord, host: HostSpec, chempots: ChemPotSet) -> float:
    total = 0.0
    for element, count in exchanged_species(record, host).items():
        if count == 0:
            continue
        if element not in chempots:
            raise ThermoError(f"missing chemical potential for {element}")
        total += count * chempots[element]
    return total


def formation_energy(
    record: DefectRecord,
    host: HostSpec,
    chempots: ChemPotSet,
    fermi_level: float,
    correction: float = 0.0,
) -> float:
    """E_tot[X^q] - E_bulk - sum n_i mu_i + q (E_VBM + E_F) + E_corr, in eV."""
    if not (0.0 <= fermi_level <= host.band_gap):
        raise ThermoError(f"Fermi level {fermi_level} eV outside the gap [0, {host.band_gap}]")
    return (
        record.total_energy
        - host.bulk_total_energy
        - _chemical_term(record, host, chempots)
        + record.charge * (host.vbm_reference + fermi_level)
        + correction
    )


def record_correction(record: DefectRecord, host: HostSpec) -> float:
    """Point-charge term for the record's scheme plus any precomputed extra."""
    return finite_size_correction(record.charge, host, record.correction_scheme) + record.correction_extra


def formation_line(record: DefectRecord, host: HostSpec, chempots: ChemPotSet) -> FormationLine:
    intercept = formation_energy(record, host, chempots, 0.0, record_correction(record, host))
    return FormationLine(record.defect_id, record.charge, intercept)


# ----------------------------------------------------------- finite size


def ewald_point_charge_energy(lattice, eta: float | None = None, tol: float = 1e-14) -> float:
    """Ewald energy per cell (units of q^2 e^2/4 pi eps0 per Angstrom) of a
    periodic array of unit point charges in a neutralizing background."""
    lattice = np.asarray(lattice, dtype=float)
    volume = abs(np.linalg.det(lattice))
    if eta is None:
        eta = math.sqrt(math.pi) / volume ** (1 / 3)
    recip = 2 * math.pi * np.linalg.inv(lattice).T

    # cutoffs from erfc(eta r) < tol and exp(-G^2/4eta^2) < tol
    r_cut = math.sqrt(-math.log(tol)) / eta + 1e-9
    g_cut = 2 * eta * math.sqrt(-math.log(tol))
    nr = [int(math.ceil(r_cut / np.linalg.norm(a))) + 1 for a in lattice]
    ng = [int(math.ceil(g_cut / np.linalg.norm(b))) + 1 for b in recip]

    idx = np.array(list(product(*(range(-n, n + 1) for n in nr))), dtype=float)
    r = np.linalg.norm(idx @ lattice, axis=1)
    r = r[r > 0]
    real = 0.5 * np.sum(erfc(eta * r) / r)

    idx = np.array(list(product(*(range(-n, n + 1) for n in ng))), dtype=float)
    g2 = np.sum((idx @ recip) ** 2, axis=1)
    g2 = g2[g2 > 0]
    recip_sum = (2 * math.pi / volume) * np.sum(np.exp(-g2 / (4 * eta**2)) / g2)

    self_term = -eta / math.sqrt(math.pi)
    background = -math.pi / (2 * volume * eta**2)
    return real + recip_sum + self_term + background


def madelung_constant(lattice) -> float:
    """alpha_M such that the lattice energy is -alpha_M q^2 / (2 L), L = V^(1/3)."""
    lattice = np.asarray(lattice, dtype=float)
    length = abs(np.linalg.det(lattice)) ** (1 / 3)
    return -2 * length * ewald_point_charge_energy(lattice)


def _is_cubic(lattice: np.ndarray, tol: float = 1e-8) -> bool:
    a = np.linalg.norm(lattice[0])
    return np.allclose(lattice @ lattice.T, a * a * np.eye(3), atol=tol * a * a)


def finite_size_correction(charge: int, host: HostSpec, scheme: str = "point_charge") -> float:
    """Isotropic point-charge (Madelung) correction in eV."""
    if scheme not in CORRECTION_SCHEMES:
        raise ThermoError(f"unknown correction scheme {scheme!r}")
    if scheme == "none" or charge == 0:
        return 0.0
    lattice = host.lattice
    if not _is_cubic(lattice):
        raise ThermoError("point_charge correction requires a cubic supercell")
    length = abs(np.linalg.det(lattice)) ** (1 / 3)
    alpha = madelung_constant(lattice)
    return alpha * charge**2 * CONSTANTS.coulomb_constant_ev_angstrom / (2 * host.dielectric_constant * length)


# ---------------------------------------------------------- transitions


def charge_transition_level(line_a: FormationLine, line_b: FormationLine) -> ChargeTransitionLevel:
    """Fermi level where the two lines cross. Not clamped to the gap."""
    if line_a.charge == line_b.charge:
        raise ThermoError("charge transition level needs two different charges")
    hi, lo = (line_a, line_b) if line_a.charge > line_b.charge else (line_b, line_a)
    level = (lo.intercept - hi.intercept) / (hi.charge - lo.charge)
    return ChargeTransitionLevel(hi.charge, lo.charge, level)


def _check_same_defect(lines: Sequence[FormationLine]) -> None:
    ids = {ln.defect_id.rsplit(":", 1)[0] for ln in lines}
    if len(ids) > 1:
        raise ThermoError(f"lines belong to different defects: {sorted(ids)}")


def stability_windows(lines: Sequence[FormationLine], host: HostSpec) -> list[StabilityWindow]:
    """Lower envelope of the formation lines over [0, E_g].

    Windows are returned in order of increasing Fermi level, hence
    non-increasing charge. Windows narrower than 1e-6 eV are dropped.
    """
    if not lines:
        raise ThermoError("at least one formation line is required")
    _check_same_defect(lines)
    gap = host.band_gap
    # one line per charge; duplicates keep the lowest intercept
    best: dict[int, FormationLine] = {}
    for ln in lines:
        if ln.charge not in best or ln.intercept < best[ln.charge].intercept:
            best[ln.charge] = ln
    cand = sorted(best.values(), key=lambda ln: (ln.intercept, abs(ln.charge), ln.charge))

    # lowest at E_F = 0; among near-ties the smallest slope stays lowest to the right
    e0 = min(ln.intercept for ln in cand)
    ties = [ln for ln in cand if ln.intercept - e0 <= 1e-12 * max(1.0, abs(e0))]
    current = min(ties, key=lambda ln: (ln.charge, abs(ln.charge)))
    x = 0.0
    windows = []
    while True:
        nxt, x_next = None, gap
        for ln in cand:
            if ln.charge >= current.charge:
                continue
            xc = (ln.intercept - current.intercept) / (current.charge - ln.charge)
            if xc < x_next or (nxt is not None and xc == x_next and ln.charge < nxt.charge):
                if xc >= x - 1e-15:
                    nxt, x_next = ln, max(xc, x)
        windows.append(StabilityWindow(current.charge, x, x_next))
        if nxt is None or x_next >= gap:
            break
        current, x = nxt, x_next
    return [w for w in windows if w.width >= MIN_WINDOW]


def window_transition_levels(windows: Sequence[StabilityWindow]) -> list[ChargeTransitionLevel]:
    """CTLs at the shared boundaries of consecutive windows."""
    return [
        ChargeTransitionLevel(a.charge, b.charge, a.fermi_hi)
        for a, b in zip(windows, windows[1:])
    ]


def formation_diagram(
    lines: Iterable[FormationLine], host: HostSpec, samples: int = 200
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Sample every line on an even Fermi-level grid over the gap."""
    fermi = np.linspace(0.0, host.band_gap, samples)
    curves = {ln.charge: ln(fermi) for ln in sorted(lines, key=lambda ln: -ln.charge)}
    return fermi, curves
