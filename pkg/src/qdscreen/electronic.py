"""Level-diagram analytics for single defect records.

Covers the single-shot level correction, total spin, enumeration of
occupied-to-unoccupied transitions with their dipole moments, localization
(IPR) and transition nature, radiative lifetime, zero-phonon line and
bound-exciton stability.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .constants import CONSTANTS
from .records import SPINS, EnergyLevelSet, HostSpec, PlaneWaveState, Wavefunctions
from .thermo import ChargeTransitionLevel, StabilityWindow

_logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-6  # eV
LOCALIZATION_THRESHOLD = 10.0
CONVENTIONS = ("as_printed", "einstein")


class ElectronicError(ValueError):
    pass


class AmbiguousOccupationError(ElectronicError):
    pass


class DegenerateTransitionError(ElectronicError):
    pass


class NoDefectCharacterError(ElectronicError):
    pass


# ------------------------------------------------------------ single shot


def single_shot_levels(
    base_states: Sequence[PlaneWaveState], reference_hamiltonian: np.ndarray
) -> EnergyLevelSet:
    """Expectation values of ``reference_hamiltonian`` on fixed base states.

    No re-diagonalization. The result is sorted; ``band_indices`` records
    which base state each level came from.
    """
    h = np.asarray(reference_hamiltonian)
    coeffs = np.column_stack([st.coefficients for st in base_states])
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] != coeffs.shape[0]:
        raise ElectronicError(f"Hamiltonian shape {h.shape} does not match basis size {coeffs.shape[0]}")
    if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-10:
        raise ElectronicError("reference Hamiltonian is not Hermitian")
    overlap = coeffs.conj().T @ coeffs
    if np.max(np.abs(overlap - np.eye(len(base_states))), initial=0.0) > 1e-8:
        raise ElectronicError("base states are not orthonormal")
    values = np.einsum("gi,gh,hi->i", coeffs.conj(), h, coeffs).real
    order = np.argsort(values, kind="stable")
    bands = [base_states[i].band_index for i in order]
    if sorted(bands) != list(range(len(bands))):
        bands = list(map(int, order))
    return EnergyLevelSet(tuple(values[order]), tuple(bands))


# ------------------------------------------------------------------ spin


def total_spin(occupations: Mapping[str, Sequence[float]]) -> float:
    """S = |N_up - N_down| / 2."""
    up = float(np.sum(occupations.get("up", ())))
    down = float(np.sum(occupations.get("down", ())))
    return abs(up - down) / 2


def aufbau_occupations(
    levels: Mapping[str, EnergyLevelSet], electrons: Mapping[str, int]
) -> dict[str, tuple[float, ...]]:
    """Refill each spin channel from the bottom of ``levels``, per band."""
    out = {}
    for spin, ls in levels.items():
        n = electrons.get(spin, 0)
        if n > len(ls):
            raise ElectronicError(f"{n} electrons do not fit in {len(ls)} {spin} levels")
        occ = np.zeros(len(ls))
        occ[list(ls.band_indices[:n])] = 1.0
        out[spin] = tuple(occ)
    return out


def aufbau_spin(levels: Mapping[str, EnergyLevelSet], n_electrons: int) -> float:
    """S after pouring ``n_electrons`` into the lowest levels of both channels."""
    pooled = sorted((e, spin) for spin, ls in levels.items() for e in ls.eigenvalues)
    if n_electrons > len(pooled):
        raise ElectronicError(f"{n_electrons} electrons do not fit in {len(pooled)} levels")
    up = sum(1 for _, spin in pooled[:n_electrons] if spin == "up")
    return abs(2 * up - n_electrons) / 2


def binarize_occupations(occ: Sequence[float]) -> np.ndarray:
    occ = np.asarray(occ, dtype=float)
    if np.any((occ > 0.25) & (occ < 0.75)):
        raise AmbiguousOccupationError("ambiguous occupation: value in (0.25, 0.75)")
    return occ > 0.5


# -------------------------------------------------------------- dipoles


@dataclass(frozen=True, eq=False)
class Dipole:
    vector: np.ndarray  # complex Cartesian components, Debye
    magnitude: float  # Debye


def momentum_matrix_element(psi_f: PlaneWaveState, psi_i: PlaneWaveState) -> np.ndarray:
    """<f| G |i> in 1/Angstrom; multiply by hbar for momentum."""
    if psi_f.basis.shape != psi_i.basis.shape or not np.array_equal(psi_f.basis, psi_i.basis):
        raise ElectronicError("states do not share a plane-wave basis")
    return (psi_f.coefficients.conj() * psi_i.coefficients) @ psi_f.basis


def transition_dipole(
    psi_i: PlaneWaveState,
    psi_f: PlaneWaveState,
    effective_mass: float = 1.0,
) -> Dipole:
    """Transition dipole from the momentum matrix element.

    mu = i hbar <f|p|i> / ((e_f - e_i) m), with <p> = sum_G c_f* hbar G c_i.
    ``effective_mass`` is in electron masses.
    """
    de = psi_f.eigenvalue - psi_i.eigenvalue
    if abs(de) <= DEGENERACY_TOL:
        raise DegenerateTransitionError(
            f"bands {psi_i.band_index} and {psi_f.band_index} are degenerate; use subspace handling"
        )
    g = momentum_matrix_element(psi_f, psi_i)
    # hbar^2 G / (m de) is a length in Angstrom; times e gives e*A
    mu_ea = 1j * CONSTANTS.hbar2_over_me / effective_mass * g / de
    mu = mu_ea * CONSTANTS.eangstrom_in_debye
    return Dipole(mu, float(np.sqrt(np.sum(np.abs(mu) ** 2))))


# ------------------------------------------------------------------ IPR


def miller_indices(basis: np.ndarray, lattice: np.ndarray) -> np.ndarray:
    m = basis @ np.asarray(lattice).T / (2 * math.pi)
    mi = np.rint(m).astype(int)
    if np.max(np.abs(m - mi), initial=0.0) > 1e-6:
        raise ElectronicError("basis vectors are not reciprocal-lattice vectors of the cell")
    return mi


def real_space_probabilities(
    state: PlaneWaveState, lattice: np.ndarray, grid: Sequence[int] | None = None
) -> np.ndarray:
    """|psi|^2 dV on a real-space grid, normalized to sum 1."""
    mi = miller_indices(state.basis, lattice)
    min_grid = 2 * np.max(np.abs(mi), axis=0) + 1
    shape = tuple(int(n) for n in (min_grid if grid is None else grid))
    if any(s < m for s, m in zip(shape, min_grid)):
        raise ElectronicError(f"grid {shape} too small for the basis (needs {tuple(min_grid)})")
    box = np.zeros(shape, dtype=complex)
    np.add.at(box, tuple((mi % shape).T), state.coefficients)
    psi = np.fft.ifftn(box)
    p = np.abs(psi) ** 2
    return p / p.sum()


def inverse_participation_ratio(probabilities: np.ndarray) -> float:
    p = np.asarray(probabilities, dtype=float).ravel()
    p = p / p.sum()
    return float(np.sum(p**2))


def ipr(state: PlaneWaveState, lattice: np.ndarray, grid: Sequence[int] | None = None) -> tuple[float, int]:
    """IPR of a state and the number of grid cells it was evaluated on."""
    p = real_space_probabilities(state, lattice, grid)
    return inverse_participation_ratio(p), p.size


def is_localized(ipr_value: float, n_grid: int, threshold: float = LOCALIZATION_THRESHOLD) -> bool:
    return ipr_value * n_grid >= threshold


def classify_transition(
    initial_ipr: float,
    final_ipr: float,
    n_grid: int,
    threshold: float = LOCALIZATION_THRESHOLD,
) -> str:
    """donor_bx, acceptor_bx or intra_defect from the localization of both ends."""
    li = is_localized(initial_ipr, n_grid, threshold)
    lf = is_localized(final_ipr, n_grid, threshold)
    if li and lf:
        return "intra_defect"
    if li:
        return "donor_bx"
    if lf:
        return "acceptor_bx"
    raise NoDefectCharacterError("no defect character: both states are delocalized")


# ------------------------------------------------------------ transitions


@dataclass(frozen=True, eq=False)
class TransitionCandidate:
    spin: str
    initial_band: int
    final_band: int
    delta_ks: float
    tdm_vector: np.ndarray
    tdm: float
    initial_ipr: float | None = None
    final_ipr: float | None = None
    n_grid: int | None = None
    nature: str | None = None


def _degenerate_groups(values: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Group label per sorted value; neighbours closer than ``tol`` share a label."""
    labels = np.zeros(len(values), dtype=int)
    for k in range(1, len(values)):
        labels[k] = labels[k - 1] + (values[k] - values[k - 1] > tol)
    return labels


def enumerate_transitions(
    levels: Mapping[str, EnergyLevelSet],
    occupations: Mapping[str, Sequence[float]],
    wavefunctions: Wavefunctions | Callable[[str, int], PlaneWaveState],
    window: float = 0.1,
    *,
    lattice: np.ndarray | None = None,
    localization_threshold: float = LOCALIZATION_THRESHOLD,
    effective_mass: float = 1.0,
) -> list[TransitionCandidate]:
    """Occupied-to-unoccupied pairs within ``window`` of each channel's smallest gap.

    Occupations are per band. Every returned pair carries its dipole; pairs
    touching a degenerate subspace report the root-sum-square dipole over
    that subspace. IPR and nature are filled in when a lattice is available.
    Candidates are ordered by spin, then energy, then band indices.
    """
    if isinstance(wavefunctions, Wavefunctions):
        get_state = wavefunctions.get
        if lattice is None:
            lattice = wavefunctions.lattice
    else:
        get_state = wavefunctions

    found: list[TransitionCandidate] = []
    any_unoccupied = False
    for spin in SPINS:
        if spin not in levels or spin not in occupations:
            continue
        ls = levels[spin]
        energies = np.asarray(ls.eigenvalues)
        bands = np.asarray(ls.band_indices)
        filled = binarize_occupations(occupations[spin])[bands]  # in energy order
        occ_idx = np.flatnonzero(filled)
        emp_idx = np.flatnonzero(~filled)
        if len(emp_idx):
            any_unoccupied = True
        if not len(occ_idx) or not len(emp_idx):
            continue
        gaps = energies[emp_idx][None, :] - energies[occ_idx][:, None]
        positive = gaps > DEGENERACY_TOL
        if not positive.any():
            continue
        gap_min = gaps[positive].min()
        keep = positive & (gaps <= gap_min + window + 1e-12)
        groups = _degenerate_groups(energies)

        cache: dict[tuple[int, int], Dipole] = {}

        def dipole(a: int, b: int) -> Dipole:
            if (a, b) not in cache:
                cache[(a, b)] = transition_dipole(
                    get_state(spin, int(bands[a])), get_state(spin, int(bands[b])), effective_mass
                )
            return cache[(a, b)]

        iprs: dict[int, float] = {}
        n_grid = None

        def state_ipr(a: int) -> float:
            nonlocal n_grid
            if a not in iprs:
                iprs[a], n_grid = ipr(get_state(spin, int(bands[a])), lattice)
            return iprs[a]

        for io, jo in zip(*np.nonzero(keep)):
            a, b = occ_idx[io], emp_idx[jo]
            d = dipole(a, b)
            sub_a = np.flatnonzero((groups == groups[a]) & filled)
            sub_b = np.flatnonzero((groups == groups[b]) & ~filled)
            if len(sub_a) > 1 or len(sub_b) > 1:
                mag = math.sqrt(sum(dipole(x, y).magnitude ** 2 for x in sub_a for y in sub_b))
            else:
                mag = d.magnitude
            ipr_i = ipr_f = nature = None
            if lattice is not None:
                ipr_i, ipr_f = state_ipr(a), state_ipr(b)
                try:
                    nature = classify_transition(ipr_i, ipr_f, n_grid, localization_threshold)
                except NoDefectCharacterError:
                    nature = None
            found.append(
                TransitionCandidate(
                    spin, int(bands[a]), int(bands[b]), float(energies[b] - energies[a]),
                    d.vector, mag, ipr_i, ipr_f, n_grid, nature,
                )
            )
    if not any_unoccupied:
        raise ElectronicError("no unoccupied level available")
    found.sort(key=lambda t: (SPINS.index(t.spin), t.delta_ks, t.initial_band, t.final_band))
    return found


def representative_transition(candidates: Sequence[TransitionCandidate]) -> TransitionCandidate:
    """Largest dipole; ties go to the lower energy, then band order."""
    if not candidates:
        raise ElectronicError("no transition candidates")
    return min(candidates, key=lambda t: (-round(t.tdm, 12), t.delta_ks, SPINS.index(t.spin), t.initial_band, t.final_band))


# ------------------------------------------------------------- lifetime


@dataclass(frozen=True)
class Lifetime:
    seconds: float
    convention: str
    dark: bool = False

    @property
    def microseconds(self) -> float:
        return self.seconds * 1e6


def radiative_rate(energy: float, tdm: float, refractive_index: float, convention: str = "einstein") -> float:
    """Spontaneous-emission rate in 1/s for energy in eV and dipole in Debye.

    ``as_printed``: n (2 pi)^3 nu^3 |mu|^2 / (3 eps0 h c^3); ``einstein`` is
    twice that, the standard A coefficient.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown lifetime convention {convention!r}")
    if not energy > 0:
        raise ElectronicError("transition energy must be positive")
    if tdm < 0:
        raise ElectronicError("dipole magnitude must be non-negative")
    c = CONSTANTS
    nu = energy * c.ev_in_joule / c.planck_h
    mu = tdm * c.debye_in_coulomb_meter
    rate = refractive_index * (2 * math.pi) ** 3 * nu**3 * mu**2 / (
        3 * c.vacuum_permittivity * c.planck_h * c.speed_of_light**3
    )
    return 2 * rate if convention == "einstein" else rate


def radiative_lifetime(
    energy: float, tdm: float, refractive_index: float, convention: str = "einstein"
) -> Lifetime:
    rate = radiative_rate(energy, tdm, refractive_index, convention)
    if rate == 0:
        return Lifetime(math.inf, convention, dark=True)
    return Lifetime(1 / rate, convention)


def isoline_tdm(energy, lifetime_s: float, refractive_index: float, convention: str = "einstein"):
    """Dipole (Debye) giving ``lifetime_s`` at ``energy``; inverts the rate formula."""
    unit_rate = np.vectorize(lambda e: radiative_rate(e, 1.0, refractive_index, convention))(energy)
    return np.sqrt(1 / (lifetime_s * unit_rate))


# ------------------------------------------------------------ ZPL / BES


def zero_phonon_line(ground_total: float, excited_total: float) -> float:
    zpl = excited_total - ground_total
    if not zpl > 0:
        raise ElectronicError(f"non-positive zero-phonon line ({zpl} eV)")
    return zpl


def bound_exciton_stability(zpl: float, ctl: float, host: HostSpec, kind: str) -> float:
    """Binding margin in meV; positive means the bound exciton is stable.

    donor: E_g - CTL - ZPL.  acceptor: CTL - ZPL.
    """
    if ctl < 0:
        raise ElectronicError("charge transition level below the VBM")
    if kind == "donor":
        return (host.band_gap - ctl - zpl) * 1e3
    if kind == "acceptor":
        return (ctl - zpl) * 1e3
    raise ValueError(f"kind must be 'donor' or 'acceptor', got {kind!r}")


@dataclass(frozen=True)
class ExcitonAssessment:
    zpl: float
    ctl_used: ChargeTransitionLevel
    kind: str
    bes: float  # meV
    notes: tuple[str, ...] = field(default=())


def select_bes_level(
    windows: Sequence[StabilityWindow], charge: int, kind: str
) -> tuple[ChargeTransitionLevel, str | None]:
    """Charge transition level that bounds the exciton of a record of ``charge``.

    Donors ionize towards the next higher stable charge, i.e. the CTL at the
    lower edge of the charge's stability window; acceptors use the upper
    edge. When that edge is a band edge (no neighbouring stable charge) the
    CTL on the other edge is used and a note is returned.
    """
    pos = next((k for k, w in enumerate(windows) if w.charge == charge), None)
    if pos is None:
        raise ElectronicError(f"charge {charge} has no stability window")
    below = windows[pos - 1] if pos > 0 else None
    above = windows[pos + 1] if pos + 1 < len(windows) else None
    lower = None if below is None else ChargeTransitionLevel(below.charge, charge, windows[pos].fermi_lo)
    upper = None if above is None else ChargeTransitionLevel(charge, above.charge, windows[pos].fermi_hi)
    preferred, fallback = (lower, upper) if kind == "donor" else (upper, lower)
    if preferred is not None:
        note = None
        if kind == "donor" and preferred.q_upper != charge + 1:
            note = f"donor level {preferred.label} skips charge {charge + 1:+d} (not stable)"
        if kind == "acceptor" and preferred.q_lower != charge - 1:
            note = f"acceptor level {preferred.label} skips charge {charge - 1:+d} (not stable)"
        return preferred, note
    if fallback is not None:
        return fallback, f"no {kind}-side level; used {fallback.label} at the opposite window edge"
    raise ElectronicError("defect has a single stable charge; no transition level")


def nature_kind(nature: str) -> str:
    if nature == "donor_bx":
        return "donor"
    if nature == "acceptor_bx":
        return "acceptor"
    raise ElectronicError(f"bound-exciton stability undefined for {nature!r} transitions")


def assess_exciton(
    zpl: float, windows: Sequence[StabilityWindow], charge: int, nature: str, host: HostSpec
) -> ExcitonAssessment:
    kind = nature_kind(nature)
    ctl, note = select_bes_level(windows, charge, kind)
    bes = bound_exciton_stability(zpl, ctl.level, host, kind)
    return ExcitonAssessment(zpl, ctl, kind, bes, (note,) if note else ())
