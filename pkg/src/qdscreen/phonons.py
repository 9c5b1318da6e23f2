"""Harmonic phonons, partial Huang-Rhys factors and zero-temperature
photoluminescence lineshapes in the equal-mode approximation.

Units: force constants eV/A^2, masses amu, displacements A, phonon energies
meV, photon energies eV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .constants import CONSTANTS

IMAGINARY_TOL = 1.0  # meV
ACOUSTIC_CUTOFF = 1e-3  # meV; modes below carry no Huang-Rhys weight


class PhononError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PhononSet:
    """Mode energies (meV, ascending; negative = imaginary) and mass-weighted
    eigenvectors with shape (n_modes, n_atoms, 3)."""

    frequencies: np.ndarray
    eigenvectors: np.ndarray
    masses: np.ndarray

    @property
    def n_atoms(self) -> int:
        return len(self.masses)


@dataclass(frozen=True, eq=False)
class HuangRhysDecomposition:
    partial_factors: np.ndarray
    total: float
    mode_coordinates: np.ndarray  # q_k, amu^1/2 A


@dataclass(frozen=True, eq=False)
class LineshapeResult:
    energy: np.ndarray  # eV
    intensity: np.ndarray  # normalized emission, 1/eV
    sideband: np.ndarray  # normalized spectral function A without the omega^3 factor
    zpl_position: float
    zpl_weight: float
    huang_rhys: float
    broadening: float  # meV


def translation_projector(masses: np.ndarray) -> np.ndarray:
    """Projector removing rigid translations in mass-weighted coordinates."""
    masses = np.asarray(masses, dtype=float)
    n = len(masses)
    t = np.zeros((3, 3 * n))
    for alpha in range(3):
        t[alpha, alpha::3] = np.sqrt(masses)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    return np.eye(3 * n) - t.T @ t


def phonon_modes(
    force_constants: np.ndarray,
    masses: Sequence[float],
    *,
    acoustic_sum_rule: bool = True,
    imaginary_tol: float = IMAGINARY_TOL,
) -> PhononSet:
    """Diagonalize D = Phi / sqrt(m_a m_b).

    With ``acoustic_sum_rule`` the rigid translations are projected out
    before diagonalization, which guarantees three exact zero modes. Pass
    False for models pinned to a fixed frame (e.g. a mass on a wall spring).
    """
    fc = np.asarray(force_constants, dtype=float)
    masses = np.asarray(masses, dtype=float)
    n = len(masses)
    if fc.shape != (3 * n, 3 * n):
        raise PhononError(f"force constants {fc.shape} do not match {n} atoms")
    if np.max(np.abs(fc - fc.T), initial=0.0) > 1e-8:
        raise PhononError("force-constant matrix is not symmetric")
    inv_sqrt_m = 1 / np.sqrt(np.repeat(masses, 3))
    dyn = fc * np.outer(inv_sqrt_m, inv_sqrt_m)
    if acoustic_sum_rule:
        p = translation_projector(masses)
        dyn = p @ dyn @ p
    dyn = (dyn + dyn.T) / 2
    evals, evecs = np.linalg.eigh(dyn)
    freqs = np.sign(evals) * np.sqrt(np.abs(evals)) * CONSTANTS.phonon_mev_factor
    if freqs.min() < -imaginary_tol:
        raise PhononError(f"imaginary mode of {-freqs.min():.3f} meV exceeds tolerance")
    return PhononSet(freqs, evecs.T.reshape(3 * n, n, 3), masses)


def finite_displacement_force_constants(
    force_provider: Callable[[np.ndarray], np.ndarray],
    positions: np.ndarray,
    displacement: float = 0.01,
    *,
    symmetry_tol: float = 1e-6,
    acoustic_sum_rule: bool = True,
) -> np.ndarray:
    """Central-difference force constants, symmetrized.

    Phi[a alpha, b beta] = -(F_b beta(+d) - F_b beta(-d)) / (2 d) for a
    displacement d of atom a along alpha. With ``acoustic_sum_rule`` the
    self terms are reset to minus the sum of the off-diagonal blocks.
    """
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    fc = np.empty((3 * n, 3 * n))
    for a in range(n):
        for alpha in range(3):
            shifted = []
            for sign in (1, -1):
                p = pos.copy()
                p[a, alpha] += sign * displacement
                try:
                    forces = np.asarray(force_provider(p), dtype=float).reshape(n, 3)
                except Exception as exc:
                    raise PhononError(f"force provider failed for atom {a} axis {alpha}: {exc}") from exc
                shifted.append(forces)
            fc[3 * a + alpha] = -(shifted[0] - shifted[1]).ravel() / (2 * displacement)
    asym = np.max(np.abs(fc - fc.T), initial=0.0) / 2
    if asym > symmetry_tol:
        raise PhononError(f"force constants asymmetric by {asym:.2e} eV/A^2")
    fc = (fc + fc.T) / 2
    if acoustic_sum_rule:
        blocks = fc.reshape(n, 3, n, 3)
        for a in range(n):
            blocks[a, :, a, :] = 0.0
            blocks[a, :, a, :] = -blocks[a].sum(axis=1)
        fc = blocks.reshape(3 * n, 3 * n)
        fc = (fc + fc.T) / 2
    return fc


def partial_hr_factors(
    phonons: PhononSet,
    displacement: np.ndarray,
    masses: Sequence[float] | None = None,
    *,
    acoustic_cutoff: float = ACOUSTIC_CUTOFF,
) -> HuangRhysDecomposition:
    """S_k = omega_k q_k^2 / (2 hbar), q_k = sum_a sqrt(m_a) dR_a . e_k,a."""
    masses = phonons.masses if masses is None else np.asarray(masses, dtype=float)
    dr = np.asarray(displacement, dtype=float).reshape(-1, 3)
    if dr.shape[0] != phonons.n_atoms or len(masses) != phonons.n_atoms:
        raise PhononError(f"displacement for {dr.shape[0]} atoms, phonons for {phonons.n_atoms}")
    weighted = np.sqrt(masses)[:, None] * dr
    q = np.einsum("kai,ai->k", phonons.eigenvectors, weighted)
    omega = phonons.frequencies * 1e-3  # eV
    s = np.where(omega > acoustic_cutoff * 1e-3, omega * q**2 / (2 * CONSTANTS.hbar2_over_amu), 0.0)
    return HuangRhysDecomposition(s, float(s.sum()), q)


def gaussian(x, center, sigma):
    return np.exp(-0.5 * ((x - center) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def spectral_function(
    hr: HuangRhysDecomposition, phonons: PhononSet, energies_mev: np.ndarray, sigma: float = 2.0
) -> np.ndarray:
    """S(hw) = sum_k S_k g_sigma(hw - hw_k), per meV."""
    e = np.asarray(energies_mev, dtype=float)
    keep = hr.partial_factors > 0
    return np.sum(
        hr.partial_factors[keep, None] * gaussian(e[None, :], phonons.frequencies[keep, None], sigma), axis=0
    )


def pl_lineshape(
    hr: HuangRhysDecomposition,
    phonons: PhononSet,
    zpl: float,
    broadening: float = 2.0,
    grid: np.ndarray | None = None,
    *,
    mode_smearing: float | None = None,
    resolution: float = 0.05,
    n_time: int = 2**14,
    window: tuple[float, float] = (0.4, 0.05),
) -> LineshapeResult:
    """Zero-temperature emission lineshape from the generating function.

    G(t) = exp(S(t) - S) with S(t) the Fourier transform of the
    Gaussian-smeared spectral function; a Gaussian damping of width
    ``broadening`` (meV) in time broadens every line. L(hw) is proportional
    to (hw)^3 A(hw) and normalized to unit area over the output grid.
    ``resolution`` (meV) and ``n_time`` fix the FFT grid.
    """
    sigma_mode = broadening if mode_smearing is None else mode_smearing
    hbar = CONSTANTS.hbar_ev_s
    de = resolution * 1e-3  # eV
    span = n_time * de
    keep = hr.partial_factors > 0
    s_k = hr.partial_factors[keep]
    w_k = phonons.frequencies[keep] * 1e-3  # eV
    if len(w_k) and w_k.max() >= span / 2:
        raise PhononError(
            f"time grid too coarse: max phonon {w_k.max() * 1e3:.1f} meV exceeds Nyquist limit {span / 2 * 1e3:.1f} meV"
        )
    if grid is not None and len(grid) > 1 and np.max(np.diff(grid)) > broadening * 1e-3:
        raise PhononError("output grid spacing is coarser than the broadening")

    dt = 2 * math.pi * hbar / span
    t = np.arange(n_time) * dt
    phase = np.exp(-1j * np.outer(t, w_k) / hbar) if len(w_k) else np.zeros((n_time, 0))
    smear = np.exp(-0.5 * (sigma_mode * 1e-3 * t / hbar) ** 2)
    s_t = (phase @ s_k) * smear
    s_total = float(s_k.sum())
    g_t = np.exp(s_t - s_total) * np.exp(-0.5 * (broadening * 1e-3 * t / hbar) ** 2)

    # A(eps) = (1 / pi hbar) Re int_0^inf G(t) exp(i eps t / hbar) dt, eps = phonon energy emitted
    w = np.ones(n_time)
    w[0] = 0.5
    a_eps = (dt / (math.pi * hbar)) * (n_time * np.fft.ifft(w * g_t)).real
    eps = np.fft.fftfreq(n_time, d=1.0 / span)
    order = np.argsort(eps)
    eps, a_eps = eps[order], a_eps[order]

    photon = zpl - eps  # descending
    photon, a_eps = photon[::-1], a_eps[::-1]
    if grid is None:
        sel = (photon >= zpl - window[0] - 1e-12) & (photon <= zpl + window[1] + 1e-12)
        energy = photon[sel]
        side = a_eps[sel]
    else:
        energy = np.asarray(grid, dtype=float)
        side = np.interp(energy, photon, a_eps, left=0.0, right=0.0)
    side = np.clip(side, 0.0, None)
    intensity = np.clip(energy, 0.0, None) ** 3 * side
    intensity = intensity / np.trapezoid(intensity, energy)
    side = side / np.trapezoid(side, energy)
    return LineshapeResult(energy, intensity, side, zpl, math.exp(-s_total), s_total, broadening)
