"""Periodic plane-wave Hamiltonians for a Gaussian defect well in a weak host potential.

H(G, G') = hbar^2 |G|^2 / (2 m*) delta_GG' + V(G - G'), where V is the
sum of a cosine host potential, a narrow Gaussian well and an optional wide
shallow Gaussian tail, all with analytic Fourier transforms. The "refined" Hamiltonian multiplies the well depth by
``refined_scale``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from ..constants import CONSTANTS
from ..records import EnergyLevelSet, PlaneWaveState

CONVERGENCE_TOL = 1e-3  # eV


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class WellModelSpec:
    dimension: int = 1
    cell_length: float = 60.0  # Angstrom
    basis_cutoff: int = 48  # max |n| of G = 2 pi n / L
    effective_mass: float = 1.0
    host_potential_amplitude: float = 0.0  # eV
    host_periods: int = 8  # host-potential periods per cell
    defect_depth: float = 3.0  # eV
    defect_width: float = 0.6  # Angstrom
    tail_depth: float = 0.2  # eV, shallow wide well standing in for a Coulomb tail
    tail_width: float = 8.0  # Angstrom
    refined_scale: float = 1.0
    electrons_up: int = 1
    electrons_down: int = 0

    def __post_init__(self):
        if self.dimension not in (1, 3):
            raise ModelError("dimension must be 1 or 3")
        if self.basis_cutoff < 4:
            raise ModelError("basis_cutoff must be >= 4")
        if not max(self.defect_width, self.tail_width) < self.cell_length / 4:
            raise ModelError("well widths must be below cell_length / 4")
        if not 0.5 <= self.refined_scale <= 2.0:
            raise ModelError("refined_scale must lie in [0.5, 2]")
        if self.effective_mass <= 0:
            raise ModelError("effective_mass must be positive")
        if min(self.electrons_up, self.electrons_down) < 0:
            raise ModelError("electron counts must be non-negative")

    @property
    def lattice(self) -> np.ndarray:
        if self.dimension == 1:
            # transverse axes only carry G = 0; their length just fixes the cell
            return np.diag([self.cell_length, 1.0, 1.0])
        return np.eye(3) * self.cell_length

    @property
    def volume(self) -> float:
        return self.cell_length**self.dimension


def miller_set(spec: WellModelSpec, cutoff: int | None = None) -> np.ndarray:
    c = spec.basis_cutoff if cutoff is None else cutoff
    if spec.dimension == 1:
        n = np.arange(-c, c + 1)
        return np.column_stack([n, np.zeros_like(n), np.zeros_like(n)])
    pts = np.array(list(product(range(-c, c + 1), repeat=3)))
    return pts[np.sum(pts**2, axis=1) <= c * c]


def gaussian_ft(spec: WellModelSpec, g: np.ndarray, depth: float, width: float) -> np.ndarray:
    """Cell-normalized Fourier components of -depth * exp(-r^2 / 2 width^2)."""
    g2 = np.sum(np.atleast_2d(g) ** 2, axis=-1)
    w2 = width * width
    return -depth * (2 * math.pi * w2) ** (spec.dimension / 2) / spec.volume * np.exp(-0.5 * g2 * w2)


def defect_potential_ft(spec: WellModelSpec, g: np.ndarray, depth: float) -> np.ndarray:
    """Well plus tail; only the well depth is scaled by the refinement or the coordinate."""
    v = gaussian_ft(spec, g, depth, spec.defect_width)
    if spec.tail_depth:
        v = v + gaussian_ft(spec, g, spec.tail_depth, spec.tail_width)
    return v


def hamiltonian(
    spec: WellModelSpec,
    which: str = "base",
    *,
    cutoff: int | None = None,
    depth: float | None = None,
    include_defect: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Reciprocal vectors (n, 3) and the Hermitian Hamiltonian matrix (eV)."""
    if which not in ("base", "refined"):
        raise ModelError(f"which must be 'base' or 'refined', got {which!r}")
    m = miller_set(spec, cutoff)
    g = 2 * math.pi * m / spec.cell_length
    kinetic = CONSTANTS.hbar2_over_me / (2 * spec.effective_mass) * np.sum(g**2, axis=1)
    dm = m[:, None, :] - m[None, :, :]
    h = np.diag(kinetic).astype(float)
    if include_defect:
        d = spec.defect_depth if depth is None else depth
        if which == "refined":
            d *= spec.refined_scale
        dg = 2 * math.pi * dm / spec.cell_length
        h = h + defect_potential_ft(spec, dg.reshape(-1, 3), d).reshape(h.shape)
    amp = spec.host_potential_amplitude
    if amp:
        p = spec.host_periods
        for axis in range(spec.dimension):
            other = [a for a in range(3) if a != axis]
            hit = (np.abs(dm[..., axis]) == p) & np.all(dm[..., other] == 0, axis=-1)
            h = h + 0.5 * amp * hit
    return g, h


@dataclass(frozen=True, eq=False)
class WellSolution:
    basis: np.ndarray
    hamiltonian: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray  # columns are states
    lattice: np.ndarray

    def states(self, n: int | None = None, spin: str = "both", shift: float = 0.0) -> list[PlaneWaveState]:
        n = len(self.energies) if n is None else n
        return [
            PlaneWaveState(self.basis, self.vectors[:, i], float(self.energies[i] + shift), spin, i)
            for i in range(n)
        ]

    def levels(self, n: int | None = None, shift: float = 0.0) -> EnergyLevelSet:
        n = len(self.energies) if n is None else n
        return EnergyLevelSet(tuple(self.energies[:n] + shift))


def _diagonalize(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    evals, evecs = np.linalg.eigh(h)
    # deterministic phase: largest component real and positive
    idx = np.argmax(np.abs(evecs), axis=0)
    phase = evecs[idx, np.arange(evecs.shape[1])]
    evecs = evecs * (np.abs(phase) / phase)[None, :]
    return evals, evecs


def solve_well(
    spec: WellModelSpec,
    which: str = "base",
    *,
    depth: float | None = None,
    include_defect: bool = True,
    check_convergence: bool = True,
) -> WellSolution:
    """Diagonalize the model Hamiltonian; states sorted by energy, normalized.

    Raises ModelError("unconverged basis") when the ground state moves by
    more than 1 meV going from ``basis_cutoff`` to ``basis_cutoff + 2``.
    """
    g, h = hamiltonian(spec, which, depth=depth, include_defect=include_defect)
    evals, evecs = _diagonalize(h)
    if check_convergence:
        _, h2 = hamiltonian(spec, which, cutoff=spec.basis_cutoff + 2, depth=depth, include_defect=include_defect)
        e2 = np.linalg.eigvalsh(h2)[0]
        if abs(e2 - evals[0]) > CONVERGENCE_TOL:
            raise ModelError(
                f"unconverged basis: ground state moves {abs(e2 - evals[0]) * 1e3:.2f} meV "
                f"between cutoff {spec.basis_cutoff} and {spec.basis_cutoff + 2}"
            )
    return WellSolution(g, h, evals, evecs, spec.lattice)


def host_band_minimum(spec: WellModelSpec) -> float:
    """Lowest eigenvalue of the defect-free host in the same cell."""
    _, h = hamiltonian(spec, include_defect=False)
    return float(np.linalg.eigvalsh(h)[0])


def with_depth(spec: WellModelSpec, depth: float) -> WellModelSpec:
    return replace(spec, defect_depth=depth)
