"""Ball-and-spring lattices with exactly known force constants.

Springs act along their equilibrium bond direction n: the bond coordinate
is s = n . (u_j - u_i) with u the displacement from equilibrium. With only
the harmonic term the energy is exactly quadratic, so central differences
reproduce the spring matrix to round-off. Optional cubic and quartic terms
(``g3 s^3 / 6 + g4 s^4 / 24``) give a weakly anharmonic test potential.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np


@dataclass(frozen=True, eq=False)
class Bond:
    i: int
    j: int
    k: float
    direction: np.ndarray  # unit vector from i to j


@dataclass(eq=False)
class BallSpringModel:
    positions: np.ndarray
    masses: np.ndarray
    bonds: list[Bond] = field(default_factory=list)
    cubic: float = 0.0
    quartic: float = 0.0

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    def force_constants(self) -> np.ndarray:
        """Exact harmonic force-constant matrix (3N x 3N, eV/A^2)."""
        n = self.n_atoms
        fc = np.zeros((n, 3, n, 3))
        for b in self.bonds:
            kmat = b.k * np.outer(b.direction, b.direction)
            fc[b.i, :, b.i, :] += kmat
            fc[b.j, :, b.j, :] += kmat
            fc[b.i, :, b.j, :] -= kmat
            fc[b.j, :, b.i, :] -= kmat
        return fc.reshape(3 * n, 3 * n)

    def forces(self, positions: np.ndarray) -> np.ndarray:
        u = np.asarray(positions, dtype=float) - self.positions
        f = np.zeros_like(u)
        for b in self.bonds:
            s = b.direction @ (u[b.j] - u[b.i])
            dv = b.k * s + self.cubic * s * s / 2 + self.quartic * s**3 / 6
            f[b.i] += dv * b.direction
            f[b.j] -= dv * b.direction
        return f


def periodic_chain(n_atoms: int, spacing: float = 2.35, k: float = 10.0, mass: float = 28.0855) -> BallSpringModel:
    """Ring of ``n_atoms`` along x with nearest-neighbour springs."""
    pos = np.zeros((n_atoms, 3))
    pos[:, 0] = spacing * np.arange(n_atoms)
    ex = np.array([1.0, 0.0, 0.0])
    bonds = [Bond(i, (i + 1) % n_atoms, k, ex) for i in range(n_atoms)]
    return BallSpringModel(pos, np.full(n_atoms, mass), bonds)


def chain_dispersion(n_atoms: int, k: float, mass: float) -> np.ndarray:
    """Analytic longitudinal mode energies (meV) at the commensurate wavevectors."""
    from ..constants import CONSTANTS

    j = np.arange(n_atoms)
    omega = 2 * np.sqrt(k / mass) * np.abs(np.sin(np.pi * j / n_atoms))
    return np.sort(omega * CONSTANTS.phonon_mev_factor)


def cubic_cluster(
    n: int = 3,
    spacing: float = 2.7,
    k_nn: float = 8.0,
    k_nnn: float = 2.0,
    mass: float = 28.0855,
) -> BallSpringModel:
    """Periodic n x n x n simple-cubic lattice with first- and second-neighbour springs."""
    if n < 3:
        raise ValueError("need n >= 3 so periodic neighbours are distinct")
    sites = list(product(range(n), repeat=3))
    index = {s: a for a, s in enumerate(sites)}
    pos = spacing * np.array(sites, dtype=float)
    bonds = []
    nn = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    nnn = [(1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1)]
    for s, a in index.items():
        for shells, kk in ((nn, k_nn), (nnn, k_nnn)):
            for d in shells:
                t = tuple((s[c] + d[c]) % n for c in range(3))
                vec = np.array(d, dtype=float)
                bonds.append(Bond(a, index[t], kk, vec / np.linalg.norm(vec)))
    return BallSpringModel(pos, np.full(len(sites), mass), bonds)


def breathing_pattern(model: BallSpringModel, center: int = 0) -> np.ndarray:
    """Unit-norm displacement moving the nearest neighbours of ``center`` radially outward."""
    u = np.zeros_like(model.positions)
    for b in model.bonds:
        if b.i == center and np.count_nonzero(b.direction) == 1:
            u[b.j] += b.direction
        elif b.j == center and np.count_nonzero(b.direction) == 1:
            u[b.i] -= b.direction
    return u / np.linalg.norm(u)
