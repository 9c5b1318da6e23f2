"""One-dimensional configuration-coordinate defect.

The well depth depends linearly on a lattice coordinate Q,
``depth(Q) = defect_depth + coupling * Q``, and a harmonic term ``k Q^2 / 2``
restores the lattice. Total energy is the independent-particle sum of the
occupied levels plus the lattice term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .wells import ModelError, WellModelSpec, hamiltonian, _diagonalize

Q_TOL = 1e-6  # Angstrom


@dataclass(frozen=True)
class ConfigCoordSpec:
    well: WellModelSpec
    spring_k: float = 10.0  # eV/A^2
    coupling: float = 1.0  # eV/A, d(depth)/dQ

    def __post_init__(self):
        if not self.spring_k > 0:
            raise ModelError("spring_k must be positive")


def relax_coordinate(
    electronic_energy: Callable[[float], float],
    spring_k: float,
    bracket: tuple[float, float] = (-0.5, 0.5),
) -> tuple[float, float]:
    """Golden-section minimum of electronic_energy(Q) + k Q^2 / 2."""

    def total(q):
        return electronic_energy(q) + 0.5 * spring_k * q * q

    res = minimize_scalar(total, bracket=bracket, method="golden", options={"xtol": 1e-12})
    q = float(res.x)
    return q, float(total(q))


def occupied_bands(spec: WellModelSpec, occupation: str) -> list[int]:
    """Bands filled in the up channel; down electrons always fill from the bottom."""
    n = spec.electrons_up
    if occupation == "ground":
        return list(range(n))
    if occupation == "promoted":
        if n == 0:
            raise ModelError("no electron to promote")
        return list(range(n - 1)) + [n]
    raise ModelError(f"occupation must be 'ground' or 'promoted', got {occupation!r}")


def level_energies(cc: ConfigCoordSpec, q: float) -> np.ndarray:
    _, h = hamiltonian(cc.well, depth=cc.well.defect_depth + cc.coupling * q)
    return np.linalg.eigvalsh(h)


def electronic_energy(cc: ConfigCoordSpec, occupation: str, shift: float = 0.0) -> Callable[[float], float]:
    up = occupied_bands(cc.well, occupation)
    down = list(range(cc.well.electrons_down))

    def energy(q: float) -> float:
        e = level_energies(cc, q) - shift
        if max(up + down, default=-1) >= len(e):
            raise ModelError("no bound excited level to promote into")
        return float(e[up].sum() + e[down].sum())

    return energy


def relax_and_excite(cc: ConfigCoordSpec, occupation: str = "ground", shift: float = 0.0) -> tuple[float, float]:
    """Relaxed coordinate Q* (A) and total energy (eV) for an occupation.

    ``shift`` is subtracted from every level before summing, so totals are
    reported in the same energy frame as shifted level sets.
    """
    return relax_coordinate(electronic_energy(cc, occupation, shift), cc.spring_k)


def states_at(cc: ConfigCoordSpec, q: float, which: str = "base"):
    g, h = hamiltonian(cc.well, which, depth=cc.well.defect_depth + cc.coupling * q)
    evals, evecs = _diagonalize(h)
    return g, h, evals, evecs
