"""Transition dipoles, localization and radiative lifetimes.

Run with ``python demos/02_optical_transitions.py``.
"""

# %% [markdown]
# A particle in a 1D box of length L is written in plane waves of a cell
# twice as long. The 1 -> 2 dipole has the closed form 16 e L / (9 pi^2);
# 1 -> 3 is parity forbidden.

# %%
from __future__ import annotations

import math

import numpy as np

from qdscreen.constants import CONSTANTS
from qdscreen.electronic import inverse_participation_ratio, isoline_tdm, radiative_lifetime, transition_dipole
from qdscreen.records import HostSpec, PlaneWaveState

HBAR2_OVER_ME = 7.619964231  # eV A^2, hbar^2 / m_e


def box_state(n: int, length: float, n_pw: int = 1500) -> PlaneWaveState:
    g = np.pi * np.arange(-n_pw, n_pw + 1) / length
    k = n * np.pi / length

    def seg(q):
        out = np.full(q.shape, length, dtype=complex)
        nz = np.abs(q) > 1e-12
        out[nz] = (np.exp(1j * q[nz] * length) - 1) / (1j * q[nz])
        return out

    c = (seg(k - g) - seg(-k - g)) / 2j
    basis = np.zeros((g.size, 3))
    basis[:, 0] = g
    return PlaneWaveState(basis, c / np.linalg.norm(c), HBAR2_OVER_ME * k * k / 2, "both", n)


L = 10.0
s1, s2, s3 = (box_state(n, L) for n in (1, 2, 3))
closed = 16 * L / (9 * math.pi**2) * CONSTANTS.eangstrom_in_debye
print(f"mu_12 = {transition_dipole(s1, s2).magnitude:.4f} D (closed form {closed:.4f} D)")
print(f"mu_13 = {transition_dipole(s1, s3).magnitude:.1e} D")

# %% [markdown]
# The inverse participation ratio separates a state spread over the whole
# grid from one piled onto a few points.

# %%
n = 1000
flat = np.full(n, 1 / n)
peaked = np.exp(-0.5 * ((np.arange(n) - 500) / 5.0) ** 2)
peaked /= peaked.sum()
for name, p in (("flat", flat), ("peaked", peaked)):
    print(f"  {name:6s}: IPR * N = {inverse_participation_ratio(p) * n:8.2f}")

# %% [markdown]
# Lifetimes in silicon (n = 3.8) and the dipole needed for a target lifetime.

# %%
for conv in ("einstein", "as_printed"):
    tau = radiative_lifetime(1.04, 1.86, 3.8, conv)
    print(f"  {conv:10s}: tau(1.04 eV, 1.86 D) = {tau.microseconds:.3f} us")
energies = np.array([0.8, 1.0, 1.114])
print("  TDM for 1 us:", np.round(isoline_tdm(energies, 1e-6, HostSpec().refractive_index), 3), "D")
