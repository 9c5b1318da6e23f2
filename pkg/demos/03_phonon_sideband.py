"""Phonons, Huang-Rhys factors and the emission lineshape.

Run with ``python demos/03_phonon_sideband.py``.
"""

# %% [markdown]
# A ring of springs has a textbook dispersion. The dynamical-matrix solver
# reproduces it, with the acoustic sum rule pinning the translations to zero.

# %%
from __future__ import annotations

import numpy as np

from qdscreen.modellab import chain_dispersion, cubic_cluster, periodic_chain
from qdscreen.phonons import partial_hr_factors, phonon_modes, pl_lineshape

chain = periodic_chain(8, k=10.0)
modes = phonon_modes(chain.force_constants(), chain.masses)
longitudinal = np.sort(modes.frequencies)[-8:]
print("solver   :", np.round(longitudinal, 3))
print("analytic :", np.round(np.sort(chain_dispersion(8, 10.0, 28.0855)), 3))

# %% [markdown]
# Project a relaxation pattern on the modes of a small cubic cluster. A
# rigid shift of every atom carries no Huang-Rhys weight.

# %%
cluster = cubic_cluster()
cph = phonon_modes(cluster.force_constants(), cluster.masses)
rng = np.random.default_rng(0)
dq = rng.normal(0.0, 0.004, (cluster.n_atoms, 3))
hr = partial_hr_factors(cph, dq)
rigid = partial_hr_factors(cph, np.tile([0.05, 0.0, 0.0], (cluster.n_atoms, 1)))
print(f"S(random) = {hr.total:.4f}   S(rigid) = {rigid.total:.1e}")

# %% [markdown]
# The zero-temperature lineshape: the zero-phonon weight is exp(-S).

# %%
res = pl_lineshape(hr, cph, zpl=0.95, broadening=2.0)
print(f"ZPL weight {res.zpl_weight:.4f} vs exp(-S) {np.exp(-hr.total):.4f}")
peak = res.energy[np.argmax(res.intensity)]
print(f"emission peak at {peak:.4f} eV")
