"""Formation energies, stability windows and charge transition levels.

Run with ``python demos/01_formation_energies.py``.
"""

# %% [markdown]
# Each charge state of a defect gives a straight line in the Fermi level.
# The lower envelope over the band gap tells which charge is stable where,
# and the kinks are the charge transition levels.

# %%
from __future__ import annotations

import numpy as np

from qdscreen.curated import load_shipped_table1
from qdscreen.records import HostSpec
from qdscreen.thermo import (
    finite_size_correction,
    formation_diagram,
    formation_line,
    madelung_constant,
    stability_windows,
    window_transition_levels,
)

# %% [markdown]
# The point-charge correction for a simple-cubic cell. With L = 10 A and
# eps = 1 a singly charged defect costs about 2.04 eV of spurious energy.

# %%
cubic = HostSpec(lattice_vectors=np.eye(3) * 10.0, dielectric_constant=1.0)
print(f"Madelung constant (sc): {madelung_constant(cubic.lattice_vectors):.10f}")
for q in (1, 2, 3):
    print(f"  q={q}: correction {finite_size_correction(q, cubic):.4f} eV")

# %% [markdown]
# The shipped golden set holds two charge states per defect. Here is the Ti
# tetrahedral interstitial.

# %%
records, host, chempots = load_shipped_table1()
ti = [r for r in records if r.element == "Ti"]
lines = [formation_line(r, host, chempots) for r in ti]
for w in stability_windows(lines, host):
    print(f"  q={w.charge:+d} stable for E_F in [{w.fermi_lo:.3f}, {w.fermi_hi:.3f}] eV")
for level in window_transition_levels(stability_windows(lines, host)):
    print(f"  transition level {level}")

# %%
fermi, curves = formation_diagram(lines, host, samples=5)
for q, e in curves.items():
    print(f"  q={q:+d}: " + " ".join(f"{v:6.3f}" for v in e))
