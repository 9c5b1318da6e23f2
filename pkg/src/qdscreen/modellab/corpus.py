"""Turn model specifications into schema-valid defect records.

Energies are moved into a VBM-referenced frame: the defect-free host band
minimum of the model is placed at the host band gap, so the model's
conduction-like states start at E_g and bound levels fall inside the gap.
Corrected levels are single-shot expectation values of the refined
Hamiltonian on the base states.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from ..electronic import single_shot_levels
from ..phonons import finite_displacement_force_constants
from ..records import SITES, ChemPotSet, DefectRecord, EnergyLevelSet, HostSpec, PlaneWaveState, Wavefunctions
from .ballspring import BallSpringModel, breathing_pattern, cubic_cluster
from .configcoord import ConfigCoordSpec, relax_and_excite, states_at
from .wells import ModelError, WellModelSpec, host_band_minimum, miller_set, solve_well

N_LEVELS = 12

ModelSpec = Union[WellModelSpec, ConfigCoordSpec]


@dataclass(frozen=True)
class RecordLabel:
    element: str
    site: str
    charge: int


def model_host(band_gap: float = 1.114, cell_length: float = 60.0) -> HostSpec:
    """Host matching the model frame: zero bulk energy, cubic cell."""
    return HostSpec(
        band_gap=band_gap,
        refractive_index=3.8,
        dielectric_constant=11.7,
        lattice_vectors=np.eye(3) * cell_length,
        bulk_total_energy=0.0,
    )


def model_chempots(elements: Sequence[str], host: HostSpec | None = None) -> ChemPotSet:
    host = host or model_host()
    return ChemPotSet({**{e: 0.0 for e in elements}, host.host_element: 0.0}, "model-lab")


def energy_reference(spec: WellModelSpec, host: HostSpec) -> float:
    """Absolute model energy that maps to the VBM."""
    return host_band_minimum(spec) - host.band_gap


def _well(spec: ModelSpec) -> WellModelSpec:
    return spec.well if isinstance(spec, ConfigCoordSpec) else spec


def build_record(
    spec: ModelSpec,
    label: RecordLabel,
    host: HostSpec | None = None,
    *,
    n_levels: int = N_LEVELS,
    phonon_model: BallSpringModel | None = None,
    provenance: str = "model-lab",
) -> DefectRecord:
    host = host or model_host()
    well = _well(spec)
    ref = energy_reference(well, host)
    n_levels = min(n_levels, len(miller_set(well)))
    if max(well.electrons_up, well.electrons_down) >= n_levels:
        raise ModelError("too many electrons for the stored levels")

    q_ground = 0.0
    excited = None
    displacement = masses = fc = None
    if isinstance(spec, ConfigCoordSpec):
        q_ground, total = relax_and_excite(spec, "ground", ref)
        if well.electrons_up > 0:
            q_exc, excited = relax_and_excite(spec, "promoted", ref)
            if phonon_model is not None:
                pattern = breathing_pattern(phonon_model)
                displacement = (q_exc - q_ground) * pattern
                masses = phonon_model.masses
                fc = finite_displacement_force_constants(phonon_model.forces, phonon_model.positions)
        g, _, evals, evecs = states_at(spec, q_ground)
        _, h_ref, _, _ = states_at(spec, q_ground, "refined")
    else:
        base = solve_well(well)
        refined = solve_well(well, "refined", check_convergence=False)
        g, evals, evecs, h_ref = base.basis, base.energies, base.vectors, refined.hamiltonian
        total = float((evals[: well.electrons_up] - ref).sum() + (evals[: well.electrons_down] - ref).sum())

    states = [PlaneWaveState(g, evecs[:, i], float(evals[i] - ref), "both", i) for i in range(n_levels)]
    base_levels = EnergyLevelSet(tuple(float(e - ref) for e in evals[:n_levels]))
    shifted_h = h_ref - ref * np.eye(len(h_ref))
    corrected = single_shot_levels(states, shifted_h)
    occ = {
        "up": tuple(1.0 if i < well.electrons_up else 0.0 for i in range(n_levels)),
        "down": tuple(1.0 if i < well.electrons_down else 0.0 for i in range(n_levels)),
    }
    return DefectRecord(
        element=label.element,
        site=label.site,
        charge=label.charge,
        total_energy=float(total),
        level_sets={
            "base": {"up": base_levels, "down": base_levels},
            "corrected": {"up": corrected, "down": corrected},
        },
        occupations=occ,
        wavefunctions=Wavefunctions(well.lattice, states),
        excited_total_energy=None if excited is None else float(excited),
        displacement_vector=displacement,
        masses=masses,
        force_constants=fc,
        provenance=provenance,
    )


def generate_corpus(
    specs: Sequence[ModelSpec],
    labels: Sequence[RecordLabel],
    host: HostSpec | None = None,
    **kwargs,
) -> list[DefectRecord]:
    if len(specs) != len(labels):
        raise ValueError("one label per spec is required")
    return [build_record(s, lab, host, **kwargs) for s, lab in zip(specs, labels)]


def ionized(spec: ModelSpec) -> ModelSpec:
    """Same defect with one up electron removed (charge + 1)."""
    well = _well(spec)
    if well.electrons_up == 0:
        raise ModelError("no electron to remove")
    well = replace(well, electrons_up=well.electrons_up - 1)
    return replace(spec, well=well) if isinstance(spec, ConfigCoordSpec) else well


def donor_family(
    spec: ModelSpec, element: str, site: str = "tet_interstitial", charge: int = 0
) -> tuple[list[ModelSpec], list[RecordLabel]]:
    """Neutral donor plus its ionized companion, enough for a (q+1/q) level."""
    return [spec, ionized(spec)], [RecordLabel(element, site, charge), RecordLabel(element, site, charge + 1)]


def tuned_donor_spec() -> ConfigCoordSpec:
    """A model defect that clears every screening tier at default thresholds."""
    return ConfigCoordSpec(WellModelSpec(), spring_k=10.0, coupling=1.0)


def tuned_finalist_records(
    element: str = "Xm", host: HostSpec | None = None, phonon_model: BallSpringModel | None = None
) -> list[DefectRecord]:
    specs, labels = donor_family(tuned_donor_spec(), element)
    return [
        build_record(specs[0], labels[0], host, phonon_model=phonon_model),
        build_record(specs[1], labels[1], host),
    ]


def random_specs(n: int, seed: int = 0) -> tuple[list[ConfigCoordSpec], list[RecordLabel]]:
    """Seeded random configuration-coordinate defects with unique identities."""
    rng = np.random.default_rng(seed)
    specs, labels = [], []
    for i in range(n):
        well = WellModelSpec(
            defect_depth=float(rng.uniform(2.2, 3.4)),
            defect_width=float(rng.uniform(0.5, 0.8)),
            tail_depth=float(rng.uniform(0.1, 0.3)),
            refined_scale=float(rng.uniform(0.9, 1.1)),
            electrons_up=1,
            electrons_down=int(rng.integers(0, 2)),
        )
        specs.append(
            ConfigCoordSpec(well, spring_k=float(rng.uniform(5.0, 20.0)), coupling=float(rng.uniform(0.0, 2.0)))
        )
        labels.append(RecordLabel(f"M{i:03d}", SITES[int(rng.integers(0, 3))], int(rng.integers(-2, 3))))
    return specs, labels


def default_phonon_model() -> BallSpringModel:
    return cubic_cluster()
