"""Synthetic oracle models: plane-wave defect wells, a configuration-coordinate
defect and ball-spring lattices, plus a generator turning them into records."""

from .ballspring import BallSpringModel, Bond, chain_dispersion, cubic_cluster, periodic_chain
from .configcoord import ConfigCoordSpec, relax_and_excite
from .corpus import RecordLabel, build_record, generate_corpus, model_chempots, model_host, random_specs
from .wells import ModelError, WellModelSpec, hamiltonian, solve_well

__all__ = [
    "BallSpringModel",
    "Bond",
    "ConfigCoordSpec",
    "ModelError",
    "RecordLabel",
    "WellModelSpec",
    "build_record",
    "chain_dispersion",
    "cubic_cluster",
    "generate_corpus",
    "hamiltonian",
    "model_chempots",
    "model_host",
    "periodic_chain",
    "random_specs",
    "relax_and_excite",
    "solve_well",
]
