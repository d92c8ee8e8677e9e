"""Most-probable configurations and single-shot statistics of trapped non-interacting fermions."""
from .optimizer import AnnealSchedule, Pattern, anneal, refine
from .orbitals import Geometry, GeometryKind, OrbitalBasis, build_basis
from .sampler import SamplerParams, ShotSet, metropolis_chain, run_chains
from .wavefunction import Configuration, log_prob, one_particle_density, slater_matrix

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule", "Pattern", "anneal", "refine",
    "Geometry", "GeometryKind", "OrbitalBasis", "build_basis",
    "SamplerParams", "ShotSet", "metropolis_chain", "run_chains",
    "Configuration", "log_prob", "one_particle_density", "slater_matrix",
]
