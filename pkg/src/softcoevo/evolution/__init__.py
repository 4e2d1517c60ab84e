from .algorithms import (
    ALGORITHMS,
    BudgetExhausted,
    RunArtifacts,
    evolve,
    evolve_direct_baseline,
    evolve_nested_baseline,
    run_algorithm,
)
from .config import EvolutionConfig
from .reproduction import AllSpeciesExtinct, offspring_quotas, reproduce
from .speciation import EvaluatedIndividual, Species, SpeciesSet, hybrid_distance, speciate

__all__ = [
    "ALGORITHMS",
    "AllSpeciesExtinct",
    "BudgetExhausted",
    "EvaluatedIndividual",
    "EvolutionConfig",
    "RunArtifacts",
    "Species",
    "SpeciesSet",
    "evolve",
    "evolve_direct_baseline",
    "evolve_nested_baseline",
    "hybrid_distance",
    "offspring_quotas",
    "reproduce",
    "run_algorithm",
    "speciate",
]
