"""Body/brain co-evolution of 2D voxel soft robots with a single HyperNEAT genome."""

from .genome import Genome, InnovationRegistry, MutationParams, crossover, genotypic_distance, mutate
from .hyperneat import build_substrates, express
from .morphology import BodyGrid, VoxelType, body_distance, decode_body, validate_body
from .tasks import TASK_IDS, make_task, run_episode

__version__ = "0.1.0"

__all__ = [
    "BodyGrid",
    "Genome",
    "InnovationRegistry",
    "MutationParams",
    "TASK_IDS",
    "VoxelType",
    "body_distance",
    "build_substrates",
    "crossover",
    "decode_body",
    "express",
    "genotypic_distance",
    "make_task",
    "mutate",
    "run_episode",
    "validate_body",
]
