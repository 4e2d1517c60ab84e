"""Hybrid genotype + body speciation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

from ..genome import Genome, genotypic_distance
from ..morphology import BodyGrid, body_distance
from .config import EvolutionConfig


@dataclass(eq=False)
class EvaluatedIndividual:
    genome: Genome
    body: BodyGrid
    fitness: float | None = None
    valid: bool = False
    reason: str | None = None
    index: int = 0
    extra: dict[str, Any] = field(default_factory=dict)  # e.g. the nested baseline's controller genome

    def __post_init__(self):
        if self.valid != (self.fitness is not None):
            raise ValueError("fitness must be present exactly for valid individuals")


def hybrid_distance(a: EvaluatedIndividual, b: EvaluatedIndividual, cfg: EvolutionConfig) -> float:
    d = genotypic_distance(a.genome, b.genome, cfg.distance)
    if cfg.body_weight:
        d += cfg.body_weight * body_distance(a.body, b.body)
    return d


@dataclass(eq=False)
class Species:
    id: int
    representative: EvaluatedIndividual
    members: list[EvaluatedIndividual]
    created: int
    best_fitness: float = -math.inf
    last_improved: int = 0

    @property
    def valid_members(self) -> list[EvaluatedIndividual]:
        return [m for m in self.members if m.valid]

    @property
    def fitness(self) -> float | None:
        scores = [m.fitness for m in self.members if m.valid]
        return max(scores) if scores else None


@dataclass(eq=False)
class SpeciesSet:
    species: dict[int, Species] = field(default_factory=dict)
    next_id: int = 1
    generation: int = 0

    def __len__(self) -> int:
        return len(self.species)

    def ordered(self) -> list[Species]:
        return [self.species[k] for k in sorted(self.species)]

    def membership(self) -> dict[int, int]:
        """individual index -> species id"""
        return {m.index: s.id for s in self.species.values() for m in s.members}


Distance = Callable[[EvaluatedIndividual, EvaluatedIndividual], float]


def speciate(
    population: list[EvaluatedIndividual],
    previous: SpeciesSet | None,
    cfg: EvolutionConfig,
    distance: Distance | None = None,
    generation: int | None = None,
) -> SpeciesSet:
    """First-match assignment against representatives, species scanned in ascending id.

    Representatives come from ``previous``; an individual matching none founds a
    new species and becomes its representative. Afterwards each surviving
    species' representative is replaced by the member closest to the old one.
    """
    if distance is None:
        def distance(a, b):
            return hybrid_distance(a, b, cfg)

    previous = previous or SpeciesSet()
    if generation is None:
        generation = previous.generation + 1 if previous.species else 0
    gen = generation
    result = SpeciesSet(next_id=previous.next_id, generation=gen)
    for old in previous.ordered():
        result.species[old.id] = Species(
            old.id, old.representative, [], old.created, old.best_fitness, old.last_improved
        )

    for ind in population:
        home = None
        for sid in sorted(result.species):
            if distance(ind, result.species[sid].representative) < cfg.compat_threshold:
                home = result.species[sid]
                break
        if home is None:
            home = Species(result.next_id, ind, [], gen, last_improved=gen)
            result.species[home.id] = home
            result.next_id += 1
        home.members.append(ind)

    for sid in list(result.species):
        sp = result.species[sid]
        if not sp.members:
            del result.species[sid]
            continue
        old_rep = sp.representative
        sp.representative = min(sp.members, key=lambda m: (distance(m, old_rep), m.index))
    return result
