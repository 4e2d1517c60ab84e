"""Stagnation, offspring quotas, elitism and variation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..genome import Genome, InnovationRegistry, crossover, mutate, order_parents
from .config import EvolutionConfig
from .speciation import Species, SpeciesSet

log = logging.getLogger(__name__)


@dataclass
class ReproductionReport:
    removed_stagnant: list[int] = field(default_factory=list)
    removed_capacity: list[int] = field(default_factory=list)
    extinct: list[int] = field(default_factory=list)
    quotas: dict[int, int] = field(default_factory=dict)
    reseeded: bool = False


class AllSpeciesExtinct(RuntimeError):
    pass


def update_stagnation(species: SpeciesSet, cfg: EvolutionConfig) -> list[Species]:
    """Refresh best-ever bookkeeping; return the species allowed to reproduce, fittest first."""
    live = []
    for sp in species.ordered():
        fit = sp.fitness
        if fit is None:
            continue
        if fit > sp.best_fitness:
            sp.best_fitness = fit
            sp.last_improved = species.generation
        live.append(sp)
    live.sort(key=lambda s: (-s.fitness, s.id))
    protected = {s.id for s in live[: cfg.species_elitism]}
    return [s for s in live if s.id in protected or species.generation - s.last_improved <= cfg.max_stagnation]


def offspring_quotas(scores: dict[int, float], total: int, minimum: int) -> dict[int, int]:
    """Split ``total`` proportionally to ``scores`` with a per-species floor of ``minimum``."""
    fixed: dict[int, float] = {}
    free = list(scores)
    while True:
        remaining = total - minimum * len(fixed)
        weight = sum(scores[s] for s in free)
        if weight > 0:
            raw = {s: remaining * scores[s] / weight for s in free}
        else:
            raw = {s: remaining / len(free) for s in free}
        low = [s for s in free if raw[s] < minimum]
        if not low:
            break
        for s in low:
            fixed[s] = minimum
            free.remove(s)
        if not free:
            raw = {}
            break
    quotas = {s: minimum for s in fixed}
    quotas.update({s: int(math.floor(v)) for s, v in raw.items()})
    leftover = total - sum(quotas.values())
    by_remainder = sorted(raw, key=lambda s: (-(raw[s] - math.floor(raw[s])), list(scores).index(s)))
    for s in by_remainder[:leftover]:
        quotas[s] += 1
    return quotas


def reproduce(
    species: SpeciesSet,
    cfg: EvolutionConfig,
    registry: InnovationRegistry,
    rng: np.random.Generator,
    population_size: int | None = None,
    report: ReproductionReport | None = None,
) -> list[Genome]:
    """Build the next generation's genomes.

    Raises :class:`AllSpeciesExtinct` when no species has a valid member left;
    the caller decides how to reseed.
    """
    pop = population_size or cfg.population
    report = report if report is not None else ReproductionReport()
    before = {s.id for s in species.ordered()}
    with_valid = {s.id for s in species.ordered() if s.fitness is not None}
    report.extinct = sorted(before - with_valid)
    survivors = update_stagnation(species, cfg)
    report.removed_stagnant = sorted(with_valid - {s.id for s in survivors})
    if not survivors:
        raise AllSpeciesExtinct("no species has a valid member")

    capacity = max(1, pop // cfg.min_species_size)
    if len(survivors) > capacity:
        report.removed_capacity = [s.id for s in survivors[capacity:]]
        survivors = survivors[:capacity]

    valid_fitness = [m.fitness for s in survivors for m in s.valid_members]
    floor = min(valid_fitness)
    # explicit fitness sharing: each member's shifted fitness divided by its species' size
    scores = {}
    for s in sorted(survivors, key=lambda s: s.id):
        valid = s.valid_members
        shared = [(m.fitness - floor) / len(valid) for m in valid]
        scores[s.id] = sum(shared)
    quotas = offspring_quotas(scores, pop, cfg.min_species_size)
    report.quotas = quotas

    offspring: list[Genome] = []
    for s in sorted(survivors, key=lambda s: s.id):
        offspring.extend(_breed(s, quotas[s.id], cfg, registry, rng))
    assert len(offspring) == pop
    return offspring


def ranked_parents(s: Species) -> list[Genome]:
    ranked = sorted(s.valid_members, key=lambda m: (-m.fitness, m.index))
    return [m.genome.with_fitness(m.fitness) for m in ranked]


def _breed(s: Species, quota: int, cfg: EvolutionConfig, registry, rng) -> list[Genome]:
    ranked = ranked_parents(s)
    children = [g for g in ranked[: min(cfg.elitism, quota)]]
    cutoff = max(math.ceil(cfg.survival_threshold * len(ranked)), min(2, len(ranked)))
    parents = ranked[:cutoff]
    while len(children) < quota:
        if len(parents) > 1 and rng.random() < cfg.crossover_prob:
            i, j = rng.integers(len(parents), size=2)
            fitter, other = order_parents(parents[i], parents[j])
            child = crossover(fitter, other, rng)
        else:
            child = parents[rng.integers(len(parents))]
        children.append(mutate(child, registry, cfg.mutation, rng))
    return children
