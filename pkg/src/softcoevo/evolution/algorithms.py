"""Generational loops: single-genome HyperNEAT plus the direct-encoding and nested-loop baselines."""

from __future__ import annotations

import hashlib
import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..genome import Genome, InnovationRegistry, new_minimal_genome
from ..hyperneat import CPPN_INPUTS, build_substrates, express
from ..morphology import BodyGrid, cell_inputs, decode_body, decode_logits, validate_body
from ..network import CompiledCppn, activate_batch, activate_cppn, compile
from ..tasks import TaskSpec, run_episode
from .config import EvolutionConfig
from .reproduction import AllSpeciesExtinct, ReproductionReport, reproduce
from .speciation import EvaluatedIndividual, SpeciesSet, speciate

log = logging.getLogger(__name__)

ALGORITHMS = ("hyperneat", "direct", "nested")
WORKERS_ENV = "SOFTCOEVO_WORKERS"
BODY_TYPES = 5


class BudgetExhausted(Exception):
    pass


@dataclass
class RunArtifacts:
    algorithm: str
    task: str
    config: dict
    stats: list[dict] = field(default_factory=list)
    champions: list[dict] = field(default_factory=list)
    episode_log: list[float] = field(default_factory=list)  # fitness of every simulated episode, in order
    initial_genomes: list[Genome] = field(default_factory=list)
    final_genomes: list[Genome] = field(default_factory=list)
    complete: bool = True
    stop_reason: str | None = None
    events: list[str] = field(default_factory=list)

    @property
    def best_history(self) -> list[float]:
        return [row["best"] for row in self.stats]

    @property
    def evaluations(self) -> int:
        return len(self.episode_log)

    def best_within(self, budget: int) -> float | None:
        window = self.episode_log[:budget]
        return max(window) if window else None


# -- phenotype development ---------------------------------------------------


class DirectController:
    """Controller half of a single direct-encoding network: coordinate inputs held at 0."""

    def __init__(self, net: CompiledCppn, sensor_count: int, action_count: int):
        self.net = net
        self.input_size = sensor_count
        self.output_size = action_count
        self._buffer = np.zeros(2 + sensor_count)

    def __call__(self, obs) -> np.ndarray:
        self._buffer[2:] = obs
        return np.clip(activate_cppn(self.net, self._buffer)[BODY_TYPES:], -1.0, 1.0)


class NetworkController:
    """A NEAT network used directly as a controller (nested baseline inner loop)."""

    def __init__(self, net: CompiledCppn):
        self.net = net
        self.input_size = net.input_size
        self.output_size = net.output_size

    def __call__(self, obs) -> np.ndarray:
        return np.clip(activate_cppn(self.net, obs), -1.0, 1.0)


def hyperneat_phenotype(genome: Genome, task: TaskSpec, substrates) -> tuple[BodyGrid, Callable]:
    ph = express(genome, substrates)
    return decode_body(ph.morphology_net, task.grid_size), ph.controller_net


def direct_body(net: CompiledCppn, n: int, sensor_count: int) -> BodyGrid:
    coords = cell_inputs(n)
    inputs = np.zeros((len(coords), 2 + sensor_count))
    inputs[:, :2] = coords
    return decode_logits(activate_batch(net, inputs)[:, :BODY_TYPES], n)


def direct_phenotype(genome: Genome, task: TaskSpec) -> tuple[BodyGrid, Callable]:
    net = compile(genome)
    return direct_body(net, task.grid_size, task.input_count), DirectController(net, task.input_count, task.action_count)


def morphology_body(genome: Genome, n: int) -> BodyGrid:
    return decode_logits(activate_batch(compile(genome), cell_inputs(n)), n)


def _episode_fitness(body, controller, task, action_center) -> float:
    return run_episode(body, controller, task, action_center=action_center).fitness


def _develop_and_run(args) -> tuple[BodyGrid, bool, str | None, float | None]:
    algorithm, genome, task, action_center = args
    if algorithm == "hyperneat":
        body, controller = hyperneat_phenotype(genome, task, build_substrates(task.input_count, task.grid_size))
    else:
        body, controller = direct_phenotype(genome, task)
    ok, reason = validate_body(body)
    if not ok:
        return body, False, reason, None
    return body, True, None, _episode_fitness(body, controller, task, action_center)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


class Evaluator:
    """Develops genomes, filters invalid bodies and runs episodes, counting simulations."""

    def __init__(self, algorithm: str, task: TaskSpec, cfg: EvolutionConfig, artifacts: RunArtifacts):
        self.algorithm = algorithm
        self.task = task
        self.cfg = cfg
        self.artifacts = artifacts
        self.substrates = build_substrates(task.input_count, task.grid_size)
        self._cache: dict[tuple, tuple] = {}

    def _record(self, fitness: float) -> None:
        if self.cfg.max_evaluations is not None and len(self.artifacts.episode_log) >= self.cfg.max_evaluations:
            raise BudgetExhausted
        self.artifacts.episode_log.append(fitness)

    def develop(self, genome: Genome) -> tuple[BodyGrid, Callable]:
        if self.algorithm == "hyperneat":
            return hyperneat_phenotype(genome, self.task, self.substrates)
        return direct_phenotype(genome, self.task)

    def evaluate(self, genomes: list[Genome]) -> list[EvaluatedIndividual]:
        keys = [g.key() for g in genomes]
        todo = [i for i, k in enumerate(keys) if k not in self._cache]
        workers = worker_count()
        if self.cfg.max_evaluations is not None and todo:
            left = self.cfg.max_evaluations - len(self.artifacts.episode_log)
            if left <= 0:
                raise BudgetExhausted
        jobs = [(self.algorithm, genomes[i], self.task, self.cfg.action_center) for i in todo]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_develop_and_run, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
        else:
            results = []
            for job in jobs:
                results.append(_develop_and_run(job))
                if results[-1][1]:
                    self._record(results[-1][3])
            jobs = []
        for i, res in zip(todo, results):
            if jobs and res[1]:
                self._record(res[3])
            self._cache[keys[i]] = res
        out = []
        for idx, (g, k) in enumerate(zip(genomes, keys)):
            body, ok, reason, fit = self._cache[k]
            out.append(EvaluatedIndividual(g, body, fit, ok, reason, idx))
        # elites are the only repeats across generations
        self._cache = {k: self._cache[k] for k in keys}
        return out


# -- shared loop -------------------------------------------------------------


def _stats_row(generation: int, population: list[EvaluatedIndividual], species: SpeciesSet, evaluations: int) -> dict:
    fits = [p.fitness for p in population if p.valid]
    return {
        "generation": generation,
        "best": max(fits) if fits else math.nan,
        "mean": statistics.fmean(fits) if fits else math.nan,
        "median": statistics.median(fits) if fits else math.nan,
        "species_count": len(species),
        "valid_fraction": len(fits) / len(population) if population else 0.0,
        "evaluations_cumulative": evaluations,
    }


def _champion(algorithm, task, generation, population, cfg) -> dict | None:
    valid = [p for p in population if p.valid]
    if not valid:
        return None
    best = max(valid, key=lambda p: (p.fitness, -p.index))
    record = {
        "algorithm": algorithm,
        "task": task.id,
        "horizon": task.horizon,
        "generation": generation,
        "fitness": best.fitness,
        "body": best.body.to_list(),
        "genome": best.genome.to_dict(),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }
    if "controller_genome" in best.extra:
        record["controller_genome"] = best.extra["controller_genome"].to_dict()
    return record


def _rng(cfg: EvolutionConfig, *stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *stream])


Callback = Callable[[dict, dict | None], None]


def _generational_loop(
    algorithm: str,
    cfg: EvolutionConfig,
    task: TaskSpec,
    population_size: int,
    input_count: int,
    output_count: int,
    evaluate: Callable[[list[Genome]], list[EvaluatedIndividual]],
    artifacts: RunArtifacts,
    distance=None,
    on_generation: Callback | None = None,
) -> RunArtifacts:
    registry = InnovationRegistry(input_count, output_count)

    def fresh(stream: int) -> list[Genome]:
        rng = _rng(cfg, stream)
        return [new_minimal_genome(input_count, output_count, rng, registry) for _ in range(population_size)]

    genomes = fresh(0)
    artifacts.initial_genomes = list(genomes)
    species = None
    sub_cfg = replace(cfg, population=population_size) if population_size != cfg.population else cfg
    try:
        for gen in range(cfg.generations):
            population = evaluate(genomes)
            species = speciate(population, species, sub_cfg, distance=distance, generation=gen)
            row = _stats_row(gen, population, species, len(artifacts.episode_log))
            champion = _champion(algorithm, task, gen, population, cfg)
            artifacts.stats.append(row)
            artifacts.champions.append(champion)
            if on_generation:
                on_generation(row, champion)
            log.info("gen %d best=%.4f species=%d valid=%.2f", gen, row["best"], row["species_count"], row["valid_fraction"])
            if gen == cfg.generations - 1:
                break
            try:
                genomes = reproduce(species, sub_cfg, registry, _rng(cfg, 1, gen), population_size, ReproductionReport())
            except AllSpeciesExtinct:
                msg = f"generation {gen}: no valid bodies left, reseeding from minimal genomes"
                log.warning(msg)
                artifacts.events.append(msg)
                genomes = fresh(10_000 + gen)
                species = None
    except BudgetExhausted:
        artifacts.stop_reason = f"evaluation budget of {cfg.max_evaluations} episodes exhausted"
        log.info(artifacts.stop_reason)
    artifacts.final_genomes = list(genomes)
    return artifacts


# -- algorithms ----------------------------------------------------------------


def evolve(cfg: EvolutionConfig, task: TaskSpec, on_generation: Callback | None = None) -> RunArtifacts:
    """Single-genome co-evolution: one CPPN expresses both the body and the controller."""
    artifacts = RunArtifacts("hyperneat", task.id, cfg.to_dict())
    evaluator = Evaluator("hyperneat", task, cfg, artifacts)
    return _generational_loop(
        "hyperneat", cfg, task, cfg.population, CPPN_INPUTS, 1, evaluator.evaluate, artifacts, on_generation=on_generation
    )


def evolve_direct_baseline(cfg: EvolutionConfig, task: TaskSpec, on_generation: Callback | None = None) -> RunArtifacts:
    """One NEAT network: coordinates + sensors in, 5 type logits + one action per cell out."""
    artifacts = RunArtifacts("direct", task.id, cfg.to_dict())
    evaluator = Evaluator("direct", task, cfg, artifacts)
    return _generational_loop(
        "direct",
        cfg,
        task,
        cfg.population,
        2 + task.input_count,
        BODY_TYPES + task.action_count,
        evaluator.evaluate,
        artifacts,
        on_generation=on_generation,
    )


def body_seed(body: BodyGrid) -> int:
    return int.from_bytes(hashlib.sha256(body.digest().encode()).digest()[:8], "little")


class NestedEvaluator:
    """Outer genomes encode bodies; each new valid body gets its own controller NEAT run."""

    def __init__(self, task: TaskSpec, cfg: EvolutionConfig, artifacts: RunArtifacts):
        self.task = task
        self.cfg = cfg
        self.artifacts = artifacts
        self.inner_cfg = replace(cfg, population=cfg.nested_population, generations=cfg.inner_generations, body_weight=0.0)
        self.body_cache: dict[BodyGrid, tuple[float, Genome]] = {}
        self.inner_runs = 0

    def _record(self, fitness: float) -> None:
        if self.cfg.max_evaluations is not None and len(self.artifacts.episode_log) >= self.cfg.max_evaluations:
            raise BudgetExhausted
        self.artifacts.episode_log.append(fitness)

    def train_controller(self, body: BodyGrid) -> tuple[float, Genome]:
        """Cold-started inner NEAT run; returns the best fitness and its controller genome."""
        self.inner_runs += 1
        task, inner = self.task, self.inner_cfg
        registry = InnovationRegistry(task.input_count, task.action_count)
        seed = body_seed(body)
        rng = np.random.default_rng([self.cfg.seed, 2, seed])
        genomes = [new_minimal_genome(task.input_count, task.action_count, rng, registry) for _ in range(inner.population)]
        best = (-math.inf, genomes[0])
        species = None
        for gen in range(inner.generations):
            population = []
            for idx, g in enumerate(genomes):
                fit = _episode_fitness(body, NetworkController(compile(g)), task, self.cfg.action_center)
                self._record(fit)
                population.append(EvaluatedIndividual(g, body, fit, True, None, idx))
                if fit > best[0]:
                    best = (fit, g)
            if gen == inner.generations - 1:
                break
            species = speciate(population, species, inner, generation=gen)
            genomes = reproduce(species, inner, registry, np.random.default_rng([self.cfg.seed, 3, seed, gen]))
        return best

    def evaluate(self, genomes: list[Genome]) -> list[EvaluatedIndividual]:
        out = []
        for idx, g in enumerate(genomes):
            body = morphology_body(g, self.task.grid_size)
            ok, reason = validate_body(body)
            if not ok:
                out.append(EvaluatedIndividual(g, body, None, False, reason, idx))
                continue
            if body not in self.body_cache:
                self.body_cache[body] = self.train_controller(body)
            fit, controller = self.body_cache[body]
            out.append(EvaluatedIndividual(g, body, fit, True, None, idx, {"controller_genome": controller}))
        return out


def effective_config(algorithm: str, cfg: EvolutionConfig) -> EvolutionConfig:
    """The configuration a run actually uses; the nested baseline speciates on genomes only."""
    return replace(cfg, body_weight=0.0) if algorithm == "nested" else cfg


def evolve_nested_baseline(cfg: EvolutionConfig, task: TaskSpec, on_generation: Callback | None = None) -> RunArtifacts:
    outer = effective_config("nested", cfg)
    artifacts = RunArtifacts("nested", task.id, outer.to_dict())
    evaluator = NestedEvaluator(task, outer, artifacts)
    return _generational_loop(
        "nested",
        outer,
        task,
        cfg.nested_population,
        2,
        BODY_TYPES,
        evaluator.evaluate,
        artifacts,
        on_generation=on_generation,
    )


RUNNERS = {"hyperneat": evolve, "direct": evolve_direct_baseline, "nested": evolve_nested_baseline}


def run_algorithm(algorithm: str, cfg: EvolutionConfig, task: TaskSpec, on_generation: Callback | None = None) -> RunArtifacts:
    try:
        runner = RUNNERS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}") from None
    return runner(cfg, task, on_generation)
