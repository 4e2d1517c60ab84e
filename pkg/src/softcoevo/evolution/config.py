from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace

from ..genome import DistanceCoefficients, MutationParams


@dataclass(frozen=True)
class EvolutionConfig:
    generations: int = 250
    population: int = 128
    grid_size: int = 5
    repetitions: int = 5
    compat_threshold: float = 3.5
    body_weight: float = 1.0  # multiplier of the body distance in the hybrid distance
    distance: DistanceCoefficients = field(default_factory=DistanceCoefficients)
    mutation: MutationParams = field(default_factory=MutationParams)
    max_stagnation: int = 20
    species_elitism: int = 1
    elitism: int = 2
    survival_threshold: float = 0.25
    min_species_size: int = 4
    crossover_prob: float = 0.75
    seed: int = 0
    # nested-loop baseline
    nested_population: int = 12
    inner_generations: int = 8
    # stop once this many episodes have been simulated (None = no budget)
    max_evaluations: int | None = None
    action_center: float = 1.1

    def __post_init__(self):
        rates = [
            self.survival_threshold,
            self.crossover_prob,
            *(getattr(self.mutation, f.name) for f in fields(self.mutation) if f.name.endswith(("rate", "prob"))),
        ]
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise ValueError("all rates must lie in [0, 1]")
        if self.population < 2 * self.min_species_size:
            raise ValueError("population must be at least twice min_species_size")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.elitism > self.min_species_size:
            raise ValueError("elitism cannot exceed min_species_size")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["mutation"]["activation_options"] = list(self.mutation.activation_options)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> EvolutionConfig:
        return build_dataclass(cls, data)


def build_dataclass(cls, data: dict, path: str = ""):
    """Strictly build a (nested) frozen dataclass from a mapping; unknown keys raise KeyError."""
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    defaults = cls()
    for key, value in data.items():
        if key not in known:
            raise KeyError(f"unknown configuration key {path + key!r}")
        current = getattr(defaults, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise TypeError(f"{path + key} must be an object")
            value = build_dataclass(type(current), value, f"{path}{key}.")
        elif isinstance(current, tuple):
            value = tuple(value)
        kwargs[key] = value
    return replace(defaults, **kwargs)
