"""Two-part 3D substrate and expression of a CPPN into the body and control networks.

Morphology layers sit at z = 1, 2, 3 and controller layers at z = -1, -2, -3; the
halves are never connected to each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .genome import Genome
from .network import CompiledCppn, LayeredNetwork, activate_batch, compile

MAX_WEIGHT = 3.0
CPPN_INPUTS = 7  # (x1, y1, z1, x2, y2, z2, bias)
BIAS_INPUT = 1.0
MORPHOLOGY_LAYERS = (2, 3, 5)


@dataclass(frozen=True, eq=False)
class Substrate:
    role: str  # "morphology" | "controller"
    layers: tuple[np.ndarray, ...]  # each (count, 3)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(len(layer) for layer in self.layers)


@dataclass(frozen=True, eq=False)
class GenomePhenotypes:
    morphology_net: LayeredNetwork
    controller_net: LayeredNetwork


def _row(count: int, z: float) -> np.ndarray:
    xs = np.linspace(-1.0, 1.0, count) if count > 1 else np.zeros(1)
    return np.column_stack([xs, np.zeros(count), np.full(count, z)])


def grid_coordinates(n: int) -> np.ndarray:
    """(x, y) of an n x n grid in row-major order, row 0 on top, spanning [-1, 1]^2."""
    if n == 1:
        return np.zeros((1, 2))
    ticks = np.linspace(-1.0, 1.0, n)
    xs, ys = np.meshgrid(ticks, ticks[::-1])
    return np.column_stack([xs.ravel(), ys.ravel()])


def _plane(n: int, z: float) -> np.ndarray:
    xy = grid_coordinates(n)
    return np.column_stack([xy, np.full(len(xy), z)])


def _raster(count: int, z: float) -> np.ndarray:
    side = math.ceil(math.sqrt(count))
    return _plane(side, z)[:count]


def build_substrates(task_input_count: int, grid_size: int = 5) -> tuple[Substrate, Substrate]:
    if task_input_count < 1 or grid_size < 1:
        raise ValueError("substrate sizes must be positive")
    morphology = Substrate("morphology", tuple(_row(k, z) for k, z in zip(MORPHOLOGY_LAYERS, (1.0, 2.0, 3.0))))
    controller = Substrate(
        "controller",
        (_raster(task_input_count, -1.0), _plane(grid_size, -2.0), _plane(grid_size, -3.0)),
    )
    return morphology, controller


def _query_rows(sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """CPPN input rows for every (target, source) pair, target-major."""
    src = np.tile(sources, (len(targets), 1))
    tgt = np.repeat(targets, len(sources), axis=0)
    return np.column_stack([src, tgt, np.full(len(src), BIAS_INPUT)])


def query_weights(cppn: CompiledCppn, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Vectorized :func:`query_weight` over rows of coordinates."""
    rows = np.column_stack([np.atleast_2d(p1), np.atleast_2d(p2), np.full(len(np.atleast_2d(p1)), BIAS_INPUT)])
    return np.clip(activate_batch(cppn, rows)[:, 0], -MAX_WEIGHT, MAX_WEIGHT)


def query_weight(cppn: CompiledCppn, p1, p2) -> float:
    return float(query_weights(cppn, np.asarray(p1, dtype=float), np.asarray(p2, dtype=float))[0])


def express_substrate(cppn: CompiledCppn, substrate: Substrate) -> LayeredNetwork:
    weights = []
    for src, tgt in zip(substrate.layers, substrate.layers[1:]):
        out = activate_batch(cppn, _query_rows(src, tgt))[:, 0]
        weights.append(np.clip(out, -MAX_WEIGHT, MAX_WEIGHT).reshape(len(tgt), len(src)))
    return LayeredNetwork(tuple(weights))


def express(genome: Genome | CompiledCppn, substrates: tuple[Substrate, Substrate]) -> GenomePhenotypes:
    cppn = compile(genome) if isinstance(genome, Genome) else genome
    morphology, controller = substrates
    return GenomePhenotypes(express_substrate(cppn, morphology), express_substrate(cppn, controller))
