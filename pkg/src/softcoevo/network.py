"""Feedforward evaluation of NEAT genomes (as CPPNs) and of dense layered networks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .genome import Genome

ACTIVATION_CODES = {"sin": 0, "tanh": 1, "gauss": 2}


def gauss(x):
    return np.exp(-5.0 * np.square(x))


class CycleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CompiledCppn:
    """Evaluation plan for a genome.

    Nodes are grouped into dependency levels; each level is evaluated as one
    dense product ``W @ values``, which also vectorizes over a batch of inputs.
    """

    node_ids: tuple[int, ...]  # slot -> node id; inputs first, then topological order
    input_count: int
    output_slots: np.ndarray
    levels: tuple[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray], ...]  # (slots, W, bias, codes)

    @property
    def slot_count(self) -> int:
        return len(self.node_ids)

    @property
    def input_size(self) -> int:
        return self.input_count

    @property
    def output_size(self) -> int:
        return len(self.output_slots)

    def __call__(self, inputs) -> np.ndarray:
        return activate_cppn(self, inputs)


def compile(genome: Genome) -> CompiledCppn:  # noqa: A001 - mirrors the operation name
    inputs = genome.input_ids
    outputs = genome.output_ids
    others = [nid for nid in sorted(genome.nodes) if genome.nodes[nid].kind != "input"]
    enabled = [c for c in genome.connections.values() if c.enabled]

    incoming: dict[int, list] = {nid: [] for nid in genome.nodes}
    for c in enabled:
        incoming[c.target].append(c)

    depth = {nid: 0 for nid in inputs}
    pending = set(others)
    while pending:
        ready = sorted(n for n in pending if all(c.source in depth for c in incoming[n]))
        if not ready:
            raise CycleError("genome contains a cycle among enabled connections")
        for n in ready:
            depth[n] = 1 + max((depth[c.source] for c in incoming[n]), default=0)
        pending.difference_update(ready)

    order = sorted(others, key=lambda n: (depth[n], n))
    node_ids = tuple(inputs) + tuple(order)
    slot = {nid: i for i, nid in enumerate(node_ids)}
    levels = []
    for d in sorted({depth[n] for n in order}):
        members = [n for n in order if depth[n] == d]
        W = np.zeros((len(members), len(node_ids)))
        for row, n in enumerate(members):
            for c in incoming[n]:
                W[row, slot[c.source]] += c.weight
        bias = np.array([genome.nodes[n].bias for n in members])
        codes = np.array([ACTIVATION_CODES[genome.nodes[n].activation] for n in members])
        levels.append((np.array([slot[n] for n in members]), W, bias, codes))
    return CompiledCppn(node_ids, len(inputs), np.array([slot[n] for n in outputs]), tuple(levels))


def _apply(z: np.ndarray, codes: np.ndarray) -> np.ndarray:
    if (codes == 1).all():
        return np.tanh(z)
    out = np.empty_like(z)
    for code, fn in ((0, np.sin), (1, np.tanh), (2, gauss)):
        mask = codes == code
        if mask.any():
            out[mask] = fn(z[mask])
    return out


def activate_batch(net: CompiledCppn, inputs: np.ndarray) -> np.ndarray:
    """Evaluate ``inputs`` of shape (batch, input_count); returns (batch, output_count)."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != net.input_count:
        raise ValueError(f"expected inputs of shape (batch, {net.input_count}), got {inputs.shape}")
    values = np.zeros((net.slot_count, inputs.shape[0]))
    values[: net.input_count] = inputs.T
    for slots, W, bias, codes in net.levels:
        values[slots] = _apply(W @ values + bias[:, None], codes)
    return values[net.output_slots].T


def activate_cppn(net: CompiledCppn, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.input_count:
        raise ValueError(f"expected {net.input_count} inputs, got shape {x.shape}")
    return activate_batch(net, x[None, :])[0]


@dataclass(frozen=True, eq=False)
class LayeredNetwork:
    """Dense feedforward network; ``weights[k]`` has shape (size[k+1], size[k])."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[0] != b.shape[1]:
                raise ValueError("weight matrix shapes do not chain")
        if self.biases is None:
            object.__setattr__(self, "biases", tuple(np.zeros(w.shape[0]) for w in self.weights))

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_size(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def connection_count(self) -> int:
        return sum(w.size for w in self.weights)

    def __call__(self, inputs) -> np.ndarray:
        return activate_layered(self, inputs)


def activate_layered(net: LayeredNetwork, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.shape[-1] != net.input_size:
        raise ValueError(f"expected {net.input_size} inputs, got {x.shape[-1]}")
    for W, b in zip(net.weights, net.biases):
        x = np.tanh(x @ W.T + b)
    return x
