"""NEAT genomes: node/connection genes, variation operators and genotypic distance.

Genomes are treated as immutable values. Every operator returns a new
:class:`Genome`; the only shared mutable state is the :class:`InnovationRegistry`,
which must be confined to the (single-threaded) reproduction phase.

Node numbering convention:
    - inputs:  ``[0, input_count)``
    - outputs: ``[input_count, input_count + output_count)``
    - hidden:  allocated by the registry from ``input_count + output_count`` up
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

ACTIVATIONS = ("sin", "tanh", "gauss")
WEIGHT_LIMIT = 8.0


@dataclass(frozen=True, slots=True)
class NodeGene:
    id: int
    kind: str  # "input" | "hidden" | "output"
    activation: str | None = None
    bias: float = 0.0


@dataclass(frozen=True, slots=True)
class ConnectionGene:
    innovation: int
    source: int
    target: int
    weight: float
    enabled: bool = True


@dataclass(frozen=True)
class Genome:
    nodes: dict[int, NodeGene]
    connections: dict[int, ConnectionGene]  # keyed by innovation
    fitness: float | None = None

    @property
    def input_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind == "input")

    @property
    def output_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind == "output")

    @property
    def hidden_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind == "hidden")

    def size(self) -> tuple[int, int]:
        return len(self.nodes), sum(c.enabled for c in self.connections.values())

    def key(self) -> tuple:
        """Hashable structural+numerical identity (fitness excluded)."""
        nodes = tuple((n.id, n.kind, n.activation, n.bias) for n in sorted(self.nodes.values(), key=_node_id))
        conns = tuple(
            (c.innovation, c.source, c.target, c.weight, c.enabled)
            for c in sorted(self.connections.values(), key=_innovation)
        )
        return nodes, conns

    def with_fitness(self, fitness: float | None) -> Genome:
        return replace(self, fitness=fitness)

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "kind": n.kind, "activation": n.activation, "bias": n.bias}
                for n in sorted(self.nodes.values(), key=_node_id)
            ],
            "connections": [
                {
                    "innovation": c.innovation,
                    "source": c.source,
                    "target": c.target,
                    "weight": c.weight,
                    "enabled": c.enabled,
                }
                for c in sorted(self.connections.values(), key=_innovation)
            ],
            "fitness": self.fitness,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Genome:
        nodes = {
            int(d["id"]): NodeGene(int(d["id"]), d["kind"], d.get("activation"), float(d.get("bias", 0.0)))
            for d in data["nodes"]
        }
        conns = {
            int(d["innovation"]): ConnectionGene(
                int(d["innovation"]), int(d["source"]), int(d["target"]), float(d["weight"]), bool(d["enabled"])
            )
            for d in data["connections"]
        }
        fitness = data.get("fitness")
        genome = cls(nodes, conns, None if fitness is None else float(fitness))
        check_genome(genome)
        return genome

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> Genome:
        return cls.from_dict(json.loads(text))


def _node_id(n: NodeGene) -> int:
    return n.id


def _innovation(c: ConnectionGene) -> int:
    return c.innovation


class InnovationRegistry:
    """Historical markings shared by one population.

    The (source, target) -> innovation map is kept for the whole run, which is a
    superset of the per-generation guarantee NEAT needs. Input->output pairs are
    pre-registered in row-major order so that minimal genomes built without a
    registry use the same numbers.
    """

    def __init__(self, input_count: int, output_count: int):
        self.input_count = input_count
        self.output_count = output_count
        self._innovations: dict[tuple[int, int], int] = {}
        self._split_nodes: dict[int, int] = {}
        for i in range(input_count):
            for j in range(output_count):
                self._innovations[(i, input_count + j)] = i * output_count + j
        self.next_innovation = input_count * output_count
        self.next_node_id = input_count + output_count

    def connection(self, source: int, target: int) -> int:
        key = (source, target)
        if key not in self._innovations:
            self._innovations[key] = self.next_innovation
            self.next_innovation += 1
        return self._innovations[key]

    def split_node(self, innovation: int) -> int:
        """Node id created when the connection ``innovation`` is split."""
        if innovation not in self._split_nodes:
            self._split_nodes[innovation] = self.next_node_id
            self.next_node_id += 1
        return self._split_nodes[innovation]


@dataclass(frozen=True)
class MutationParams:
    activation_default: str = "tanh"
    activation_mutate_rate: float = 0.2
    activation_options: tuple[str, ...] = ACTIVATIONS
    bias_mutate_power: float = 0.2
    bias_mutate_rate: float = 0.8
    bias_replace_rate: float = 0.2
    conn_add_prob: float = 0.2
    conn_delete_prob: float = 0.2
    node_add_prob: float = 0.2
    node_delete_prob: float = 0.2
    weight_mutate_power: float = 0.2
    weight_mutate_rate: float = 0.8
    weight_replace_rate: float = 0.2

    @classmethod
    def zero(cls) -> MutationParams:
        return cls(
            activation_mutate_rate=0.0,
            bias_mutate_rate=0.0,
            bias_replace_rate=0.0,
            conn_add_prob=0.0,
            conn_delete_prob=0.0,
            node_add_prob=0.0,
            node_delete_prob=0.0,
            weight_mutate_rate=0.0,
            weight_replace_rate=0.0,
        )


class GenomeError(ValueError):
    pass


def new_minimal_genome(
    input_count: int,
    output_count: int,
    rng: np.random.Generator,
    registry: InnovationRegistry | None = None,
    activation: str = "tanh",
) -> Genome:
    """Fully connected input->output genome with uniform [-1, 1] weights and biases."""
    if input_count <= 0 or output_count <= 0:
        raise GenomeError("input_count and output_count must be positive")
    nodes: dict[int, NodeGene] = {i: NodeGene(i, "input") for i in range(input_count)}
    biases = rng.uniform(-1.0, 1.0, output_count)
    for j in range(output_count):
        nid = input_count + j
        nodes[nid] = NodeGene(nid, "output", activation, float(biases[j]))
    weights = rng.uniform(-1.0, 1.0, input_count * output_count)
    conns: dict[int, ConnectionGene] = {}
    for i in range(input_count):
        for j in range(output_count):
            target = input_count + j
            if registry is None:
                innov = i * output_count + j
            else:
                innov = registry.connection(i, target)
            conns[innov] = ConnectionGene(innov, i, target, float(weights[i * output_count + j]))
    return Genome(nodes, conns)


def _reachable(start: int, adjacency: dict[int, list[int]]) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adjacency.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def _adjacency(connections: Iterable[ConnectionGene]) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {}
    for c in connections:
        adj.setdefault(c.source, []).append(c.target)
    return adj


def creates_cycle(connections: Iterable[ConnectionGene], source: int, target: int) -> bool:
    if source == target:
        return True
    return source in _reachable(target, _adjacency(connections))


def is_acyclic(genome: Genome, enabled_only: bool = False) -> bool:
    conns = [c for c in genome.connections.values() if c.enabled or not enabled_only]
    indegree = {nid: 0 for nid in genome.nodes}
    adj = _adjacency(conns)
    for c in conns:
        indegree[c.target] += 1
    ready = [n for n, d in indegree.items() if d == 0]
    visited = 0
    while ready:
        n = ready.pop()
        visited += 1
        for m in adj.get(n, ()):
            indegree[m] -= 1
            if indegree[m] == 0:
                ready.append(m)
    return visited == len(indegree)


def check_genome(genome: Genome) -> None:
    pairs = set()
    for innov, c in genome.connections.items():
        if innov != c.innovation:
            raise GenomeError(f"connection keyed {innov} carries innovation {c.innovation}")
        if c.source not in genome.nodes or c.target not in genome.nodes:
            raise GenomeError(f"connection {innov} references a missing node")
        if genome.nodes[c.target].kind == "input":
            raise GenomeError(f"connection {innov} targets an input node")
        if (c.source, c.target) in pairs:
            raise GenomeError(f"duplicate connection {c.source}->{c.target}")
        pairs.add((c.source, c.target))
    for n in genome.nodes.values():
        if n.kind == "input":
            if n.activation is not None or n.bias != 0.0:
                raise GenomeError(f"input node {n.id} carries an activation or bias")
        elif n.activation not in ACTIVATIONS:
            raise GenomeError(f"node {n.id} has unknown activation {n.activation!r}")
    if not is_acyclic(genome):
        raise GenomeError("genome graph contains a cycle")


def _perturb(values: np.ndarray, rate: float, replace_rate: float, power: float, rng) -> np.ndarray:
    # One draw of each kind per gene regardless of outcome keeps RNG consumption fixed.
    r = rng.random(values.size)
    noise = rng.normal(0.0, power, values.size) if values.size else np.zeros(0)
    fresh = rng.uniform(-1.0, 1.0, values.size)
    out = np.where(r < rate, values + noise, values)
    out = np.where((r >= rate) & (r < rate + replace_rate), fresh, out)
    return np.clip(out, -WEIGHT_LIMIT, WEIGHT_LIMIT)


def mutate(genome: Genome, registry: InnovationRegistry, params: MutationParams, rng: np.random.Generator) -> Genome:
    nodes = dict(genome.nodes)
    conns = dict(genome.connections)

    if rng.random() < params.node_add_prob:
        _add_node(nodes, conns, registry, params, rng)
    if rng.random() < params.node_delete_prob:
        _delete_node(nodes, conns, rng)
    if rng.random() < params.conn_add_prob:
        _add_connection(nodes, conns, registry, rng)
    if rng.random() < params.conn_delete_prob and conns:
        keys = sorted(conns)
        del conns[keys[rng.integers(len(keys))]]

    keys = sorted(conns)
    if params.weight_mutate_rate > 0 or params.weight_replace_rate > 0:
        weights = np.array([conns[k].weight for k in keys])
        new = _perturb(weights, params.weight_mutate_rate, params.weight_replace_rate, params.weight_mutate_power, rng)
        for k, w in zip(keys, new):
            if w != conns[k].weight:
                conns[k] = replace(conns[k], weight=float(w))

    mutable = [nid for nid in sorted(nodes) if nodes[nid].kind != "input"]
    if params.bias_mutate_rate > 0 or params.bias_replace_rate > 0:
        biases = np.array([nodes[nid].bias for nid in mutable])
        new = _perturb(biases, params.bias_mutate_rate, params.bias_replace_rate, params.bias_mutate_power, rng)
        for nid, b in zip(mutable, new):
            if b != nodes[nid].bias:
                nodes[nid] = replace(nodes[nid], bias=float(b))
    if params.activation_mutate_rate > 0:
        draws = rng.random(len(mutable))
        picks = rng.integers(len(params.activation_options), size=len(mutable))
        for nid, d, p in zip(mutable, draws, picks):
            if d < params.activation_mutate_rate:
                nodes[nid] = replace(nodes[nid], activation=params.activation_options[p])

    return Genome(nodes, conns)


def _add_node(nodes, conns, registry, params, rng) -> None:
    enabled = [k for k in sorted(conns) if conns[k].enabled]
    if not enabled:
        return
    old = conns[enabled[rng.integers(len(enabled))]]
    new_id = registry.split_node(old.innovation)
    if new_id in nodes:
        # same connection already split once in this lineage
        return
    nodes[new_id] = NodeGene(new_id, "hidden", params.activation_default, 0.0)
    conns[old.innovation] = replace(old, enabled=False)
    into = registry.connection(old.source, new_id)
    out = registry.connection(new_id, old.target)
    conns[into] = ConnectionGene(into, old.source, new_id, 1.0)
    conns[out] = ConnectionGene(out, new_id, old.target, old.weight)


def _delete_node(nodes, conns, rng) -> None:
    hidden = [nid for nid in sorted(nodes) if nodes[nid].kind == "hidden"]
    if not hidden:
        return
    victim = hidden[rng.integers(len(hidden))]
    del nodes[victim]
    for k in [k for k, c in conns.items() if victim in (c.source, c.target)]:
        del conns[k]


def _add_connection(nodes, conns, registry, rng) -> None:
    ordered = sorted(nodes)
    sources = ordered
    targets = [nid for nid in ordered if nodes[nid].kind != "input"]
    source = sources[rng.integers(len(sources))]
    target = targets[rng.integers(len(targets))]
    weight = float(rng.uniform(-1.0, 1.0))
    if any(c.source == source and c.target == target for c in conns.values()):
        return
    # checked against disabled genes too, so re-enabling in crossover stays acyclic
    if creates_cycle(conns.values(), source, target):
        return
    innov = registry.connection(source, target)
    conns[innov] = ConnectionGene(innov, source, target, weight)


DISABLE_INHERITANCE = 0.75


def order_parents(a: Genome, b: Genome) -> tuple[Genome, Genome]:
    """Return (fitter, other); ties go to the smaller genome, then to ``a``."""
    fa = -np.inf if a.fitness is None else a.fitness
    fb = -np.inf if b.fitness is None else b.fitness
    if fa != fb:
        return (a, b) if fa > fb else (b, a)
    if len(b.connections) + len(b.nodes) < len(a.connections) + len(a.nodes):
        return b, a
    return a, b


def crossover(fitter: Genome, other: Genome, rng: np.random.Generator) -> Genome:
    """Child takes the fitter parent's structure; matching genes are inherited at random."""
    conns: dict[int, ConnectionGene] = {}
    for innov in sorted(fitter.connections):
        c1 = fitter.connections[innov]
        c2 = other.connections.get(innov)
        if c2 is None:
            conns[innov] = c1
            continue
        chosen = c1 if rng.random() < 0.5 else c2
        if c1.enabled and c2.enabled:
            enabled = True
        elif c1.enabled or c2.enabled:
            enabled = rng.random() >= DISABLE_INHERITANCE
        else:
            enabled = False
        # structural fields always from the fitter parent
        conns[innov] = ConnectionGene(innov, c1.source, c1.target, chosen.weight, enabled)
    nodes: dict[int, NodeGene] = {}
    for nid in sorted(fitter.nodes):
        n1 = fitter.nodes[nid]
        n2 = other.nodes.get(nid)
        if n2 is None or n1.kind == "input":
            nodes[nid] = n1
        else:
            src = n1 if rng.random() < 0.5 else n2
            nodes[nid] = NodeGene(nid, n1.kind, src.activation, src.bias)
    return Genome(nodes, conns)


@dataclass(frozen=True)
class DistanceCoefficients:
    excess: float = 1.0
    disjoint: float = 1.0
    weight: float = 0.5
    small_genome: int = 20  # below this size N is taken as 1


def genotypic_distance(g1: Genome, g2: Genome, coeffs: DistanceCoefficients | tuple = DistanceCoefficients()) -> float:
    if not isinstance(coeffs, DistanceCoefficients):
        coeffs = DistanceCoefficients(*coeffs)
    a, b = g1.connections, g2.connections
    if not a and not b:
        return 0.0
    max_a = max(a) if a else -1
    max_b = max(b) if b else -1
    excess = disjoint = 0
    diff = 0.0
    matching = 0
    for innov in sorted(a.keys() | b.keys()):
        ca, cb = a.get(innov), b.get(innov)
        if ca is not None and cb is not None:
            matching += 1
            diff += abs(ca.weight - cb.weight)
        elif ca is not None:
            if innov > max_b:
                excess += 1
            else:
                disjoint += 1
        else:
            if innov > max_a:
                excess += 1
            else:
                disjoint += 1
    n = max(len(a), len(b))
    if n < coeffs.small_genome:
        n = 1
    mean_diff = diff / matching if matching else 0.0
    return coeffs.excess * excess / n + coeffs.disjoint * disjoint / n + coeffs.weight * mean_diff
