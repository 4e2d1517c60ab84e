import numpy as np
import pytest

import softcoevo.hyperneat as hn
from conftest import random_genome
from oracles import recursive_cppn
from softcoevo.genome import ConnectionGene, Genome, NodeGene, new_minimal_genome
from softcoevo.hyperneat import (
    MAX_WEIGHT,
    build_substrates,
    express,
    grid_coordinates,
    query_weight,
)
from softcoevo.network import compile


def constant_cppn(value: float, activation="tanh") -> Genome:
    """7-input CPPN whose output ignores its inputs: activation(bias) with no edges."""
    nodes = {i: NodeGene(i, "input") for i in range(7)}
    nodes[7] = NodeGene(7, "output", activation, value)
    return Genome(nodes, {})


def x1_path_cppn() -> Genome:
    """Single edge from x1 to a tanh output, so the output is tanh(x1)."""
    nodes = {i: NodeGene(i, "input") for i in range(7)}
    nodes[7] = NodeGene(7, "output", "tanh", 0.0)
    return Genome(nodes, {0: ConnectionGene(0, 0, 7, 1.0)})


# -- substrates --------------------------------------------------------------


def test_controller_layer_sizes_walker():
    _, ctrl = build_substrates(52, 5)
    assert ctrl.layer_sizes == (52, 25, 25)


@pytest.mark.parametrize("inputs", [1, 52, 56, 64, 75])
def test_morphology_layer_sizes_fixed(inputs):
    morph, _ = build_substrates(inputs, 5)
    assert morph.layer_sizes == (2, 3, 5)


def test_substrate_z_positions_and_signs():
    morph, ctrl = build_substrates(64, 5)
    assert [set(layer[:, 2]) for layer in morph.layers] == [{1.0}, {2.0}, {3.0}]
    assert [set(layer[:, 2]) for layer in ctrl.layers] == [{-1.0}, {-2.0}, {-3.0}]
    np.testing.assert_array_equal(morph.layers[0][:, :2], [[-1.0, 0.0], [1.0, 0.0]])
    assert (morph.layers[1][:, 1] == 0).all()


def test_controller_input_raster_row_major():
    _, ctrl = build_substrates(52, 5)
    inputs = ctrl.layers[0]
    grid = grid_coordinates(8)  # ceil(sqrt(52)) = 8
    np.testing.assert_array_equal(inputs[:, :2], grid[:52])
    assert inputs[0, 0] == -1.0 and inputs[0, 1] == 1.0  # top-left first
    assert inputs[1, 0] > inputs[0, 0]  # then along the row


def test_substrates_deterministic():
    a = build_substrates(75)
    b = build_substrates(75)
    for la, lb in zip(a[1].layers, b[1].layers):
        np.testing.assert_array_equal(la, lb)


def test_substrates_reject_bad_sizes():
    with pytest.raises(ValueError):
        build_substrates(0)


# -- weight queries ----------------------------------------------------------


def test_constant_zero_cppn_queries_zero():
    net = compile(constant_cppn(0.0))
    assert query_weight(net, (0.1, 0.2, 1), (0.3, -0.4, 2)) == 0.0


def test_query_clips_raw_cppn_output(monkeypatch):
    # sin/tanh/gauss are bounded by 1, so a constant 5 can only be produced by stubbing the evaluator
    net = compile(constant_cppn(0.0))
    monkeypatch.setattr(hn, "activate_batch", lambda cppn, rows: np.full((len(rows), 1), 5.0))
    assert query_weight(net, (0, 0, 1), (1, 1, 2)) == 3.0
    monkeypatch.setattr(hn, "activate_batch", lambda cppn, rows: np.full((len(rows), 1), -7.5))
    assert query_weight(net, (0, 0, 1), (1, 1, 2)) == -3.0


def test_x1_path_traced_by_hand():
    net = compile(x1_path_cppn())
    assert query_weight(net, (0.5, 0.0, 1.0), (0.9, -0.2, 2.0)) == pytest.approx(np.tanh(0.5), abs=1e-15)
    assert query_weight(net, (0.5, 0.0, 1.0), (-1.0, 1.0, -3.0)) == pytest.approx(np.tanh(0.5), abs=1e-15)


def test_query_passes_bias_input_of_one():
    nodes = {i: NodeGene(i, "input") for i in range(7)}
    nodes[7] = NodeGene(7, "output", "sin", 0.0)
    net = compile(Genome(nodes, {6: ConnectionGene(6, 6, 7, 1.0)}))
    assert query_weight(net, (0, 0, 0), (0, 0, 0)) == pytest.approx(np.sin(1.0))


# -- expression --------------------------------------------------------------


def test_expressed_connection_counts():
    g = new_minimal_genome(7, 1, np.random.default_rng(0))
    ph = express(g, build_substrates(52))
    assert ph.morphology_net.connection_count == 21
    assert ph.controller_net.connection_count == 1925
    assert ph.morphology_net.layer_sizes == (2, 3, 5)
    assert ph.controller_net.layer_sizes == (52, 25, 25)


def test_expression_matches_per_pair_oracle():
    rng = np.random.default_rng(6)
    g = random_genome(rng, steps=12)
    subs = build_substrates(10)
    ph = express(g, subs)
    for sub, net in zip(subs, (ph.morphology_net, ph.controller_net)):
        for k, W in enumerate(net.weights):
            src, tgt = sub.layers[k], sub.layers[k + 1]
            for i in range(0, len(tgt), 3):
                for j in range(0, len(src), 2):
                    want = recursive_cppn(g, [*src[j], *tgt[i], 1.0])[0]
                    assert W[i, j] == pytest.approx(np.clip(want, -3, 3), abs=1e-12)


def test_expression_pure_and_bounded():
    rng = np.random.default_rng(8)
    g = random_genome(rng, steps=15)
    subs = build_substrates(64)
    a, b = express(g, subs), express(g, subs)
    for wa, wb in zip(a.controller_net.weights + a.morphology_net.weights, b.controller_net.weights + b.morphology_net.weights):
        np.testing.assert_array_equal(wa, wb)
        assert (np.abs(wa) <= MAX_WEIGHT).all()


def test_query_order_does_not_matter():
    rng = np.random.default_rng(12)
    net = compile(random_genome(rng, steps=10))
    p1 = rng.uniform(-1, 1, (40, 3))
    p2 = rng.uniform(-1, 1, (40, 3))
    forward = hn.query_weights(net, p1, p2)
    perm = rng.permutation(40)
    np.testing.assert_allclose(hn.query_weights(net, p1[perm], p2[perm]), forward[perm], rtol=0, atol=1e-14)


def test_separation_zeroing_positive_sources(monkeypatch):
    rng = np.random.default_rng(4)
    g = random_genome(rng, steps=10)
    subs = build_substrates(52)
    before = express(g, subs)
    real = hn.activate_batch

    def masked(cppn, rows):
        out = real(cppn, rows)
        out[rows[:, 2] > 0] = 0.0  # z1 > 0: a morphology query
        return out

    monkeypatch.setattr(hn, "activate_batch", masked)
    after = express(g, subs)
    assert all(not W.any() for W in after.morphology_net.weights)
    assert any(W.any() for W in before.morphology_net.weights)
    for wa, wb in zip(before.controller_net.weights, after.controller_net.weights):
        np.testing.assert_array_equal(wa, wb)


def test_no_cross_substrate_queries(monkeypatch):
    seen = []
    real = hn.activate_batch

    def spy(cppn, rows):
        seen.append(rows.copy())
        return real(cppn, rows)

    monkeypatch.setattr(hn, "activate_batch", spy)
    express(new_minimal_genome(7, 1, np.random.default_rng(0)), build_substrates(52))
    rows = np.vstack(seen)
    assert len(rows) == 21 + 1925  # each pair queried exactly once
    assert (np.sign(rows[:, 2]) == np.sign(rows[:, 5])).all()
    assert (rows[:, 6] == 1.0).all()
