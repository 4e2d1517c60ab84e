import math

import numpy as np
import pytest

from conftest import random_genome
from oracles import dense_forward, recursive_cppn
from softcoevo.genome import ConnectionGene, Genome, NodeGene, new_minimal_genome
from softcoevo.network import CycleError, LayeredNetwork, activate_batch, activate_cppn, activate_layered, compile


def tiny(activation="tanh", weight=1.0, bias=0.0, enabled=True):
    nodes = {0: NodeGene(0, "input"), 1: NodeGene(1, "output", activation, bias)}
    return Genome(nodes, {0: ConnectionGene(0, 0, 1, weight, enabled)})


def test_minimal_cppn_has_eight_slots():
    net = compile(new_minimal_genome(7, 1, np.random.default_rng(0)))
    assert net.slot_count == 8
    assert net.input_size == 7 and net.output_size == 1


def test_disabled_connection_absent_from_plan():
    net = compile(tiny(weight=2.0, enabled=False))
    assert all(not W.any() for _, W, _, _ in net.levels)
    assert activate_cppn(net, [5.0])[0] == 0.0


def test_plan_order_inputs_hidden_output():
    nodes = {
        0: NodeGene(0, "input"),
        1: NodeGene(1, "input"),
        2: NodeGene(2, "output", "tanh"),
        3: NodeGene(3, "hidden", "sin"),
    }
    conns = {
        0: ConnectionGene(0, 0, 3, 1.0),
        1: ConnectionGene(1, 1, 3, 1.0),
        2: ConnectionGene(2, 3, 2, 1.0),
    }
    net = compile(Genome(nodes, conns))
    assert net.node_ids == (0, 1, 3, 2)


def test_compile_rejects_cycle():
    nodes = {0: NodeGene(0, "input"), 1: NodeGene(1, "output", "tanh"), 2: NodeGene(2, "hidden", "tanh")}
    conns = {0: ConnectionGene(0, 1, 2, 1.0), 1: ConnectionGene(1, 2, 1, 1.0), 2: ConnectionGene(2, 0, 2, 1.0)}
    with pytest.raises(CycleError):
        compile(Genome(nodes, conns))


def test_zero_weights_and_biases_give_zero():
    net = compile(tiny(weight=0.0))
    assert activate_cppn(net, [3.7])[0] == 0.0


def test_single_connection_tanh_hand_value():
    assert activate_cppn(compile(tiny()), [1.0])[0] == pytest.approx(0.7615941559557649, abs=1e-15)


def test_gauss_of_zero_is_exactly_one():
    assert activate_cppn(compile(tiny("gauss", weight=0.0)), [0.3])[0] == 1.0


def test_sin_and_bias():
    out = activate_cppn(compile(tiny("sin", weight=2.0, bias=0.5)), [0.25])[0]
    assert out == pytest.approx(math.sin(1.0))


def test_input_length_checked():
    net = compile(tiny())
    with pytest.raises(ValueError):
        activate_cppn(net, [1.0, 2.0])
    with pytest.raises(ValueError):
        activate_batch(net, np.zeros((4, 3)))


def test_compiled_matches_recursive_oracle_small_sample():
    rng = np.random.default_rng(17)
    for _ in range(20):
        g = random_genome(rng, steps=15)
        net = compile(g)
        xs = rng.uniform(-2, 2, (10, 7))
        got = activate_batch(net, xs)
        for x, row in zip(xs, got):
            assert np.max(np.abs(row - recursive_cppn(g, x))) < 1e-12


def test_batch_equals_single_calls():
    rng = np.random.default_rng(3)
    g = random_genome(rng, outputs=3, steps=10)
    net = compile(g)
    xs = rng.uniform(-1, 1, (25, 7))
    batch = activate_batch(net, xs)
    for x, row in zip(xs, batch):
        np.testing.assert_allclose(activate_cppn(net, x), row, rtol=0, atol=1e-14)


def test_cppn_nan_free_on_wide_inputs():
    rng = np.random.default_rng(5)
    for _ in range(20):
        net = compile(random_genome(rng, steps=20))
        assert np.isfinite(activate_batch(net, rng.uniform(-10, 10, (200, 7)))).all()


# -- layered networks --------------------------------------------------------


def test_layered_zero_weights_zero_output():
    net = LayeredNetwork((np.zeros((4, 3)), np.zeros((2, 4))))
    np.testing.assert_array_equal(activate_layered(net, [1.0, -2.0, 0.5]), np.zeros(2))


def test_layered_one_one_one_hand_value():
    net = LayeredNetwork((np.ones((1, 1)), np.ones((1, 1))))
    assert activate_layered(net, [1.0])[0] == pytest.approx(0.6420149920119997, abs=1e-15)


def test_layered_bounded_and_matches_loop_oracle():
    rng = np.random.default_rng(2)
    for trial in range(1000):
        sizes = rng.integers(1, 6, size=3)
        mats = (rng.uniform(-3, 3, (sizes[1], sizes[0])), rng.uniform(-3, 3, (sizes[2], sizes[1])))
        x = rng.uniform(-10, 10, sizes[0])
        out = activate_layered(LayeredNetwork(mats), x)
        assert (np.abs(out) < 1).all()
        if trial < 50:
            np.testing.assert_allclose(out, dense_forward(mats, x), atol=1e-12)


def test_layered_shapes_and_counts():
    net = LayeredNetwork((np.zeros((25, 52)), np.zeros((25, 25))))
    assert net.layer_sizes == (52, 25, 25)
    assert net.connection_count == 1925
    with pytest.raises(ValueError):
        LayeredNetwork((np.zeros((3, 2)), np.zeros((5, 4))))
    with pytest.raises(ValueError):
        activate_layered(net, np.zeros(51))


def test_layered_input_weights_scaled_to_zero():
    rng = np.random.default_rng(0)
    net = LayeredNetwork((np.zeros((4, 3)), rng.uniform(-3, 3, (2, 4))))
    np.testing.assert_array_equal(activate_layered(net, rng.uniform(-1, 1, 3)), np.zeros(2))
