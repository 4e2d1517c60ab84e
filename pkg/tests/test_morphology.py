import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import body_distance_loop, body_is_valid
from softcoevo.morphology import (
    BodyGrid,
    VoxelType,
    body_distance,
    cell_inputs,
    decode_body,
    decode_logits,
    validate_body,
)
from softcoevo.network import LayeredNetwork, activate_layered

grids = arrays(np.int8, (5, 5), elements=st.integers(0, 4))


def body(*rows: str) -> BodyGrid:
    return BodyGrid.from_ascii("\n".join(rows))


def test_voxel_types_and_actuator_predicate():
    assert [int(v) for v in VoxelType] == [0, 1, 2, 3, 4]
    assert [v.is_actuator for v in VoxelType] == [False, False, False, True, True]


def test_ascii_round_trip_and_counts():
    b = body("#####", "s...s", "H...V", ".....", ".....")
    assert BodyGrid.from_ascii(b.to_ascii()) == b
    counts = b.counts()
    assert counts[VoxelType.RIGID] == 5 and counts[VoxelType.SOFT] == 2
    assert counts[VoxelType.H_ACTUATOR] == counts[VoxelType.V_ACTUATOR] == 1
    assert sum(counts.values()) == 25
    assert b.occupied_count == 9 and b.actuator_count == 2


def test_body_grid_rejects_bad_shapes_and_labels():
    with pytest.raises(ValueError):
        BodyGrid(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        BodyGrid([[0, 5], [1, 1]])


def test_body_grid_is_read_only():
    b = BodyGrid(np.ones((5, 5)))
    with pytest.raises(ValueError):
        b.cells[0, 0] = 3


# -- decoding ----------------------------------------------------------------


def test_cell_inputs_centre_is_origin():
    xy = cell_inputs(5)
    np.testing.assert_array_equal(xy[12], [0.0, 0.0])
    np.testing.assert_array_equal(xy[0], [-1.0, 1.0])  # top-left
    np.testing.assert_array_equal(xy[4], [1.0, 1.0])
    np.testing.assert_array_equal(xy[20], [-1.0, -1.0])


def test_cell_inputs_formula():
    n = 5
    h = (n - 1) / 2
    xy = cell_inputs(n).reshape(n, n, 2)
    for i in range(n):
        for j in range(n):
            assert tuple(xy[i, j]) == pytest.approx(((j - h) / h, (h - i) / h))


def test_all_zero_network_decodes_all_empty():
    net = LayeredNetwork((np.zeros((3, 2)), np.zeros((5, 3))))
    b = decode_body(net)
    assert b.occupied_count == 0
    assert validate_body(b) == (False, "empty")


def test_fixed_logits_favouring_index_three():
    # zero input weights make the hidden layer 0, so output = tanh(bias)
    net = LayeredNetwork(
        (np.zeros((3, 2)), np.zeros((5, 3))),
        (np.zeros(3), np.array([0.0, 0.1, 0.2, 0.9, 0.3])),
    )
    b = decode_body(net)
    assert (b.cells == VoxelType.H_ACTUATOR).all()
    assert validate_body(b) == (True, None)


def test_rigid_on_right_half_matches_per_cell_oracle():
    # output 1 (rigid) ~ tanh(tanh(3x)); the others sit at 0 through zero weights
    w1 = np.array([[3.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    w2 = np.zeros((5, 3))
    w2[1, 0] = 1.0
    net = LayeredNetwork((w1, w2))
    b = decode_body(net)
    for (i, j), (x, y) in zip(np.ndindex(5, 5), cell_inputs(5)):
        logits = activate_layered(net, [x, y])
        assert b.cells[i, j] == int(np.argmax(logits))
    assert (b.cells[:, 3:] == VoxelType.RIGID).all()
    assert (b.cells[:, :3] == VoxelType.EMPTY).all()  # x <= 0 ties or loses to empty


def test_decode_requires_two_in_five_out():
    with pytest.raises(ValueError):
        decode_body(LayeredNetwork((np.zeros((3, 3)), np.zeros((5, 3)))))


def test_decode_logits_lowest_index_wins_ties():
    logits = np.zeros((25, 5))
    logits[:, 2] = 0.5
    logits[:, 4] = 0.5
    assert (decode_logits(logits, 5).cells == VoxelType.SOFT).all()


def test_decode_deterministic():
    rng = np.random.default_rng(1)
    net = LayeredNetwork((rng.uniform(-3, 3, (3, 2)), rng.uniform(-3, 3, (5, 3))))
    assert decode_body(net) == decode_body(net)


# -- validity ----------------------------------------------------------------


def test_single_vertical_actuator_is_valid():
    assert validate_body(body(".....", ".....", "..V..", ".....", ".....")) == (True, None)


def test_diagonal_rigid_pair_is_disconnected():
    b = body("#....", ".#...", ".....", ".....", "....V")
    assert validate_body(b) == (False, "disconnected")


def test_all_rigid_has_no_actuator():
    assert validate_body(BodyGrid(np.ones((5, 5)))) == (False, "no_actuator")


def test_reason_priority_empty_then_disconnected():
    assert validate_body(BodyGrid(np.zeros((5, 5))))[1] == "empty"
    assert validate_body(body("#...#", ".....", ".....", ".....", "....."))[1] == "disconnected"


@settings(max_examples=300, deadline=None)
@given(cells=grids)
def test_validity_matches_flood_fill_oracle(cells):
    assert validate_body(BodyGrid(cells)) == body_is_valid(cells)


# -- distance ----------------------------------------------------------------


def test_distance_cases():
    base = body("#####", "#####", "#####", "#####", "####V")
    soft = body("s####", "#####", "#####", "#####", "####V")
    gone = body(".####", "#####", "#####", "#####", "####V")
    assert body_distance(base, base) == 0.0
    assert body_distance(base, soft) == 0.5
    assert body_distance(base, gone) == 1.0


def test_empty_versus_full_rigid_is_25():
    assert body_distance(BodyGrid(np.zeros((5, 5))), BodyGrid(np.ones((5, 5)))) == 25.0


def test_distance_size_mismatch():
    with pytest.raises(ValueError):
        body_distance(BodyGrid(np.zeros((5, 5))), BodyGrid(np.zeros((4, 4))))


@settings(max_examples=200, deadline=None)
@given(a=grids, b=grids)
def test_distance_properties_and_oracle(a, b):
    ba, bb = BodyGrid(a), BodyGrid(b)
    d = body_distance(ba, bb)
    assert d == body_distance(bb, ba)
    assert 0.0 <= d <= 25.0
    assert (d == 0.0) == (ba == bb)
    assert d == body_distance_loop(a, b)
