"""Voxel bodies: decoding from the morphology network, validity, and body distance."""

from __future__ import annotations

from collections import Counter, deque
from enum import IntEnum

import numpy as np

from .hyperneat import grid_coordinates
from .network import LayeredNetwork, activate_layered


class VoxelType(IntEnum):
    EMPTY = 0
    RIGID = 1
    SOFT = 2
    H_ACTUATOR = 3
    V_ACTUATOR = 4

    @property
    def is_actuator(self) -> bool:
        return self in (VoxelType.H_ACTUATOR, VoxelType.V_ACTUATOR)


ASCII = {VoxelType.EMPTY: ".", VoxelType.RIGID: "#", VoxelType.SOFT: "s", VoxelType.H_ACTUATOR: "H", VoxelType.V_ACTUATOR: "V"}
FROM_ASCII = {v: k for k, v in ASCII.items()}


class BodyGrid:
    """Immutable n x n grid of voxel labels (row 0 is the top row)."""

    __slots__ = ("cells",)

    def __init__(self, cells):
        arr = np.array(cells, dtype=np.int8)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"body must be a square matrix, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() > 4):
            raise ValueError("voxel labels must lie in 0..4")
        arr.setflags(write=False)
        self.cells = arr

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def actuator_count(self) -> int:
        return int(np.count_nonzero(self.cells >= VoxelType.H_ACTUATOR))

    def counts(self) -> dict[VoxelType, int]:
        c = Counter(int(v) for v in self.cells.ravel())
        return {t: c.get(int(t), 0) for t in VoxelType}

    def __eq__(self, other) -> bool:
        return isinstance(other, BodyGrid) and np.array_equal(self.cells, other.cells)

    def __hash__(self) -> int:
        return hash(self.cells.tobytes())

    def digest(self) -> str:
        return "".join(ASCII[VoxelType(v)] for v in self.cells.ravel())

    def to_ascii(self) -> str:
        return "\n".join("".join(ASCII[VoxelType(v)] for v in row) for row in self.cells)

    @classmethod
    def from_ascii(cls, text: str) -> BodyGrid:
        rows = [line.strip() for line in text.strip().splitlines()]
        return cls([[FROM_ASCII[ch] for ch in row] for row in rows])

    def to_list(self) -> list[list[int]]:
        return self.cells.tolist()

    def __repr__(self) -> str:
        return f"BodyGrid({self.digest()!r})"


def cell_inputs(n: int) -> np.ndarray:
    """Normalized (x, y) per cell, row-major, grid centre at the origin."""
    return grid_coordinates(n)


def decode_body(net: LayeredNetwork, n: int = 5) -> BodyGrid:
    if net.input_size != 2 or net.output_size != 5:
        raise ValueError("morphology network must map 2 inputs to 5 outputs")
    logits = activate_layered(net, cell_inputs(n))
    # argmax returns the first maximum: ties go to the lowest type index
    return BodyGrid(np.argmax(logits, axis=1).reshape(n, n))


def decode_logits(logits: np.ndarray, n: int) -> BodyGrid:
    return BodyGrid(np.argmax(np.asarray(logits), axis=1).reshape(n, n))


def validate_body(body: BodyGrid) -> tuple[bool, str | None]:
    """Return ``(True, None)`` or ``(False, reason)`` with reason in
    {"empty", "disconnected", "no_actuator"}."""
    cells = body.cells
    occupied = list(zip(*np.nonzero(cells)))
    if not occupied:
        return False, "empty"
    seen = {occupied[0]}
    queue = deque([occupied[0]])
    n = body.n
    while queue:
        i, j = queue.popleft()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < n and 0 <= b < n and cells[a, b] and (a, b) not in seen:
                seen.add((a, b))
                queue.append((a, b))
    if len(seen) != len(occupied):
        return False, "disconnected"
    if body.actuator_count == 0:
        return False, "no_actuator"
    return True, None


def is_valid(body: BodyGrid) -> bool:
    return validate_body(body)[0]


def body_distance(b1: BodyGrid, b2: BodyGrid) -> float:
    """0 per matching cell, 0.5 for two different non-empty types, 1 for empty vs non-empty."""
    if b1.cells.shape != b2.cells.shape:
        raise ValueError(f"grid size mismatch: {b1.cells.shape} vs {b2.cells.shape}")
    a, b = b1.cells, b2.cells
    one_empty = (a == 0) != (b == 0)
    retyped = (a != b) & (a != 0) & (b != 0)
    return float(np.count_nonzero(one_empty) + 0.5 * np.count_nonzero(retyped))
