"""The four evaluation environments and the episode loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .morphology import BodyGrid
from .physics import (
    ACTION_CENTER,
    CONTROL_DT,
    BoxSpec,
    KinematicsSummary,
    SimulationError,
    SimWorld,
    TerrainSpec,
    apply_actions,
    build_world,
    observe_kinematics,
    step,
)

POSITION_SCALE = 0.5
VELOCITY_SCALE = 5.0
GAP_SCALE = 0.5
STATIONS = 11
NAN_FITNESS = -100.0

TASK_IDS = ("walker", "obstacle_traverser", "climber", "thrower")

OBSTACLE_SEED = 20220707
CHANNEL_WIDTH = 0.7
STEP_PERIOD = 0.2
STEP_DEPTH = 0.05


class UnknownTaskError(KeyError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    id: str
    horizon: int
    terrain: TerrainSpec
    sensors: tuple[tuple[str, int], ...]
    reward: str  # "com_x" | "com_y" | "box_x"
    box: BoxSpec | None = None
    grid_size: int = 5

    @property
    def input_count(self) -> int:
        return sum(size for _, size in self.sensors)

    @property
    def action_count(self) -> int:
        return self.grid_size * self.grid_size

    def describe(self) -> dict:
        return {
            "id": self.id,
            "horizon": self.horizon,
            "input_count": self.input_count,
            "sensors": [list(s) for s in self.sensors],
            "reward": self.reward,
        }


def obstacle_terrain() -> TerrainSpec:
    """Uneven ground, regenerated identically on every call."""
    rng = np.random.default_rng(OBSTACLE_SEED)
    xs = np.arange(0.6, 40.0, 0.2)
    ys = np.round(rng.uniform(0.0, 0.1, len(xs)), 4)
    ground_x = (-2.0, 0.4) + tuple(float(x) for x in np.round(xs, 4))
    ground_y = (0.0, 0.0) + tuple(float(y) for y in ys)
    return TerrainSpec(ground_x=ground_x, ground_y=ground_y)


def channel_terrain(height: float = 20.0, ramp: float = 0.01) -> TerrainSpec:
    """Flat floor between two stepped walls; every other band of height ``STEP_PERIOD`` is recessed."""
    ys, offsets = [-1.0], [0.0]
    for k in range(int(round(height / STEP_PERIOD))):
        lo = k * STEP_PERIOD
        depth = STEP_DEPTH if k % 2 else 0.0
        ys += [lo + ramp, lo + STEP_PERIOD]
        offsets += [depth, depth]
    ys = np.round(ys, 6)
    offsets = np.asarray(offsets)
    half = CHANNEL_WIDTH / 2.0
    return TerrainSpec(
        wall_y=tuple(float(y) for y in ys),
        left_x=tuple(float(x) for x in -half - offsets),
        right_x=tuple(float(x) for x in half + offsets),
    )




def make_task(task_id: str, grid_size: int = 5) -> TaskSpec:
    cells = grid_size * grid_size
    base = (("com_velocity", 2), ("voxel_positions", 2 * cells))
    if task_id == "walker":
        return TaskSpec("walker", 500, TerrainSpec.flat(), base, "com_x", grid_size=grid_size)
    if task_id == "obstacle_traverser":
        sensors = base + (("orientation", 1), ("terrain", STATIONS))
        return TaskSpec("obstacle_traverser", 600, obstacle_terrain(), sensors, "com_x", grid_size=grid_size)
    if task_id == "climber":
        sensors = base + (("orientation", 1), ("left_wall", STATIONS), ("right_wall", STATIONS))
        return TaskSpec("climber", 400, channel_terrain(), sensors, "com_y", grid_size=grid_size)
    if task_id == "thrower":
        sensors = base + (("box_position", 2), ("box_velocity", 2))
        return TaskSpec("thrower", 300, TerrainSpec.flat(), sensors, "box_x", box=BoxSpec(), grid_size=grid_size)
    raise UnknownTaskError(f"unknown task {task_id!r}; expected one of {', '.join(TASK_IDS)}")


def start_world(body: BodyGrid, task: TaskSpec, action_center: float = ACTION_CENTER) -> SimWorld:
    if body.n != task.grid_size:
        raise ValueError(f"body is {body.n}x{body.n}, task expects {task.grid_size}x{task.grid_size}")
    return build_world(body, task.terrain, box=task.box, action_center=action_center)


def sense(w: SimWorld, t: TaskSpec, kin: KinematicsSummary | None = None) -> np.ndarray:
    kin = kin if kin is not None else observe_kinematics(w)
    occupied = w.cell_corners[:, 0] >= 0
    rel = np.where(occupied[:, None], kin.voxel_centers - kin.com, 0.0)
    parts = []
    for name, size in t.sensors:
        if name == "com_velocity":
            parts.append(kin.com_velocity / VELOCITY_SCALE)
        elif name == "voxel_positions":
            parts.append(rel.ravel() / POSITION_SCALE)
        elif name == "orientation":
            parts.append([kin.orientation / math.pi])
        elif name == "terrain":
            xs = np.linspace(kin.bbox[0], kin.bbox[2], size)
            parts.append((kin.bbox[1] - w.terrain.height(xs)) / GAP_SCALE)
        elif name in ("left_wall", "right_wall"):
            ys = np.linspace(kin.bbox[1], kin.bbox[3], size)
            left, right = w.terrain.walls(ys)
            gap = kin.bbox[0] - left if name == "left_wall" else right - kin.bbox[2]
            parts.append(gap / GAP_SCALE)
        elif name == "box_position":
            parts.append((kin.box_position - kin.com) / POSITION_SCALE)
        elif name == "box_velocity":
            parts.append(kin.box_velocity / VELOCITY_SCALE)
        else:
            raise ValueError(f"unknown sensor {name!r}")
    return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])


def progress(kin: KinematicsSummary, t: TaskSpec) -> float:
    """The quantity whose per-step change is the reward."""
    if t.reward == "com_x":
        return float(kin.com[0])
    if t.reward == "com_y":
        return float(kin.com[1])
    if t.reward == "box_x":
        return float(kin.box_position[0])
    raise ValueError(f"unknown reward {t.reward!r}")


def reward(prev: KinematicsSummary, next: KinematicsSummary, t: TaskSpec) -> float:  # noqa: A002
    return progress(next, t) - progress(prev, t)


@dataclass
class EpisodeResult:
    fitness: float
    steps: int
    termination: str  # "horizon" | "nan_abort"
    initial_progress: float = 0.0
    final_progress: float = 0.0
    frames: list[dict] | None = None
    error: str | None = None
    rewards: list[float] = field(default_factory=list, repr=False)


def _frame(k: int, w: SimWorld, actions: np.ndarray) -> dict:
    frame = {"step": k, "positions": w.pos.tolist(), "actuation": w.scale.tolist(), "actions": actions.tolist()}
    if w.box is not None:
        frame["box"] = w.box[:2].tolist()
    return frame


def run_episode(
    body: BodyGrid,
    controller: Callable[[np.ndarray], np.ndarray],
    t: TaskSpec,
    record: bool = False,
    action_center: float = ACTION_CENTER,
) -> EpisodeResult:
    """Run ``t.horizon`` control steps: sense, act, integrate, accumulate reward.

    ``controller`` is a LayeredNetwork or any callable with ``input_size`` and
    ``output_size`` attributes.
    """
    if getattr(controller, "input_size", t.input_count) != t.input_count:
        raise ValueError(f"controller expects {controller.input_size} inputs, task {t.id} provides {t.input_count}")
    if getattr(controller, "output_size", t.action_count) != t.action_count:
        raise ValueError(f"controller emits {controller.output_size} actions, task {t.id} needs {t.action_count}")
    w = start_world(body, t, action_center)
    kin = observe_kinematics(w)
    start = progress(kin, t)
    frames = [] if record else None
    rewards = []
    total = 0.0
    for k in range(t.horizon):
        actions = np.asarray(controller(sense(w, t, kin)), dtype=float)
        apply_actions(w, actions)
        if record:
            frames.append(_frame(k, w, actions))
        try:
            step(w, CONTROL_DT)
        except SimulationError as err:
            return EpisodeResult(NAN_FITNESS, k + 1, "nan_abort", start, start, frames, str(err), rewards)
        nxt = observe_kinematics(w)
        r = reward(kin, nxt, t)
        rewards.append(r)
        total += r
        kin = nxt
    return EpisodeResult(total, t.horizon, "horizon", start, progress(kin, t), frames, None, rewards)
