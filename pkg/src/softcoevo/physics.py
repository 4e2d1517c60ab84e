"""Deterministic 2D mass-spring simulation of voxel soft bodies.

Each occupied voxel contributes four corner masses (shared with neighbours),
four edge springs (shared edges appear once) and two diagonal springs.
Actuator voxels scale the rest length of their springs along the actuation
axis. Integration is semi-implicit Euler with position projection against the
terrain and Coulomb friction applied as a velocity correction.

The hot loops live in numba kernels; the Python layer owns construction,
bookkeeping and error reporting.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .morphology import BodyGrid, VoxelType, validate_body

VOXEL_SIZE = 0.1
VOXEL_MASS = 1.0
RIGID_STIFFNESS = 6.0e4
SOFT_STIFFNESS = 2.0e4
DAMPING = 30.0
CONTROL_DT = 0.05
SUBSTEPS = 100
FRICTION = 0.5
GRAVITY = -9.8
MAX_SPEED = 50.0
CLEARANCE = 0.01
ACTION_CENTER = 1.1
ACTION_GAIN = 0.5
ACTUATION_RAMP = 1.0  # fraction of a control step over which rest lengths move to their new targets

CONTACT_STIFFNESS = 2.0e4
CONTACT_DAMPING = 30.0
CONTACT_SKIN = 0.005

H_EDGE, V_EDGE, DIAGONAL = 0, 1, 2


class SimulationError(RuntimeError):
    """Raised when the state stops being finite."""


@dataclass(frozen=True)
class TerrainSpec:
    """Ground height field and optional channel walls.

    ``ground_x``/``ground_y`` are knots of a piecewise-linear height field
    (held constant beyond the end knots); an empty ground means no ground at all.
    Walls are given as x-offsets sampled at ``wall_y`` knots.
    """

    ground_x: tuple[float, ...] = (-1.0, 1.0)
    ground_y: tuple[float, ...] = (0.0, 0.0)
    wall_y: tuple[float, ...] = ()
    left_x: tuple[float, ...] = ()
    right_x: tuple[float, ...] = ()
    friction: float = FRICTION
    start_x: float = 0.0

    @classmethod
    def flat(cls, start_x: float = 0.0, friction: float = FRICTION) -> TerrainSpec:
        return cls(friction=friction, start_x=start_x)

    @classmethod
    def empty(cls) -> TerrainSpec:
        return cls(ground_x=(), ground_y=())

    @property
    def has_ground(self) -> bool:
        return len(self.ground_x) > 0

    @property
    def has_walls(self) -> bool:
        return len(self.wall_y) > 0

    def height(self, x) -> np.ndarray:
        if not self.has_ground:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.interp(x, self.ground_x, self.ground_y)

    def walls(self, y) -> tuple[np.ndarray, np.ndarray]:
        return np.interp(y, self.wall_y, self.left_x), np.interp(y, self.wall_y, self.right_x)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> TerrainSpec:
        data = json.loads(text)
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


@dataclass(frozen=True)
class BoxSpec:
    size: float = 0.1
    mass: float = 1.0


@dataclass
class KinematicsSummary:
    com: np.ndarray
    com_velocity: np.ndarray
    voxel_centers: np.ndarray  # (n*n, 2), zero rows for empty cells
    orientation: float
    bbox: np.ndarray  # xmin, ymin, xmax, ymax
    box_position: np.ndarray | None = None
    box_velocity: np.ndarray | None = None


@dataclass(eq=False)
class SimWorld:
    body: BodyGrid
    terrain: TerrainSpec
    pos: np.ndarray
    vel: np.ndarray
    mass: np.ndarray
    lattice: np.ndarray  # (P, 2) lattice (row, col) per mass point
    springs: np.ndarray  # (S, 2)
    base_rest: np.ndarray
    rest: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray
    spring_kind: np.ndarray
    spring_cells: np.ndarray  # (S, 2) flattened voxel indices or -1
    cell_corners: np.ndarray  # (n*n, 4) point indices or -1
    cell_types: np.ndarray
    left: np.ndarray
    right: np.ndarray
    box: np.ndarray | None = None  # x, y, vx, vy
    box_spec: BoxSpec | None = None
    gravity: float = GRAVITY
    action_center: float = ACTION_CENTER
    time: float = 0.0
    steps: int = 0
    substeps: int = 0
    scale: np.ndarray = field(default=None)  # last per-cell actuation factor

    def __post_init__(self):
        self.inv_mass = 1.0 / self.mass
        if self.scale is None:
            self.scale = np.ones(len(self.cell_types))
        self._act_mask, self._act_cells = _actuation_tables(self)
        self.settled_rest = self.rest.copy()

    @property
    def n(self) -> int:
        return self.body.n

    @property
    def point_count(self) -> int:
        return len(self.pos)

    @property
    def spring_count(self) -> int:
        return len(self.springs)

    def copy_state(self) -> dict:
        state = {"pos": self.pos.copy(), "vel": self.vel.copy(), "rest": self.rest.copy(), "settled_rest": self.settled_rest.copy()}
        if self.box is not None:
            state["box"] = self.box.copy()
        return state


def _stiffness(t: int) -> float:
    return RIGID_STIFFNESS if t == VoxelType.RIGID else SOFT_STIFFNESS


def build_world(
    body: BodyGrid,
    terrain: TerrainSpec,
    box: BoxSpec | None = None,
    clearance: float = CLEARANCE,
    gravity: float = GRAVITY,
    action_center: float = ACTION_CENTER,
    require_actuator: bool = True,
) -> SimWorld:
    """Assemble the mass-spring model of ``body`` resting ``clearance`` above the ground.

    ``require_actuator=False`` admits passive bodies (useful for physics checks);
    empty or disconnected bodies are always rejected.
    """
    ok, reason = validate_body(body)
    if not ok and not (reason == "no_actuator" and not require_actuator):
        raise ValueError(f"cannot simulate an invalid body ({reason})")
    n = body.n
    cells = body.cells
    s = VOXEL_SIZE

    corner_index: dict[tuple[int, int], int] = {}
    for i in range(n):
        for j in range(n):
            if cells[i, j]:
                for corner in ((i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)):
                    corner_index.setdefault(corner, 0)
    ordered = sorted(corner_index)
    corner_index = {c: k for k, c in enumerate(ordered)}
    lattice = np.array(ordered, dtype=np.int64)
    mass = np.zeros(len(ordered))
    cell_corners = -np.ones((n * n, 4), dtype=np.int64)

    edges: dict[tuple[int, int, int], list[int]] = {}
    diagonals: list[tuple[int, int, int]] = []
    for i in range(n):
        for j in range(n):
            if not cells[i, j]:
                continue
            tl, tr = corner_index[(i, j)], corner_index[(i, j + 1)]
            bl, br = corner_index[(i + 1, j)], corner_index[(i + 1, j + 1)]
            cell = i * n + j
            cell_corners[cell] = (tl, tr, bl, br)
            for p in (tl, tr, bl, br):
                mass[p] += VOXEL_MASS / 4.0
            for a, b, kind in ((tl, tr, H_EDGE), (bl, br, H_EDGE), (tl, bl, V_EDGE), (tr, br, V_EDGE)):
                edges.setdefault((a, b, kind), []).append(cell)
            diagonals.append((tl, br, cell))
            diagonals.append((tr, bl, cell))

    pairs, kinds, owners, base, stiff = [], [], [], [], []
    for (a, b, kind), owner in edges.items():
        pairs.append((a, b))
        kinds.append(kind)
        owners.append((owner + [-1])[:2])
        base.append(s)
        stiff.append(max(_stiffness(cells.flat[c]) for c in owner))
    for a, b, cell in diagonals:
        pairs.append((a, b))
        kinds.append(DIAGONAL)
        owners.append([cell, -1])
        base.append(s * math.sqrt(2.0))
        stiff.append(_stiffness(cells.flat[cell]))

    rows, cols = lattice[:, 0], lattice[:, 1]
    x = (cols - (cols.min() + cols.max()) / 2.0) * s + terrain.start_x
    y = (n - rows).astype(float) * s
    pos = np.column_stack([x, y - y.min()])
    ground = terrain.height(pos[:, 0]) if terrain.has_ground else np.zeros(len(pos))
    pos[:, 1] += np.max(ground - pos[:, 1]) + clearance

    mid = (cols.min() + cols.max()) / 2.0
    base_rest = np.array(base)
    world = SimWorld(
        body=body,
        terrain=terrain,
        pos=pos,
        vel=np.zeros_like(pos),
        mass=mass,
        lattice=lattice,
        springs=np.array(pairs, dtype=np.int64),
        base_rest=base_rest,
        rest=base_rest.copy(),
        stiffness=np.array(stiff),
        damping=np.full(len(pairs), DAMPING),
        spring_kind=np.array(kinds, dtype=np.int64),
        spring_cells=np.array(owners, dtype=np.int64),
        cell_corners=cell_corners,
        cell_types=cells.ravel().astype(np.int64),
        left=cols < mid,
        right=cols > mid,
        gravity=gravity,
        action_center=action_center,
    )
    if box is not None:
        world.box_spec = box
        world.box = _place_box(pos, box)
    return world


def _place_box(pos: np.ndarray, box: BoxSpec) -> np.ndarray:
    half = box.size / 2.0
    cx = (pos[:, 0].min() + pos[:, 0].max()) / 2.0
    under = np.abs(pos[:, 0] - cx) <= half + CONTACT_SKIN
    top = pos[under, 1].max() if under.any() else pos[:, 1].max()
    return np.array([cx, top + CONTACT_SKIN + half + 0.002, 0.0, 0.0])


def _actuation_tables(w: SimWorld) -> tuple[np.ndarray, np.ndarray]:
    """Per spring, which adjacent cells drive its rest length."""
    types = w.cell_types
    mask = np.zeros(w.spring_cells.shape, dtype=np.bool_)
    for s, (kind, cells) in enumerate(zip(w.spring_kind, w.spring_cells)):
        for k, c in enumerate(cells):
            if c < 0:
                continue
            t = types[c]
            if kind == H_EDGE:
                mask[s, k] = t == VoxelType.H_ACTUATOR
            elif kind == V_EDGE:
                mask[s, k] = t == VoxelType.V_ACTUATOR
            else:
                mask[s, k] = t in (VoxelType.H_ACTUATOR, VoxelType.V_ACTUATOR)
    return mask, np.maximum(w.spring_cells, 0)


def action_scale(actions: np.ndarray, center: float = ACTION_CENTER) -> np.ndarray:
    return center + ACTION_GAIN * np.clip(actions, -1.0, 1.0)


def apply_actions(w: SimWorld, actions) -> None:
    """Set current rest lengths from one action per grid cell (non-actuators ignored)."""
    u = np.asarray(actions, dtype=float)
    if u.shape != (len(w.cell_types),):
        raise ValueError(f"expected {len(w.cell_types)} actions, got shape {u.shape}")
    a = action_scale(u, w.action_center)
    actuator = (w.cell_types == VoxelType.H_ACTUATOR) | (w.cell_types == VoxelType.V_ACTUATOR)
    w.scale = np.where(actuator, a, 1.0)
    _apply_rest(w.rest, w.base_rest, w.spring_kind, w._act_cells, w._act_mask, a)


@njit(cache=True)
def _apply_rest(rest, base, kind, cells, mask, a):
    for s in range(rest.shape[0]):
        total = 0.0
        count = 0
        for k in range(2):
            if mask[s, k]:
                total += a[cells[s, k]]
                count += 1
        if count == 0:
            rest[s] = base[s]
        elif kind[s] == DIAGONAL:
            f = total / count
            rest[s] = base[s] * math.sqrt((f * f + 1.0) / 2.0)
        else:
            rest[s] = base[s] * total / count


@njit(cache=True)
def _profile(xs, ys, x):
    """Piecewise-linear value and slope, constant beyond the end knots."""
    n = xs.shape[0]
    if x <= xs[0]:
        return ys[0], 0.0
    if x >= xs[n - 1]:
        return ys[n - 1], 0.0
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    slope = (ys[hi] - ys[lo]) / (xs[hi] - xs[lo])
    return ys[lo] + slope * (x - xs[lo]), slope


@njit(cache=True)
def _friction(vx, vy, nx, ny, mu):
    """Remove approaching normal velocity; Coulomb-limit the tangential part."""
    vn = vx * nx + vy * ny
    if vn >= 0.0:
        return vx, vy
    vx -= vn * nx
    vy -= vn * ny
    dvn = -vn
    tx = ny
    ty = -nx
    vt = vx * tx + vy * ty
    if abs(vt) <= mu * dvn:
        vx -= vt * tx
        vy -= vt * ty
    else:
        corr = mu * dvn if vt > 0.0 else -mu * dvn
        vx -= corr * tx
        vy -= corr * ty
    return vx, vy


@njit(cache=True)
def _simulate(
    pos, vel, inv_mass, springs, rest, stiff, damp, n_sub, h, gravity, max_speed,
    ground_x, ground_y, wall_y, wall_l, wall_r, mu,
    box, box_params, start_rest, ramp_sub,
):
    npts = pos.shape[0]
    nspr = springs.shape[0]
    has_ground = ground_x.shape[0] > 0
    has_walls = wall_y.shape[0] > 0
    has_box = box.shape[0] > 0
    force = np.zeros((npts, 2))
    current = start_rest.copy() if ramp_sub > 0 else rest.copy()
    for sub in range(n_sub):
        if sub < ramp_sub:
            frac = (sub + 1.0) / ramp_sub
            for s in range(nspr):
                current[s] = start_rest[s] + frac * (rest[s] - start_rest[s])
        force[:, :] = 0.0
        for s in range(nspr):
            i = springs[s, 0]
            j = springs[s, 1]
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            length = math.sqrt(dx * dx + dy * dy)
            if length < 1e-12:
                continue
            ux = dx / length
            uy = dy / length
            vrel = (vel[j, 0] - vel[i, 0]) * ux + (vel[j, 1] - vel[i, 1]) * uy
            f = stiff[s] * (length - current[s]) + damp[s] * vrel
            force[i, 0] += f * ux
            force[i, 1] += f * uy
            force[j, 0] -= f * ux
            force[j, 1] -= f * uy

        if has_box:
            half = box_params[0] + CONTACT_SKIN
            bfx = 0.0
            bfy = 0.0
            for p in range(npts):
                rx = pos[p, 0] - box[0]
                ry = pos[p, 1] - box[1]
                if abs(rx) >= half or abs(ry) >= half:
                    continue
                # push out along the axis of least penetration
                pen_x = half - abs(rx)
                pen_y = half - abs(ry)
                if pen_x < pen_y:
                    nx = 1.0 if rx > 0 else -1.0
                    ny = 0.0
                    depth = pen_x
                else:
                    nx = 0.0
                    ny = 1.0 if ry > 0 else -1.0
                    depth = pen_y
                rvx = vel[p, 0] - box[2]
                rvy = vel[p, 1] - box[3]
                fn = box_params[2] * depth - box_params[3] * (rvx * nx + rvy * ny)
                if fn <= 0.0:
                    continue
                tx = ny
                ty = -nx
                ft = -box_params[3] * (rvx * tx + rvy * ty)
                limit = mu * fn
                if ft > limit:
                    ft = limit
                elif ft < -limit:
                    ft = -limit
                fx = fn * nx + ft * tx
                fy = fn * ny + ft * ty
                force[p, 0] += fx
                force[p, 1] += fy
                bfx -= fx
                bfy -= fy
            box[2] += h * bfx * box_params[1]
            box[3] += h * (bfy * box_params[1] + gravity)
            box[0] += h * box[2]
            box[1] += h * box[3]
            if has_ground:
                g, slope = _profile(ground_x, ground_y, box[0])
                bottom = box[1] - box_params[0]
                if bottom < g:
                    box[1] = g + box_params[0]
                    box[2], box[3] = _friction(box[2], box[3], 0.0, 1.0, mu)

        for p in range(npts):
            vel[p, 0] += h * force[p, 0] * inv_mass[p]
            vel[p, 1] += h * (force[p, 1] * inv_mass[p] + gravity)
            speed = math.sqrt(vel[p, 0] ** 2 + vel[p, 1] ** 2)
            if speed > max_speed:
                vel[p, 0] *= max_speed / speed
                vel[p, 1] *= max_speed / speed
            pos[p, 0] += h * vel[p, 0]
            pos[p, 1] += h * vel[p, 1]
            if has_ground:
                g, slope = _profile(ground_x, ground_y, pos[p, 0])
                if pos[p, 1] < g:
                    pos[p, 1] = g
                    norm = math.sqrt(1.0 + slope * slope)
                    vel[p, 0], vel[p, 1] = _friction(vel[p, 0], vel[p, 1], -slope / norm, 1.0 / norm, mu)
            if has_walls:
                xl, _ = _profile(wall_y, wall_l, pos[p, 1])
                xr, _ = _profile(wall_y, wall_r, pos[p, 1])
                if pos[p, 0] < xl:
                    pos[p, 0] = xl
                    vel[p, 0], vel[p, 1] = _friction(vel[p, 0], vel[p, 1], 1.0, 0.0, mu)
                elif pos[p, 0] > xr:
                    pos[p, 0] = xr
                    vel[p, 0], vel[p, 1] = _friction(vel[p, 0], vel[p, 1], -1.0, 0.0, mu)

    for p in range(npts):
        if not (np.isfinite(pos[p, 0]) and np.isfinite(pos[p, 1]) and np.isfinite(vel[p, 0]) and np.isfinite(vel[p, 1])):
            return False
    if has_box:
        for k in range(4):
            if not np.isfinite(box[k]):
                return False
    return True


_EMPTY = np.zeros(0)


def step(w: SimWorld, control_dt: float = CONTROL_DT, substeps: int = SUBSTEPS, ramp: float = ACTUATION_RAMP) -> None:
    """Advance one control step. Rest lengths move linearly from their previous values
    to the targets set by :func:`apply_actions` over the first ``ramp`` of the step
    (``ramp=0`` switches them instantly).
    """
    if not 0.0 <= ramp <= 1.0:
        raise ValueError("ramp must lie in [0, 1]")
    t = w.terrain
    box = w.box if w.box is not None else _EMPTY
    spec = w.box_spec or BoxSpec()
    box_params = np.array([spec.size / 2.0, 1.0 / spec.mass, CONTACT_STIFFNESS, CONTACT_DAMPING])
    ok = _simulate(
        w.pos, w.vel, w.inv_mass, w.springs, w.rest, w.stiffness, w.damping,
        substeps, control_dt / substeps, w.gravity, MAX_SPEED,
        np.asarray(t.ground_x, dtype=float), np.asarray(t.ground_y, dtype=float),
        np.asarray(t.wall_y, dtype=float), np.asarray(t.left_x, dtype=float), np.asarray(t.right_x, dtype=float),
        t.friction, box, box_params, w.settled_rest, int(round(ramp * substeps)),
    )
    w.settled_rest = w.rest.copy()
    w.steps += 1
    w.substeps += substeps
    w.time += control_dt
    if not ok:
        raise SimulationError(
            f"non-finite state after control step {w.steps} (t={w.time:.3f}s, "
            f"{w.point_count} points, {w.spring_count} springs, body {w.body.digest()})"
        )


@njit(cache=True)
def _kinematics(pos, vel, mass, cell_corners, left, right):
    total = 0.0
    com = np.zeros(2)
    comv = np.zeros(2)
    lc = np.zeros(2)
    rc = np.zeros(2)
    lm = 0.0
    rm = 0.0
    bbox = np.array([np.inf, np.inf, -np.inf, -np.inf])
    for p in range(pos.shape[0]):
        m = mass[p]
        total += m
        for k in range(2):
            com[k] += m * pos[p, k]
            comv[k] += m * vel[p, k]
        if left[p]:
            lm += m
            lc[0] += m * pos[p, 0]
            lc[1] += m * pos[p, 1]
        elif right[p]:
            rm += m
            rc[0] += m * pos[p, 0]
            rc[1] += m * pos[p, 1]
        bbox[0] = min(bbox[0], pos[p, 0])
        bbox[1] = min(bbox[1], pos[p, 1])
        bbox[2] = max(bbox[2], pos[p, 0])
        bbox[3] = max(bbox[3], pos[p, 1])
    com /= total
    comv /= total
    dx = rc[0] / rm - lc[0] / lm
    dy = rc[1] / rm - lc[1] / lm
    orientation = math.atan2(dy, dx)
    centers = np.zeros((cell_corners.shape[0], 2))
    for c in range(cell_corners.shape[0]):
        if cell_corners[c, 0] < 0:
            continue
        for k in range(4):
            q = cell_corners[c, k]
            centers[c, 0] += 0.25 * pos[q, 0]
            centers[c, 1] += 0.25 * pos[q, 1]
    return com, comv, centers, orientation, bbox


def observe_kinematics(w: SimWorld) -> KinematicsSummary:
    com, comv, centers, orientation, bbox = _kinematics(w.pos, w.vel, w.mass, w.cell_corners, w.left, w.right)
    summary = KinematicsSummary(com, comv, centers, float(orientation), bbox)
    if w.box is not None:
        summary.box_position = w.box[:2].copy()
        summary.box_velocity = w.box[2:].copy()
    return summary


def total_momentum(w: SimWorld) -> np.ndarray:
    return (w.mass[:, None] * w.vel).sum(axis=0)
