"""Seeded kinematic multi-lane highway simulator.

World state is an immutable :class:`Scene`; :func:`step` returns a new one.
Lane 0 is the rightmost lane. Positions are longitudinal stations in meters
on an infinite straight road. One decision step defaults to dt = 1 s.

Scripted perturbations (new obstacles, traffic-pattern shifts, sensor noise)
are applied per step through :func:`inject_drift`, which is the identity
outside its [start_step, end_step) window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

VEHICLE_LENGTH_M = 5.0
MIN_SPAWN_GAP_M = 10.0
ACCEL_CMD = 2.0       # m/s^2, comfortable acceleration
DECEL_CMD = -3.0      # m/s^2, firm braking
REVERSION_ACCEL = 1.0  # m/s^2, other vehicles relaxing toward target speed
DEFAULT_V_MAX = 30.0
DEFAULT_DT = 1.0


class Action(str, Enum):
    """Closed five-action vocabulary executed by the ego vehicle."""

    ACCELERATE = "Accelerate"
    DECELERATE = "Decelerate"
    KEEP = "Keep"
    LANE_CHANGE_LEFT = "LaneChangeLeft"
    LANE_CHANGE_RIGHT = "LaneChangeRight"


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


class IllegalLaneChange(ValueError):
    """Lane change requested at a road edge; signals a caller bug."""


@dataclass(frozen=True)
class VehicleState:
    """One vehicle: lane index, longitudinal position, speed, acceleration.

    ``target_speed`` is the cruise speed a non-ego vehicle relaxes toward at
    +-1 m/s^2; ``None`` means "hold the current speed as target". The ego's
    target_speed is ignored (its speed follows the executed actions).
    """

    id: int
    lane: int
    position: float
    speed: float
    accel: float = 0.0
    target_speed: float | None = None

    def resolved_target(self) -> float:
        return self.speed if self.target_speed is None else self.target_speed


@dataclass(frozen=True)
class Obstacle:
    """Static same-lane hazard centered at ``position`` with total length
    ``extent_m``."""

    lane: int
    position: float
    extent_m: float
    kind: str = "debris"


@dataclass(frozen=True)
class Scene:
    """Full ground-truth world state for one decision step."""

    time: float
    lane_count: int
    ego: VehicleState
    others: tuple[VehicleState, ...] = ()
    obstacles: tuple[Obstacle, ...] = ()
    noise_sigma: float = 0.0
    v_max: float = DEFAULT_V_MAX

    def validate(self) -> None:
        if self.lane_count < 1:
            raise ScenarioError("lane_count must be >= 1")
        ids = [self.ego.id] + [v.id for v in self.others]
        if len(set(ids)) != len(ids):
            raise ScenarioError("vehicle ids must be unique")
        for v in (self.ego, *self.others):
            if v.speed < 0:
                raise ScenarioError(f"vehicle {v.id} has negative speed")
            if not (0 <= v.lane < self.lane_count):
                raise ScenarioError(f"vehicle {v.id} lane {v.lane} out of range")
            if not math.isfinite(v.position):
                raise ScenarioError(f"vehicle {v.id} position not finite")


@dataclass(frozen=True)
class NeighborInfo:
    """Gap (position-to-position, meters) and relative speed of one slot."""

    gap: float
    rel_speed: float


@dataclass(frozen=True)
class NeighborSet:
    """The four canonical slots around the ego; ``None`` marks an absent slot."""

    front_same: NeighborInfo | None
    rear_same: NeighborInfo | None
    front_left: NeighborInfo | None
    front_right: NeighborInfo | None


@dataclass(frozen=True)
class DriftInjection:
    """Scripted scenario perturbation active on steps in [start_step, end_step).

    kind is one of ``NewObstacle`` (adds an obstacle), ``TrafficPatternShift``
    (adds ``speed_offset`` to every non-ego target speed) or ``SensorNoise``
    (sets the scene's observation-noise sigma).
    """

    kind: str
    start_step: int
    end_step: int
    lane: int = 0
    position: float = 0.0
    extent_m: float = 4.0
    obstacle_kind: str = "injected"
    speed_offset: float = 0.0
    sigma: float = 0.0

    KINDS = ("NewObstacle", "TrafficPatternShift", "SensorNoise")

    def validate(self) -> None:
        if self.kind not in self.KINDS:
            raise ScenarioError(f"unknown injection kind {self.kind!r}")
        if self.start_step >= self.end_step:
            raise ScenarioError("injection start_step must be < end_step")
        if self.kind == "NewObstacle" and self.extent_m <= 0:
            raise ScenarioError("obstacle extent_m must be positive")
        if self.kind == "SensorNoise" and self.sigma < 0:
            raise ScenarioError("noise sigma must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """Deterministic scenario template expanded by :func:`spawn_scenario`.

    ``fixed_others`` pins exact vehicles (id, lane, position, speed, accel);
    ``n_random_vehicles`` more are placed from the seed inside ``spawn_span``
    with per-lane gaps of at least 10 m, speeds drawn from ``speed_range``
    and used as their target speeds.
    """

    name: str = "scenario"
    lane_count: int = 4
    ego_lane: int = 0
    ego_speed: float = 25.0
    ego_position: float = 0.0
    ego_accel: float = 0.0
    v_max: float = DEFAULT_V_MAX
    n_random_vehicles: int = 0
    speed_range: tuple[float, float] = (18.0, 24.0)
    spawn_span: tuple[float, float] = (50.0, 1500.0)
    spawn_lanes: tuple[int, ...] | None = None
    fixed_others: tuple[VehicleState, ...] = ()

    def validate(self) -> None:
        if self.lane_count < 1:
            raise ScenarioError("lane_count must be >= 1")
        if not (0 <= self.ego_lane < self.lane_count):
            raise ScenarioError("ego_lane out of range")
        if self.ego_speed < 0:
            raise ScenarioError("ego_speed must be >= 0")
        if self.n_random_vehicles < 0:
            raise ScenarioError("n_random_vehicles must be >= 0")
        lo, hi = self.speed_range
        if lo < 0 or hi < lo:
            raise ScenarioError("speed_range must satisfy 0 <= lo <= hi")
        if self.v_max <= 0:
            raise ScenarioError("v_max must be positive")
        if self.spawn_span[1] < self.spawn_span[0]:
            raise ScenarioError("spawn_span must be ordered")
        for lane in self.spawn_lanes or ():
            if not (0 <= lane < self.lane_count):
                raise ScenarioError(f"spawn lane {lane} out of range")


def spawn_scenario(config: ScenarioConfig, seed: int) -> Scene:
    """Build the initial scene as a deterministic function of (config, seed)."""
    config.validate()
    ego = VehicleState(
        id=0,
        lane=config.ego_lane,
        position=config.ego_position,
        speed=config.ego_speed,
        accel=config.ego_accel,
    )
    others = list(config.fixed_others)
    rng = np.random.default_rng(seed)
    lanes = config.spawn_lanes or tuple(range(config.lane_count))
    next_id = max([1000] + [v.id + 1 for v in others])
    placed: list[tuple[int, float]] = [(ego.lane, ego.position)]
    placed += [(v.lane, v.position) for v in others]
    lo, hi = config.spawn_span
    for _ in range(config.n_random_vehicles):
        for _attempt in range(200):
            lane = int(rng.choice(lanes))
            position = config.ego_position + float(rng.uniform(lo, hi))
            if all(
                pl != lane or abs(pp - position) >= MIN_SPAWN_GAP_M
                for pl, pp in placed
            ):
                break
        else:
            raise ScenarioError("could not place vehicles with 10 m gaps; widen spawn_span")
        speed = float(rng.uniform(*config.speed_range))
        others.append(
            VehicleState(
                id=next_id,
                lane=lane,
                position=position,
                speed=speed,
                accel=0.0,
                target_speed=speed,
            )
        )
        placed.append((lane, position))
        next_id += 1
    scene = Scene(
        time=0.0,
        lane_count=config.lane_count,
        ego=ego,
        others=tuple(others),
        v_max=config.v_max,
    )
    scene.validate()
    return scene


def legal_actions(scene: Scene) -> tuple[Action, ...]:
    """Actions executable from the ego's current lane."""
    acts = [Action.ACCELERATE, Action.DECELERATE, Action.KEEP]
    if scene.ego.lane < scene.lane_count - 1:
        acts.append(Action.LANE_CHANGE_LEFT)
    if scene.ego.lane > 0:
        acts.append(Action.LANE_CHANGE_RIGHT)
    return tuple(acts)


def _advance(v: float, a_cmd: float, position: float, dt: float, v_max: float) -> tuple[float, float, float]:
    """Integrate one step with the speed clamp folded into the acceleration.

    Returns (new_speed, new_position, effective_accel). When no clamp binds
    this is exactly p' = p + v dt + a dt^2 / 2.
    """
    v_new = min(max(v + a_cmd * dt, 0.0), v_max)
    a_eff = (v_new - v) / dt
    p_new = position + v * dt + 0.5 * a_eff * dt * dt
    return v_new, p_new, a_eff


def step(scene: Scene, action: Action, dt: float = DEFAULT_DT) -> Scene:
    """Advance the world one decision step with the ego executing ``action``.

    Lane changes complete within the step and preserve speed. Other vehicles
    relax toward their target speeds at +-1 m/s^2. Raises
    :class:`IllegalLaneChange` for a lane change at the road edge.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    ego = scene.ego
    lane = ego.lane
    if action is Action.LANE_CHANGE_LEFT:
        if lane >= scene.lane_count - 1:
            raise IllegalLaneChange("already in the leftmost lane")
        lane += 1
        a_cmd = 0.0
    elif action is Action.LANE_CHANGE_RIGHT:
        if lane <= 0:
            raise IllegalLaneChange("already in the rightmost lane")
        lane -= 1
        a_cmd = 0.0
    elif action is Action.ACCELERATE:
        a_cmd = ACCEL_CMD
    elif action is Action.DECELERATE:
        a_cmd = DECEL_CMD
    else:
        a_cmd = 0.0

    v_new, p_new, a_eff = _advance(ego.speed, a_cmd, ego.position, dt, scene.v_max)
    new_ego = replace(ego, lane=lane, position=p_new, speed=v_new, accel=a_eff)

    new_others = []
    for veh in scene.others:
        target = veh.resolved_target()
        delta = target - veh.speed
        # Land exactly on the target instead of oscillating around it.
        a_rev = max(-REVERSION_ACCEL, min(REVERSION_ACCEL, delta / dt))
        v2, p2, a2 = _advance(veh.speed, a_rev, veh.position, dt, scene.v_max)
        new_others.append(replace(veh, position=p2, speed=v2, accel=a2))

    return replace(scene, time=scene.time + dt, ego=new_ego, others=tuple(new_others))


def check_collision(scene: Scene) -> bool:
    """True iff the ego overlaps a same-lane vehicle or obstacle.

    Vehicles occupy +-2.5 m around their position, obstacles +-extent/2;
    overlap is strict interval intersection.
    """
    ego = scene.ego
    for veh in scene.others:
        if veh.lane == ego.lane and abs(veh.position - ego.position) < VEHICLE_LENGTH_M:
            return True
    for obs in scene.obstacles:
        radius = VEHICLE_LENGTH_M / 2.0 + obs.extent_m / 2.0
        if obs.lane == ego.lane and abs(obs.position - ego.position) < radius:
            return True
    return False


def inject_drift(scene: Scene, injection: DriftInjection, step_index: int) -> Scene:
    """Apply ``injection`` if ``step_index`` falls inside its window.

    Outside [start_step, end_step) the scene passes through unchanged (the
    very same object, so structural identity holds).
    """
    if not (injection.start_step <= step_index < injection.end_step):
        return scene
    if injection.kind == "NewObstacle":
        obstacle = Obstacle(
            lane=injection.lane,
            position=injection.position,
            extent_m=injection.extent_m,
            kind=injection.obstacle_kind,
        )
        if obstacle in scene.obstacles:
            return scene
        return replace(scene, obstacles=scene.obstacles + (obstacle,))
    if injection.kind == "TrafficPatternShift":
        shifted = tuple(
            replace(v, target_speed=v.resolved_target() + injection.speed_offset)
            for v in scene.others
        )
        return replace(scene, others=shifted)
    if injection.kind == "SensorNoise":
        return replace(scene, noise_sigma=injection.sigma)
    raise ScenarioError(f"unknown injection kind {injection.kind!r}")


def _nearest(candidates: list[VehicleState], ego: VehicleState) -> NeighborInfo | None:
    if not candidates:
        return None
    best = min(candidates, key=lambda v: abs(v.position - ego.position))
    return NeighborInfo(
        gap=abs(best.position - ego.position),
        rel_speed=best.speed - ego.speed,
    )


def nearest_neighbors(scene: Scene) -> NeighborSet:
    """Extract the four canonical vehicle slots around the ego.

    Slots cover the nearest vehicle ahead in the ego lane, behind in the ego
    lane, and ahead in the adjacent left/right lanes. Gaps are measured
    position-to-position. Obstacles are not part of this view.
    """
    ego = scene.ego
    front_same = [v for v in scene.others if v.lane == ego.lane and v.position >= ego.position]
    rear_same = [v for v in scene.others if v.lane == ego.lane and v.position < ego.position]
    front_left = [
        v for v in scene.others
        if v.lane == ego.lane + 1 and v.position >= ego.position
    ]
    front_right = [
        v for v in scene.others
        if v.lane == ego.lane - 1 and v.position >= ego.position
    ]
    return NeighborSet(
        front_same=_nearest(front_same, ego),
        rear_same=_nearest(rear_same, ego),
        front_left=_nearest(front_left, ego),
        front_right=_nearest(front_right, ego),
    )
