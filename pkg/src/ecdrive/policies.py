"""Driving policies: fast edge rule chain, cloud rollout planner, remote adapter.

The edge policy mimics a small on-board model: a fixed chain of safety
checks evaluated in order, each appending one reasoning step, with a
confidence derived from how much clearance the chosen maneuver had. It
perceives vehicles only; obstacles are invisible to it by design, which is
exactly the situation that makes escalation to the cloud worthwhile.

The cloud policy perceives the full scene (obstacles included), predicts
every entity forward with a constant-acceleration rollout, and picks the
cheapest action under a collision-dominated cost. A crashed rollout halts
the ego (speed zero for the remaining horizon), so unavoidable impacts are
priced by how much motion survives before them: later and slower is cheaper.

``remote_decide`` delegates either role to a chat-completion HTTP endpoint
and decodes the reply with the decision lexicon.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass

from .codec import describe, parse_decision
from .highway import (
    ACCEL_CMD,
    DECEL_CMD,
    DEFAULT_DT,
    VEHICLE_LENGTH_M,
    Action,
    Scene,
    legal_actions,
    nearest_neighbors,
)

logger = logging.getLogger(__name__)

T_HEADWAY = 1.5       # s, target time headway
G_MIN = 5.0           # m, minimum clearance
KAPPA_EDGE = 5.0      # m, confidence squash scale for the edge margins
KAPPA_CLOUD = 10.0    # cost units, confidence squash scale for the cloud
HORIZON = 3           # rollout steps
W_COLLISION = 1000.0
W_SPEED = 1.0
W_LANE_CHANGE = 2.0
W_HEADWAY = 50.0
GAP_SENTINEL = 200.0

#: Deterministic tie-break order for the cloud argmin.
ACTION_ORDER = (
    Action.KEEP,
    Action.ACCELERATE,
    Action.LANE_CHANGE_LEFT,
    Action.LANE_CHANGE_RIGHT,
    Action.DECELERATE,
)


class RemoteUnavailable(RuntimeError):
    """Transport failure or timeout while calling the remote endpoint."""

    def __init__(self, message: str, timed_out: bool = False):
        super().__init__(message)
        self.timed_out = timed_out


@dataclass(frozen=True)
class Decision:
    """An action with its ordered reasoning steps and a confidence in [0, 1]."""

    action: Action
    rationale: tuple[str, ...]
    confidence: float
    source: str = "Edge"


@dataclass(frozen=True)
class RolloutResult:
    """Predicted outcome of one candidate action over the rollout horizon."""

    action: Action
    cost: float
    predicted_min_gap: float
    collision_predicted: bool


@dataclass(frozen=True)
class EndpointConfig:
    """Remote chat-completion endpoint settings; the bearer token comes from
    the EC_DRIVE_API_KEY environment variable, never from config files."""

    base_url: str
    model: str = "gpt-4"
    timeout_s: float = 10.0
    role: str = "Cloud"


def _confidence(margin_m: float, kappa: float) -> float:
    delta = max(0.0, margin_m)
    return delta / (delta + kappa)


def _gaps_for_lane(scene: Scene, lane: int) -> tuple[float, float]:
    """(front gap, rear gap) to the nearest vehicles in ``lane``; 200 if none."""
    ego = scene.ego
    front = GAP_SENTINEL
    rear = GAP_SENTINEL
    for veh in scene.others:
        if veh.lane != lane:
            continue
        gap = veh.position - ego.position
        if gap >= 0:
            front = min(front, gap)
        else:
            rear = min(rear, -gap)
    return front, rear


def edge_decide(scene: Scene) -> Decision:
    """Fast sequential rule chain; sees vehicles only, never obstacles.

    Checks, in order: accelerate, keep speed, change left, change right,
    then brakes as the fallback. Each evaluated rule records one reasoning
    step. Confidence is margin / (margin + 5 m) where the margin is the
    clearance in meters by which the chosen rule's gap constraint held.
    """
    ego = scene.ego
    v = ego.speed
    slots = nearest_neighbors(scene)
    gap_f = slots.front_same.gap if slots.front_same else GAP_SENTINEL
    rationale: list[str] = []

    v_acc = min(v + ACCEL_CMD * DEFAULT_DT, scene.v_max)
    h_acc = gap_f / v_acc if v_acc > 0 else math.inf
    margin_headway = gap_f - T_HEADWAY * v
    ok = h_acc >= T_HEADWAY and gap_f >= G_MIN
    rationale.append(
        f"Can accelerate? front gap {gap_f:.1f} m, projected headway {h_acc:.2f} s"
        f" -> {'yes' if ok else 'no'}."
    )
    if ok:
        return Decision(
            action=Action.ACCELERATE,
            rationale=tuple(rationale),
            confidence=_confidence(margin_headway, KAPPA_EDGE),
        )

    h_keep = gap_f / v if v > 0 else math.inf
    ok = h_keep >= T_HEADWAY
    rationale.append(
        f"Can keep speed? current headway {h_keep:.2f} s -> {'yes' if ok else 'no'}."
    )
    if ok:
        return Decision(
            action=Action.KEEP,
            rationale=tuple(rationale),
            confidence=_confidence(margin_headway, KAPPA_EDGE),
        )

    for side, action in (("left", Action.LANE_CHANGE_LEFT), ("right", Action.LANE_CHANGE_RIGHT)):
        target_lane = ego.lane + 1 if side == "left" else ego.lane - 1
        if not (0 <= target_lane < scene.lane_count):
            rationale.append(f"Can change lane {side}? no lane to the {side}.")
            continue
        front_t, rear_t = _gaps_for_lane(scene, target_lane)
        front_need = G_MIN + T_HEADWAY * v
        ok = front_t >= front_need and rear_t >= G_MIN
        rationale.append(
            f"Can change lane {side}? front gap {front_t:.1f} m, rear gap {rear_t:.1f} m"
            f" -> {'yes' if ok else 'no'}."
        )
        if ok:
            margin = min(front_t - front_need, rear_t - G_MIN)
            return Decision(
                action=action,
                rationale=tuple(rationale),
                confidence=_confidence(margin, KAPPA_EDGE),
            )

    rationale.append(f"Falling back to braking: front gap {gap_f:.1f} m.")
    return Decision(
        action=Action.DECELERATE,
        rationale=tuple(rationale),
        confidence=_confidence(gap_f - G_MIN, KAPPA_EDGE),
    )


@dataclass(frozen=True)
class _Entity:
    """A hazard in the rollout: a vehicle or a static obstacle."""

    lane: int
    position: float
    speed: float
    accel: float
    radius: float  # center distance below which the ego overlaps it
    moves: bool


def _scene_entities(scene: Scene) -> list[_Entity]:
    entities = [
        _Entity(v.lane, v.position, v.speed, v.accel, VEHICLE_LENGTH_M, True)
        for v in scene.others
    ]
    entities += [
        _Entity(o.lane, o.position, 0.0, 0.0, VEHICLE_LENGTH_M / 2.0 + o.extent_m / 2.0, False)
        for o in scene.obstacles
    ]
    return entities


def _segment_hits(rel0: float, rel1: float, radius: float) -> bool:
    """Did the relative position cross within ``radius`` during the step?"""
    if rel0 * rel1 <= 0:
        return True
    return min(abs(rel0), abs(rel1)) < radius


def rollout_cost(scene: Scene, action: Action, horizon: int = HORIZON) -> RolloutResult:
    """Predict ``horizon`` steps of executing ``action`` then holding speed.

    Other vehicles keep their current acceleration; obstacles stay put. A
    predicted collision zeroes the ego's speed for the rest of the horizon.
    cost = 1000 * [collision] + (v_max - mean ego speed)
         + 2 * [lane change] + 50 * max(0, T_h - min headway) / T_h.
    Illegal lane changes cost infinity and are excluded from planning.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if action not in legal_actions(scene):
        return RolloutResult(action, math.inf, 0.0, False)

    dt = DEFAULT_DT
    ego_lane = scene.ego.lane
    if action is Action.LANE_CHANGE_LEFT:
        ego_lane += 1
    elif action is Action.LANE_CHANGE_RIGHT:
        ego_lane -= 1

    ego_v = scene.ego.speed
    ego_p = scene.ego.position
    entities = _scene_entities(scene)
    positions = [e.position for e in entities]
    speeds = [e.speed for e in entities]

    collided = False
    min_gap = GAP_SENTINEL
    min_headway = math.inf
    speed_sum = 0.0

    for k in range(horizon):
        a_cmd = 0.0
        if k == 0 and action is Action.ACCELERATE:
            a_cmd = ACCEL_CMD
        elif k == 0 and action is Action.DECELERATE:
            a_cmd = DECEL_CMD

        if collided:
            ego_v_new, ego_p_new = 0.0, ego_p
        else:
            ego_v_new = min(max(ego_v + a_cmd * dt, 0.0), scene.v_max)
            ego_p_new = ego_p + 0.5 * (ego_v + ego_v_new) * dt

        new_positions = []
        new_speeds = []
        for ent, pos, spd in zip(entities, positions, speeds):
            spd_new = min(max(spd + ent.accel * dt, 0.0), scene.v_max) if ent.moves else 0.0
            pos_new = pos + 0.5 * (spd + spd_new) * dt
            new_positions.append(pos_new)
            new_speeds.append(spd_new)

        if not collided:
            for ent, pos, pos_new in zip(entities, positions, new_positions):
                if ent.lane != ego_lane:
                    continue
                if _segment_hits(pos - ego_p, pos_new - ego_p_new, ent.radius):
                    collided = True
                    ego_v_new = 0.0
                    break

        ego_v, ego_p = ego_v_new, ego_p_new
        positions, speeds = new_positions, new_speeds
        speed_sum += ego_v

        if collided:
            min_gap = 0.0
            min_headway = 0.0
        else:
            front = [p - ego_p for ent, p in zip(entities, positions)
                     if ent.lane == ego_lane and p >= ego_p]
            gap = min(front) if front else GAP_SENTINEL
            min_gap = min(min_gap, gap)
            min_headway = min(min_headway, gap / ego_v if ego_v > 0 else math.inf)

    mean_speed = speed_sum / horizon
    headway_term = 0.0 if math.isinf(min_headway) else max(0.0, T_HEADWAY - min_headway) / T_HEADWAY
    is_lc = action in (Action.LANE_CHANGE_LEFT, Action.LANE_CHANGE_RIGHT)
    cost = (
        W_COLLISION * collided
        + W_SPEED * (scene.v_max - mean_speed)
        + W_LANE_CHANGE * is_lc
        + W_HEADWAY * headway_term
    )
    return RolloutResult(action, cost, min_gap, collided)


def cloud_decide(scene: Scene, horizon: int = HORIZON) -> Decision:
    """Three-stage cloud policy: perceive everything, predict, plan by argmin.

    Rationale lists one "perceived:" line per hazard, the per-action rollout
    costs, and the selection. Confidence comes from the cost margin between
    the best and second-best action.
    """
    rationale: list[str] = []
    for veh in scene.others:
        rationale.append(
            f"perceived: vehicle {veh.id} in lane {veh.lane} at {veh.position:.2f} m, "
            f"speed {veh.speed:.1f} m/s"
        )
    for obs in scene.obstacles:
        rationale.append(
            f"perceived: obstacle ({obs.kind}) in lane {obs.lane} at {obs.position:.2f} m, "
            f"extent {obs.extent_m:.1f} m"
        )

    candidates = [a for a in ACTION_ORDER if a in legal_actions(scene)]
    rationale.append(f"predicted {horizon}-step rollouts for {len(candidates)} candidate actions")
    results = [rollout_cost(scene, a, horizon) for a in candidates]
    for res in results:
        rationale.append(f"cost[{res.action.value}] = {res.cost:.3f}")

    ranked = sorted(range(len(results)), key=lambda i: (results[i].cost, i))
    best = results[ranked[0]]
    margin = results[ranked[1]].cost - best.cost if len(ranked) > 1 else math.inf
    confidence = 1.0 if math.isinf(margin) else _confidence(margin, KAPPA_CLOUD)
    rationale.append(f"selected {best.action.value} (cost {best.cost:.3f}, margin {margin:.3f})")
    return Decision(
        action=best.action,
        rationale=tuple(rationale),
        confidence=confidence,
        source="Cloud",
    )


_SYSTEM_PROMPTS = {
    "Edge": (
        "You are the in-vehicle driving assistant of an autonomous car on a highway. "
        "Reason step by step: first assess whether the vehicle can accelerate, then "
        "whether it is safe to keep the current speed, then whether a lane change is "
        "possible and safe. Finish with exactly one decision phrase: accelerate, "
        "decelerate, keep current speed, change lane to the left, or change lane to "
        "the right."
    ),
    "Cloud": (
        "You are the remote driving planner assisting an autonomous car with a "
        "difficult highway scene. Work through three stages: perception (list every "
        "vehicle and hazard), prediction (where each will be over the next three "
        "seconds), and planning (compare the candidate maneuvers). Finish with "
        "exactly one decision phrase: accelerate, decelerate, keep current speed, "
        "change lane to the left, or change lane to the right."
    ),
}


def remote_decide(scene: Scene, endpoint: EndpointConfig, role: str | None = None) -> Decision:
    """Delegate one decision to a chat-completion endpoint.

    Sends the rendered scene description with the role's system prompt at
    temperature 0 and decodes the reply with the decision lexicon. Raises
    :class:`RemoteUnavailable` on transport failure or timeout and lets
    :class:`NoDecisionFound` propagate on undecodable replies; the caller is
    expected to fall back to the local policy of the same role.
    """
    import requests

    role = role or endpoint.role
    if role not in _SYSTEM_PROMPTS:
        raise ValueError(f"unknown remote role {role!r}")
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get("EC_DRIVE_API_KEY")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": endpoint.model,
        "messages": [
            {"role": "system", "content": _SYSTEM_PROMPTS[role]},
            {"role": "user", "content": describe(scene).text},
        ],
        "temperature": 0,
    }
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    try:
        response = requests.post(url, json=body, headers=headers, timeout=endpoint.timeout_s)
        response.raise_for_status()
        content = response.json()["choices"][0]["message"]["content"]
    except requests.Timeout as exc:
        raise RemoteUnavailable(f"remote endpoint timed out: {exc}", timed_out=True) from exc
    except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
        raise RemoteUnavailable(f"remote endpoint failed: {exc}") from exc

    action = parse_decision(content)
    lines = tuple(line for line in content.splitlines() if line.strip()) or (content,)
    return Decision(action=action, rationale=lines, confidence=1.0, source="Remote")
