"""Per-step collaboration loop: featurize, edge decide, gate, escalate, log.

Each step the edge model decides first; the drift detector then tests the
sliding feature window and, together with the confidence gate, decides
whether the step escalates to the cloud, whose decision overrides the
edge's for execution. Latency and uplink bytes are accounted from
configured constants so seeded experiments are machine independent; only
measured remote calls record wall-clock time.

Injections never mutate the persistent world: the effective scene of a step
is derived by overlaying the active injections on the pristine state and
the overlay is stripped again after stepping, so an obstacle vanishes and
traffic targets revert once their window closes.

Traces serialize to JSON Lines: a header object (schema_version "1", config
snapshot, seed, summary), then one object per step record.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .codec import featurize
from .drift import DriftReport, confidence_gate, fit, predict
from .highway import (
    Action,
    DriftInjection,
    Obstacle,
    Scene,
    ScenarioConfig,
    VehicleState,
    check_collision,
    inject_drift,
    legal_actions,
    spawn_scenario,
    step,
)
from .policies import (
    Decision,
    EndpointConfig,
    RemoteUnavailable,
    cloud_decide,
    edge_decide,
    remote_decide,
)
from .codec import NoDecisionFound

logger = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = "1"
MODES = ("EdgeOnly", "CloudOnly", "Collaborative")
REASONS = ("Drift", "LowConfidence", "None", "Both")


@dataclass(frozen=True)
class OffloadConfig:
    """Offloading, detector and latency-model settings for one experiment."""

    mode: str = "Collaborative"
    tau: float = 0.5
    method: str = "ks"
    alpha: float = 0.05
    window: int = 40
    n_ref: int = 200
    n_perm: int = 100
    edge_ms: float = 50.0
    cloud_ms: float = 750.0
    rtt_ms: float = 50.0
    uplink_bytes_per_sample: int = 2048

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError("tau must lie in [0, 1]")
        if self.method.lower() not in ("ks", "mmd"):
            raise ValueError(f"unknown detector method {self.method!r}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if self.window < 10:
            raise ValueError("window must be >= 10")
        if self.n_ref < 30:
            raise ValueError("n_ref must be >= 30")
        if self.n_perm < 20:
            raise ValueError("n_perm must be >= 20")
        for name in ("edge_ms", "cloud_ms", "rtt_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.uplink_bytes_per_sample < 0:
            raise ValueError("uplink_bytes_per_sample must be >= 0")


@dataclass(frozen=True)
class StepRecord:
    """Everything observed, decided and accounted on one step."""

    step: int
    feature: np.ndarray
    edge_decision: Decision
    drift_report: DriftReport | None
    offloaded: bool
    offload_reason: str
    cloud_decision: Decision | None
    executed_action: Action
    latency_ms: float
    bytes_up: int
    collision: bool


@dataclass(frozen=True)
class Metrics:
    """Episode-level summary, recomputable from the step records."""

    offload_rate: float
    mean_latency_ms: float
    p95_latency_ms: float
    total_bytes_up: int
    collision_count: int
    agreement_rate: float
    in_window_offload_fraction: float


@dataclass(frozen=True)
class EpisodeTrace:
    """One seeded episode: config snapshot, per-step records and summary."""

    scenario: ScenarioConfig
    injections: tuple[DriftInjection, ...]
    offload: OffloadConfig
    seed: int
    steps: int
    records: tuple[StepRecord, ...]
    summary: Metrics
    remote_base_url: str | None = None


def offload_rule(
    report: DriftReport | None, confidence: float, config: OffloadConfig
) -> tuple[bool, str]:
    """Decide whether a step escalates to the cloud and why.

    Collaborative mode escalates on detected drift OR a confidence below
    tau; EdgeOnly never escalates and CloudOnly always does.
    """
    if config.mode == "EdgeOnly":
        return False, "None"
    if config.mode == "CloudOnly":
        return True, "None"
    drift = bool(report.is_drift) if report is not None else False
    low = confidence_gate(confidence, config.tau)
    if drift and low:
        return True, "Both"
    if drift:
        return True, "Drift"
    if low:
        return True, "LowConfidence"
    return False, "None"


def _apply_injections(
    scene: Scene, injections: tuple[DriftInjection, ...], step_index: int
) -> Scene:
    for injection in injections:
        scene = inject_drift(scene, injection, step_index)
    return scene


def _strip_injections(
    scene: Scene, injections: tuple[DriftInjection, ...], step_index: int
) -> Scene:
    """Undo the overlay of every injection active on ``step_index``.

    Evolved quantities (speeds, positions) keep the effect the injection had
    during the step; only the overlayed fields revert so the next step's
    overlay starts from pristine state.
    """
    for injection in injections:
        if not (injection.start_step <= step_index < injection.end_step):
            continue
        if injection.kind == "NewObstacle":
            marker = Obstacle(
                lane=injection.lane,
                position=injection.position,
                extent_m=injection.extent_m,
                kind=injection.obstacle_kind,
            )
            scene = replace(
                scene, obstacles=tuple(o for o in scene.obstacles if o != marker)
            )
        elif injection.kind == "TrafficPatternShift":
            reverted = tuple(
                replace(v, target_speed=v.resolved_target() - injection.speed_offset)
                for v in scene.others
            )
            scene = replace(scene, others=reverted)
        elif injection.kind == "SensorNoise":
            scene = replace(scene, noise_sigma=0.0)
    return scene


def _timed_remote(
    scene: Scene,
    endpoint: EndpointConfig,
    role: str,
    fallback,
) -> tuple[Decision, float]:
    """Call the remote endpoint, falling back to the local policy of the role.

    Returns the decision and the measured wall-clock milliseconds; a timed
    out request accounts for exactly the configured timeout.
    """
    start = time.perf_counter()
    try:
        decision = remote_decide(scene, endpoint, role)
        return decision, (time.perf_counter() - start) * 1000.0
    except RemoteUnavailable as exc:
        elapsed = endpoint.timeout_s * 1000.0 if exc.timed_out else (
            time.perf_counter() - start
        ) * 1000.0
        logger.warning("remote %s unavailable, using local policy: %s", role, exc)
        return fallback(scene), elapsed
    except NoDecisionFound as exc:
        elapsed = (time.perf_counter() - start) * 1000.0
        logger.warning("remote %s reply had no decision, using local policy: %s", role, exc)
        return fallback(scene), elapsed


def run_episode(
    scenario: ScenarioConfig,
    injections,
    config: OffloadConfig,
    seed: int,
    steps: int,
    endpoint: EndpointConfig | None = None,
) -> EpisodeTrace:
    """Run one seeded episode of the collaboration loop.

    A burn-in pass of ``config.n_ref`` injection-free steps from the same
    seed collects the detector's reference features first; the measured
    episode then restarts from the identical initial scene. Remote failures
    degrade to the local policy of the affected role and never abort.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    config.validate()
    scenario.validate()
    injections = tuple(injections)
    for injection in injections:
        injection.validate()

    scene = spawn_scenario(scenario, seed)
    reference = []
    for _ in range(config.n_ref):
        reference.append(featurize(scene))
        scene = step(scene, edge_decide(scene).action)
    detector = fit(
        reference,
        method=config.method,
        alpha=config.alpha,
        window=config.window,
        seed=seed,
        n_perm=config.n_perm,
    )

    scene = spawn_scenario(scenario, seed)
    noise_rng = np.random.default_rng(seed)
    window_buf: deque[np.ndarray] = deque(maxlen=config.window)
    records: list[StepRecord] = []
    remote_edge = endpoint is not None and endpoint.role == "Edge"
    remote_cloud = endpoint is not None and endpoint.role == "Cloud"

    for index in range(steps):
        effective = _apply_injections(scene, injections, index)
        collision = check_collision(effective)
        feature = featurize(effective, noise_rng)

        if remote_edge:
            edge, edge_latency = _timed_remote(effective, endpoint, "Edge", edge_decide)
        else:
            edge, edge_latency = edge_decide(effective), config.edge_ms

        window_buf.append(feature)
        report = (
            predict(detector, np.asarray(window_buf))
            if len(window_buf) == config.window
            else None
        )
        offloaded, reason = offload_rule(report, edge.confidence, config)

        cloud: Decision | None = None
        cloud_latency = 0.0
        if offloaded:
            if remote_cloud:
                cloud, cloud_latency = _timed_remote(effective, endpoint, "Cloud", cloud_decide)
            else:
                cloud, cloud_latency = cloud_decide(effective), config.rtt_ms + config.cloud_ms

        executed = cloud.action if cloud is not None else edge.action
        if executed not in legal_actions(effective):
            logger.warning(
                "step %d: illegal action %s from %s, executing Keep instead",
                index,
                executed.value,
                (cloud or edge).source,
            )
            executed = Action.KEEP

        records.append(
            StepRecord(
                step=index,
                feature=feature,
                edge_decision=edge,
                drift_report=report,
                offloaded=offloaded,
                offload_reason=reason,
                cloud_decision=cloud,
                executed_action=executed,
                latency_ms=edge_latency + cloud_latency,
                bytes_up=config.uplink_bytes_per_sample if offloaded else 0,
                collision=collision,
            )
        )

        advanced = step(effective, executed)
        scene = _strip_injections(advanced, injections, index)

    summary = aggregate_metrics(records, injections, config.window)
    return EpisodeTrace(
        scenario=scenario,
        injections=injections,
        offload=config,
        seed=seed,
        steps=steps,
        records=tuple(records),
        summary=summary,
        remote_base_url=endpoint.base_url if endpoint else None,
    )


def _nearest_rank_p95(values: list[float]) -> float:
    ordered = sorted(values)
    rank = math.ceil(0.95 * len(ordered))
    return ordered[rank - 1]


def aggregate_metrics(
    records,
    injections=(),
    detector_window: int = 0,
) -> Metrics:
    """Summarize step records exactly per the metric definitions.

    An offload counts as in-window when its step falls inside any injection
    window extended by the detector window length (detection lags a
    window-based test). With zero offloads the agreement rate is vacuously
    1 and the in-window fraction 0.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    n = len(records)
    offloaded = [r for r in records if r.offloaded]
    n_off = len(offloaded)
    windows = [
        (inj.start_step, inj.end_step + detector_window) for inj in injections
    ]
    in_window = sum(
        1
        for r in offloaded
        if any(lo <= r.step < hi for lo, hi in windows)
    )
    agree = sum(
        1
        for r in offloaded
        if r.cloud_decision is not None
        and r.cloud_decision.action == r.edge_decision.action
    )
    return Metrics(
        offload_rate=n_off / n,
        mean_latency_ms=sum(r.latency_ms for r in records) / n,
        p95_latency_ms=_nearest_rank_p95([r.latency_ms for r in records]),
        total_bytes_up=sum(r.bytes_up for r in records),
        collision_count=sum(1 for r in records if r.collision),
        agreement_rate=agree / n_off if n_off else 1.0,
        in_window_offload_fraction=in_window / n_off if n_off else 0.0,
    )


# ---------------------------------------------------------------------------
# JSONL trace serialization
# ---------------------------------------------------------------------------


def _decision_dict(decision: Decision | None):
    if decision is None:
        return None
    return {
        "action": decision.action.value,
        "rationale": list(decision.rationale),
        "confidence": decision.confidence,
        "source": decision.source,
    }


def _report_dict(report: DriftReport | None):
    if report is None:
        return None
    return {
        "is_drift": report.is_drift,
        "p_values": [float(p) for p in report.p_values],
        "statistic": [float(s) for s in report.statistic],
        "threshold_used": report.threshold_used,
    }


def scenario_to_dict(scenario: ScenarioConfig) -> dict:
    data = dataclasses.asdict(scenario)
    data["speed_range"] = list(scenario.speed_range)
    data["spawn_span"] = list(scenario.spawn_span)
    data["spawn_lanes"] = list(scenario.spawn_lanes) if scenario.spawn_lanes else None
    data["fixed_others"] = [dataclasses.asdict(v) for v in scenario.fixed_others]
    return data


def scenario_from_dict(data: dict) -> ScenarioConfig:
    fixed = tuple(VehicleState(**v) for v in data.get("fixed_others", []))
    lanes = data.get("spawn_lanes")
    return ScenarioConfig(
        name=data.get("name", "scenario"),
        lane_count=data.get("lane_count", 4),
        ego_lane=data.get("ego_lane", 0),
        ego_speed=data.get("ego_speed", 25.0),
        ego_position=data.get("ego_position", 0.0),
        ego_accel=data.get("ego_accel", 0.0),
        v_max=data.get("v_max", 30.0),
        n_random_vehicles=data.get("n_random_vehicles", 0),
        speed_range=tuple(data.get("speed_range", (18.0, 24.0))),
        spawn_span=tuple(data.get("spawn_span", (50.0, 1500.0))),
        spawn_lanes=tuple(lanes) if lanes else None,
        fixed_others=fixed,
    )


def injection_to_dict(injection: DriftInjection) -> dict:
    return dataclasses.asdict(injection)


def injection_from_dict(data: dict) -> DriftInjection:
    return DriftInjection(**data)


def offload_to_dict(config: OffloadConfig) -> dict:
    return dataclasses.asdict(config)


def offload_from_dict(data: dict) -> OffloadConfig:
    return OffloadConfig(**data)


def _metrics_dict(metrics: Metrics) -> dict:
    return dataclasses.asdict(metrics)


def _record_dict(record: StepRecord) -> dict:
    return {
        "step": record.step,
        "feature": [float(x) for x in record.feature],
        "edge_decision": _decision_dict(record.edge_decision),
        "drift_report": _report_dict(record.drift_report),
        "offloaded": record.offloaded,
        "offload_reason": record.offload_reason,
        "cloud_decision": _decision_dict(record.cloud_decision),
        "executed_action": record.executed_action.value,
        "latency_ms": record.latency_ms,
        "bytes_up": record.bytes_up,
        "collision": record.collision,
    }


def _decision_from_dict(data) -> Decision | None:
    if data is None:
        return None
    return Decision(
        action=Action(data["action"]),
        rationale=tuple(data["rationale"]),
        confidence=data["confidence"],
        source=data["source"],
    )


def _report_from_dict(data) -> DriftReport | None:
    if data is None:
        return None
    return DriftReport(
        is_drift=data["is_drift"],
        p_values=np.asarray(data["p_values"]),
        statistic=np.asarray(data["statistic"]),
        threshold_used=data["threshold_used"],
    )


def _record_from_dict(data: dict) -> StepRecord:
    return StepRecord(
        step=data["step"],
        feature=np.asarray(data["feature"]),
        edge_decision=_decision_from_dict(data["edge_decision"]),
        drift_report=_report_from_dict(data["drift_report"]),
        offloaded=data["offloaded"],
        offload_reason=data["offload_reason"],
        cloud_decision=_decision_from_dict(data["cloud_decision"]),
        executed_action=Action(data["executed_action"]),
        latency_ms=data["latency_ms"],
        bytes_up=data["bytes_up"],
        collision=data["collision"],
    )


def trace_lines(trace: EpisodeTrace) -> list[str]:
    """Serialize a trace to its JSONL lines (header first)."""
    header = {
        "schema_version": TRACE_SCHEMA_VERSION,
        "config": {
            "scenario": scenario_to_dict(trace.scenario),
            "injections": [injection_to_dict(i) for i in trace.injections],
            "offload": offload_to_dict(trace.offload),
            "steps": trace.steps,
        },
        "seed": trace.seed,
        "summary": _metrics_dict(trace.summary),
    }
    if trace.remote_base_url is not None:
        header["config"]["remote"] = {"base_url": trace.remote_base_url}
    lines = [json.dumps(header, separators=(",", ":"))]
    lines += [
        json.dumps(_record_dict(r), separators=(",", ":")) for r in trace.records
    ]
    return lines


def write_trace(trace: EpisodeTrace, path) -> None:
    Path(path).write_text("\n".join(trace_lines(trace)) + "\n", encoding="utf-8")


def load_trace(path) -> EpisodeTrace:
    """Parse a JSONL trace file back into an :class:`EpisodeTrace`.

    Raises ``ValueError`` naming the offending line on malformed content.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty trace file")
    try:
        header = json.loads(lines[0])
        config = header["config"]
        scenario = scenario_from_dict(config["scenario"])
        injections = tuple(injection_from_dict(i) for i in config["injections"])
        offload = offload_from_dict(config["offload"])
        summary = Metrics(**header["summary"])
        remote = config.get("remote", {}).get("base_url")
        seed = header["seed"]
        steps = config["steps"]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: line 1: malformed header ({exc})") from exc
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(_record_from_dict(json.loads(line)))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: line {lineno}: malformed record ({exc})") from exc
    return EpisodeTrace(
        scenario=scenario,
        injections=injections,
        offload=offload,
        seed=seed,
        steps=steps,
        records=tuple(records),
        summary=summary,
        remote_base_url=remote,
    )
