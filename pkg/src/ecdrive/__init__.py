"""Edge-cloud collaborative highway motion planning with drift-gated offloading.

A seeded kinematic simulator produces driving scenes; a fast rule-chain
edge policy decides every step; a drift/confidence monitor escalates hard
scenes to a rollout-planning cloud policy (or a remote chat-completion
model) with full latency and uplink accounting.
"""

from .codec import (
    FEATURE_DIM,
    FEATURE_NAMES,
    GAP_SENTINEL,
    NoDecisionFound,
    SceneText,
    describe,
    featurize,
    parse_decision,
)
from .drift import (
    DriftDetector,
    DriftReport,
    confidence_gate,
    fit,
    ks_two_sample,
    median_bandwidth,
    mmd_permutation,
    predict,
)
from .highway import (
    Action,
    DriftInjection,
    IllegalLaneChange,
    NeighborSet,
    Obstacle,
    ScenarioConfig,
    ScenarioError,
    Scene,
    VehicleState,
    check_collision,
    inject_drift,
    legal_actions,
    nearest_neighbors,
    spawn_scenario,
    step,
)
from .orchestrator import (
    MODES,
    EpisodeTrace,
    Metrics,
    OffloadConfig,
    StepRecord,
    aggregate_metrics,
    load_trace,
    offload_rule,
    run_episode,
    write_trace,
)
from .policies import (
    Decision,
    EndpointConfig,
    RemoteUnavailable,
    RolloutResult,
    cloud_decide,
    edge_decide,
    remote_decide,
    rollout_cost,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Decision",
    "DriftDetector",
    "DriftInjection",
    "DriftReport",
    "EndpointConfig",
    "EpisodeTrace",
    "FEATURE_DIM",
    "FEATURE_NAMES",
    "GAP_SENTINEL",
    "IllegalLaneChange",
    "MODES",
    "Metrics",
    "NeighborSet",
    "NoDecisionFound",
    "Obstacle",
    "OffloadConfig",
    "RemoteUnavailable",
    "RolloutResult",
    "ScenarioConfig",
    "ScenarioError",
    "Scene",
    "SceneText",
    "StepRecord",
    "VehicleState",
    "aggregate_metrics",
    "check_collision",
    "cloud_decide",
    "confidence_gate",
    "describe",
    "edge_decide",
    "featurize",
    "fit",
    "inject_drift",
    "ks_two_sample",
    "legal_actions",
    "load_trace",
    "median_bandwidth",
    "mmd_permutation",
    "nearest_neighbors",
    "offload_rule",
    "parse_decision",
    "predict",
    "remote_decide",
    "rollout_cost",
    "run_episode",
    "spawn_scenario",
    "step",
    "write_trace",
]
