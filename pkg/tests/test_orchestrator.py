"""Collaboration-loop tests: gating, accounting, determinism, trace round trips."""

from __future__ import annotations

import numpy as np
import pytest

from ecdrive import (
    Action,
    Decision,
    DriftReport,
    OffloadConfig,
    StepRecord,
    aggregate_metrics,
    load_trace,
    offload_rule,
    run_episode,
    write_trace,
)
from ecdrive.orchestrator import trace_lines

from scenarios import (
    corridor_config,
    corridor_obstacle,
    obstacle_zone_config,
    obstacle_zone_injections,
    open_highway_config,
)


def _report(is_drift: bool) -> DriftReport:
    return DriftReport(
        is_drift=is_drift,
        p_values=np.array([0.001 if is_drift else 0.9]),
        statistic=np.array([0.5]),
        threshold_used=0.05,
    )


class TestOffloadRule:
    def test_drift_alone(self):
        cfg = OffloadConfig(mode="Collaborative", tau=0.5)
        assert offload_rule(_report(True), 0.9, cfg) == (True, "Drift")

    def test_low_confidence_alone(self):
        cfg = OffloadConfig(mode="Collaborative", tau=0.5)
        assert offload_rule(_report(False), 0.2, cfg) == (True, "LowConfidence")

    def test_neither(self):
        cfg = OffloadConfig(mode="Collaborative", tau=0.5)
        assert offload_rule(_report(False), 0.9, cfg) == (False, "None")

    def test_both(self):
        cfg = OffloadConfig(mode="Collaborative", tau=0.5)
        assert offload_rule(_report(True), 0.2, cfg) == (True, "Both")

    def test_missing_report_means_no_drift(self):
        cfg = OffloadConfig(mode="Collaborative", tau=0.5)
        assert offload_rule(None, 0.9, cfg) == (False, "None")

    def test_edge_only_never_offloads(self):
        cfg = OffloadConfig(mode="EdgeOnly")
        assert offload_rule(_report(True), 0.0, cfg) == (False, "None")

    def test_cloud_only_always_offloads(self):
        cfg = OffloadConfig(mode="CloudOnly")
        assert offload_rule(_report(False), 1.0, cfg) == (True, "None")


class TestRunEpisodeModes:
    def test_edge_only_semantics(self):
        trace = run_episode(corridor_config(), (), OffloadConfig(mode="EdgeOnly"),
                            seed=0, steps=300)
        assert trace.summary.offload_rate == 0.0
        assert trace.summary.mean_latency_ms == 50.0
        assert trace.summary.total_bytes_up == 0

    def test_cloud_only_semantics(self):
        trace = run_episode(corridor_config(), (), OffloadConfig(mode="CloudOnly"),
                            seed=0, steps=100)
        assert trace.summary.offload_rate == 1.0
        assert trace.summary.mean_latency_ms == 850.0
        assert all(r.offload_reason == "None" for r in trace.records)

    def test_collaborative_obstacle_localizes_offloads(self):
        trace = run_episode(corridor_config(), corridor_obstacle(),
                            OffloadConfig(mode="Collaborative", tau=0.0),
                            seed=1, steps=300)
        offload_steps = [r.step for r in trace.records if r.offloaded]
        assert offload_steps, "the injected obstacle must trigger offloads"
        window = (100, 200 + 40)
        in_window = [s for s in offload_steps if window[0] <= s < window[1]]
        assert len(in_window) / len(offload_steps) >= 0.8
        assert trace.summary.in_window_offload_fraction >= 0.8

    def test_edge_first_and_offload_iff_cloud(self):
        trace = run_episode(corridor_config(), corridor_obstacle(),
                            OffloadConfig(mode="Collaborative", tau=0.0),
                            seed=1, steps=250)
        for record in trace.records:
            assert isinstance(record.edge_decision, Decision)
            assert record.offloaded == (record.cloud_decision is not None)

    def test_latency_identity_per_record(self):
        cfg = OffloadConfig(mode="Collaborative", tau=0.6, edge_ms=50.0,
                            cloud_ms=750.0, rtt_ms=50.0)
        trace = run_episode(open_highway_config(), (), cfg, seed=0, steps=150)
        for record in trace.records:
            expected = 50.0 + (800.0 if record.offloaded else 0.0)
            assert record.latency_ms == expected

    def test_bytes_conservation(self):
        cfg = OffloadConfig(mode="Collaborative", tau=0.6)
        trace = run_episode(open_highway_config(), (), cfg, seed=2, steps=150)
        offloads = sum(1 for r in trace.records if r.offloaded)
        assert trace.summary.total_bytes_up == offloads * cfg.uplink_bytes_per_sample

    def test_latency_sandwich(self):
        means = {}
        for mode in ("EdgeOnly", "Collaborative", "CloudOnly"):
            trace = run_episode(open_highway_config(), (),
                                OffloadConfig(mode=mode, tau=0.6), seed=0, steps=150)
            means[mode] = trace.summary.mean_latency_ms
        assert means["EdgeOnly"] <= means["Collaborative"] <= means["CloudOnly"]

    def test_offload_rate_monotone_in_tau(self):
        rates = []
        for tau in (0.0, 0.25, 0.5, 0.75, 1.0):
            trace = run_episode(corridor_config(), corridor_obstacle(),
                                OffloadConfig(mode="Collaborative", tau=tau),
                                seed=0, steps=250)
            rates.append(trace.summary.offload_rate)
        assert all(a <= b for a, b in zip(rates, rates[1:]))

    def test_byte_identical_reruns(self):
        cfg = OffloadConfig(mode="Collaborative", tau=0.0)
        first = run_episode(corridor_config(), corridor_obstacle(), cfg, seed=5, steps=200)
        second = run_episode(corridor_config(), corridor_obstacle(), cfg, seed=5, steps=200)
        assert trace_lines(first) == trace_lines(second)

    def test_collision_flags_in_edge_only_obstacle_run(self):
        trace = run_episode(obstacle_zone_config(), obstacle_zone_injections(120),
                            OffloadConfig(mode="EdgeOnly"), seed=0, steps=120)
        assert trace.summary.collision_count > 0

    def test_steps_must_be_positive(self):
        with pytest.raises(ValueError):
            run_episode(corridor_config(), (), OffloadConfig(), seed=0, steps=0)

    def test_drift_report_absent_until_window_fills(self):
        cfg = OffloadConfig(mode="Collaborative", window=40)
        trace = run_episode(corridor_config(), (), cfg, seed=0, steps=60)
        for record in trace.records:
            assert (record.drift_report is None) == (record.step < 39)


def _record(step: int, offloaded: bool, latency: float, edge_action=Action.KEEP,
            cloud_action=Action.KEEP, collision=False) -> StepRecord:
    edge = Decision(action=edge_action, rationale=("r",), confidence=0.9, source="Edge")
    cloud = (
        Decision(action=cloud_action, rationale=("r",), confidence=0.9, source="Cloud")
        if offloaded else None
    )
    return StepRecord(
        step=step, feature=np.zeros(15), edge_decision=edge, drift_report=None,
        offloaded=offloaded, offload_reason="Drift" if offloaded else "None",
        cloud_decision=cloud, executed_action=cloud_action if offloaded else edge_action,
        latency_ms=latency, bytes_up=2048 if offloaded else 0, collision=collision,
    )


class TestAggregateMetrics:
    def test_worked_arithmetic(self):
        records = [_record(i, offloaded=(i == 0), latency=850.0 if i == 0 else 50.0)
                   for i in range(10)]
        metrics = aggregate_metrics(records)
        assert metrics.offload_rate == 0.1
        assert metrics.mean_latency_ms == pytest.approx(50.0 + 0.1 * 800.0)

    def test_p95_identical_latencies(self):
        records = [_record(i, False, 42.0) for i in range(7)]
        assert aggregate_metrics(records).p95_latency_ms == 42.0

    def test_p95_nearest_rank(self):
        records = [_record(i, False, float(i + 1)) for i in range(100)]
        # nearest-rank: ceil(0.95 * 100) = 95th order statistic
        assert aggregate_metrics(records).p95_latency_ms == 95.0

    def test_empty_records_raise(self):
        with pytest.raises(ValueError):
            aggregate_metrics([])

    def test_agreement_rate(self):
        records = [
            _record(0, True, 850.0, edge_action=Action.KEEP, cloud_action=Action.KEEP),
            _record(1, True, 850.0, edge_action=Action.KEEP, cloud_action=Action.DECELERATE),
        ]
        assert aggregate_metrics(records).agreement_rate == 0.5

    def test_vacuous_denominators(self):
        records = [_record(0, False, 50.0)]
        metrics = aggregate_metrics(records)
        assert metrics.agreement_rate == 1.0
        assert metrics.in_window_offload_fraction == 0.0


class TestTraceRoundTrip:
    def test_write_load_and_recompute(self, tmp_path):
        cfg = OffloadConfig(mode="Collaborative", tau=0.0)
        trace = run_episode(corridor_config(), corridor_obstacle(), cfg, seed=3, steps=150)
        path = tmp_path / "trace.jsonl"
        write_trace(trace, path)
        loaded = load_trace(path)
        assert loaded.seed == trace.seed
        assert loaded.steps == trace.steps
        assert loaded.offload == trace.offload
        assert loaded.scenario == trace.scenario
        assert loaded.injections == trace.injections
        assert loaded.summary == trace.summary
        recomputed = aggregate_metrics(loaded.records, loaded.injections,
                                       loaded.offload.window)
        assert recomputed == loaded.summary

    def test_malformed_line_names_file_and_line(self, tmp_path):
        cfg = OffloadConfig(mode="EdgeOnly", n_ref=40, window=10)
        trace = run_episode(corridor_config(), (), cfg, seed=0, steps=20)
        path = tmp_path / "trace.jsonl"
        write_trace(trace, path)
        lines = path.read_text().splitlines()
        lines[5] = "{broken json"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match=r"line 6"):
            load_trace(path)

    def test_summary_survives_json_exactly(self, tmp_path):
        cfg = OffloadConfig(mode="Collaborative", tau=0.6)
        trace = run_episode(open_highway_config(), (), cfg, seed=1, steps=120)
        path = tmp_path / "trace.jsonl"
        write_trace(trace, path)
        assert load_trace(path).summary == trace.summary
