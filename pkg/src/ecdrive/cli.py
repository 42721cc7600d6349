"""Command-line entry point: run experiment suites, summarize traces, validate.

Commands:
    ecdrive run <config.json>
    ecdrive summarize <trace_glob> --out <csv>
    ecdrive validate <config.json>

Exit codes: 0 success, 2 invalid config or empty glob, 3 I/O failure,
4 malformed or inconsistent trace. Remote credentials are read from the
EC_DRIVE_API_KEY environment variable only; config files and trace
snapshots never carry secrets (the endpoint block is reduced to its
base_url in trace headers).
"""

from __future__ import annotations

import argparse
import csv
import glob as globmod
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .highway import DriftInjection, ScenarioConfig, ScenarioError
from .orchestrator import (
    MODES,
    EpisodeTrace,
    Metrics,
    OffloadConfig,
    aggregate_metrics,
    injection_from_dict,
    load_trace,
    offload_from_dict,
    run_episode,
    scenario_from_dict,
    write_trace,
)
from .policies import EndpointConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_TRACE = 4

CSV_COLUMNS = (
    "scenario",
    "mode",
    "seed",
    "offload_rate",
    "mean_latency_ms",
    "p95_latency_ms",
    "total_bytes_up",
    "collision_count",
    "agreement_rate",
    "in_window_offload_fraction",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated experiment file."""

    scenario: ScenarioConfig
    injections: tuple[DriftInjection, ...]
    offload: OffloadConfig
    seeds: tuple[int, ...]
    steps: int
    output_dir: Path
    modes: tuple[str, ...]
    endpoint: EndpointConfig | None = None


def _require(data: dict, field: str):
    if field not in data:
        raise ConfigError(f"{field}: missing required field")
    return data[field]


def load_experiment_config(path) -> ExperimentConfig:
    """Parse and invariant-check an experiment JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")

    try:
        scenario = scenario_from_dict(_require(data, "scenario"))
        scenario.validate()
    except ScenarioError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"scenario: unknown or malformed field ({exc})") from exc

    injections = []
    for i, item in enumerate(data.get("injections", [])):
        try:
            injection = injection_from_dict(item)
            injection.validate()
        except (ScenarioError, TypeError) as exc:
            raise ConfigError(f"injections[{i}]: {exc}") from exc
        injections.append(injection)

    try:
        offload = offload_from_dict(_require(data, "offload"))
        offload.validate()
    except ValueError as exc:
        raise ConfigError(f"offload: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"offload: unknown or malformed field ({exc})") from exc

    seeds = _require(data, "seeds")
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds: must be a non-empty list of integers")
    if not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds: must be a non-empty list of integers")

    steps = _require(data, "steps")
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError("steps: must be an integer >= 1")

    output_dir = Path(_require(data, "output_dir"))

    modes = tuple(data.get("modes", [offload.mode]))
    for mode in modes:
        if mode not in MODES:
            raise ConfigError(f"modes: {mode!r} is not one of {MODES}")
    if not modes:
        raise ConfigError("modes: must not be empty")

    endpoint = None
    if "remote" in data and data["remote"] is not None:
        remote = data["remote"]
        try:
            endpoint = EndpointConfig(
                base_url=_require(remote, "base_url"),
                model=remote.get("model", "gpt-4"),
                timeout_s=remote.get("timeout_s", 10.0),
                role=remote.get("role", "Cloud"),
            )
        except ConfigError:
            raise ConfigError("remote.base_url: missing required field") from None
        if endpoint.role not in ("Edge", "Cloud"):
            raise ConfigError("remote.role: must be 'Edge' or 'Cloud'")
        if endpoint.timeout_s <= 0:
            raise ConfigError("remote.timeout_s: must be positive")

    return ExperimentConfig(
        scenario=scenario,
        injections=tuple(injections),
        offload=offload,
        seeds=tuple(seeds),
        steps=steps,
        output_dir=output_dir,
        modes=modes,
        endpoint=endpoint,
    )


def trace_filename(scenario_name: str, mode: str, seed: int) -> str:
    return f"{scenario_name}_{mode}_{seed}.jsonl"


def cmd_run(config_path: str) -> int:
    """Run every (seed x mode) episode of the experiment and write traces."""
    try:
        config = load_experiment_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        config.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"io error: cannot create output_dir: {exc}", file=sys.stderr)
        return EXIT_IO

    for mode in config.modes:
        offload = replace(config.offload, mode=mode)
        for seed in config.seeds:
            trace = run_episode(
                config.scenario,
                config.injections,
                offload,
                seed=seed,
                steps=config.steps,
                endpoint=config.endpoint,
            )
            path = config.output_dir / trace_filename(config.scenario.name, mode, seed)
            try:
                write_trace(trace, path)
            except OSError as exc:
                print(f"io error: cannot write {path}: {exc}", file=sys.stderr)
                return EXIT_IO
            s = trace.summary
            print(
                f"{config.scenario.name} mode={mode} seed={seed}: "
                f"offload_rate={s.offload_rate:.3f} "
                f"mean_latency={s.mean_latency_ms:.1f}ms "
                f"bytes_up={s.total_bytes_up} collisions={s.collision_count}"
            )
    return EXIT_OK


def _metrics_row(trace: EpisodeTrace, metrics: Metrics) -> dict:
    return {
        "scenario": trace.scenario.name,
        "mode": trace.offload.mode,
        "seed": trace.seed,
        "offload_rate": metrics.offload_rate,
        "mean_latency_ms": metrics.mean_latency_ms,
        "p95_latency_ms": metrics.p95_latency_ms,
        "total_bytes_up": metrics.total_bytes_up,
        "collision_count": metrics.collision_count,
        "agreement_rate": metrics.agreement_rate,
        "in_window_offload_fraction": metrics.in_window_offload_fraction,
    }


def cmd_summarize(trace_glob: str, out_csv: str) -> int:
    """Recompute and tabulate metrics for every trace matching the glob.

    Each trace's embedded summary is re-derived from its records; any
    mismatch is an integrity failure (exit 4). The CSV gets one row per
    trace plus one aggregate row per mode with means across seeds.
    """
    paths = sorted(globmod.glob(trace_glob))
    if not paths:
        print(f"error: no trace files match {trace_glob!r}", file=sys.stderr)
        return EXIT_CONFIG

    rows = []
    for path in paths:
        try:
            trace = load_trace(path)
        except ValueError as exc:
            print(f"trace error: {exc}", file=sys.stderr)
            return EXIT_TRACE
        recomputed = aggregate_metrics(
            trace.records, trace.injections, trace.offload.window
        )
        if recomputed != trace.summary:
            print(
                f"trace error: {path}: stored summary does not match recomputed metrics",
                file=sys.stderr,
            )
            return EXIT_TRACE
        rows.append(_metrics_row(trace, recomputed))

    numeric = CSV_COLUMNS[3:]
    aggregates = []
    for mode in MODES:
        mode_rows = [r for r in rows if r["mode"] == mode]
        if not mode_rows:
            continue
        agg = {"scenario": "aggregate", "mode": mode, "seed": ""}
        for col in numeric:
            agg[col] = sum(r[col] for r in mode_rows) / len(mode_rows)
        aggregates.append(agg)

    try:
        with open(out_csv, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in rows + aggregates:
                writer.writerow(row)
    except OSError as exc:
        print(f"io error: cannot write {out_csv}: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"wrote {len(rows)} trace rows + {len(aggregates)} aggregate rows to {out_csv}")
    return EXIT_OK


def cmd_validate(config_path: str) -> int:
    """Parse and invariant-check a config file without side effects."""
    try:
        load_experiment_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ecdrive",
        description="Edge-cloud collaborative driving experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run all (seed x mode) episodes of a config")
    p_run.add_argument("config", help="experiment config JSON file")

    p_sum = sub.add_parser("summarize", help="tabulate trace metrics into a CSV")
    p_sum.add_argument("trace_glob", help="glob matching trace .jsonl files")
    p_sum.add_argument("--out", required=True, help="output CSV path")

    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("config", help="experiment config JSON file")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "summarize":
        return cmd_summarize(args.trace_glob, args.out)
    return cmd_validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
