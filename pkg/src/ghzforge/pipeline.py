"""End-to-end pipeline: compile -> simulate -> estimate -> sweep.

Every artifact written here is byte-deterministic for a fixed (config,
seed): canonical JSON (sorted keys, repr floats), fixed record order, and
a config hash + seed + package version embedded in every report.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, rng
from .circuit import Circuit, depth_stats, emit_circuit
from .compiler import CompileError, CompileResult, randomized_compile, trial_log_csv
from .config import ConfigError, PipelineConfig, parse_config
from .estimation import (
    EstimationError,
    ReadoutCalibration,
    StabilizerLabel,
    draw_dfe_labels,
    estimate_dfe,
    estimate_parity_oscillation,
    signal_angles,
    wilson_interval,
)
from .frames import MeasurementSetting, SettingRun, ShotData, run_shots, write_shot_records
from .hwgraph import parse_hardware_graph

log = logging.getLogger("ghzforge")


class RetentionTooLow(EstimationError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def provenance(cfg: PipelineConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed, "version": __version__}


# -- measurement plan ----------------------------------------------------------


@dataclass
class MeasurementPlan:
    settings: list[MeasurementSetting]
    dfe_labels: list[StabilizerLabel]


def build_plan(cfg: PipelineConfig, n_data: int) -> MeasurementPlan:
    """Settings and stabilizer labels implied by the estimation plan.

    Deterministic in (config, seed): labels come from the estimation
    substream; setting order is Z basis, then the parity grid, then the
    distinct off-diagonal stabilizer settings sorted by support mask.
    """
    est = cfg.estimation
    settings: list[MeasurementSetting] = [MeasurementSetting("z")]
    labels: list[StabilizerLabel] = []
    if "parity_oscillation" in est.methods:
        settings.extend(MeasurementSetting("parity", phi=phi) for phi in signal_angles(n_data))
    if "dfe" in est.methods:
        key = rng.derive(cfg.seed, rng.STREAM_ESTIMATE)
        labels = draw_dfe_labels(n_data, est.stabilizer_samples, key, est.stratified)
        masks = sorted({lab.mask for lab in labels if not lab.diagonal})
        settings.extend(MeasurementSetting("stab", y_mask=m) for m in masks)
    return MeasurementPlan(settings=settings, dfe_labels=labels)


# -- compile -------------------------------------------------------------------


def run_compile(cfg: PipelineConfig, threads: int | None = None) -> CompileResult:
    graph = parse_hardware_graph(cfg.graph_path.read_text())
    return randomized_compile(graph, cfg.compile, threads=threads or cfg.threads)


def write_compile_outputs(cfg: PipelineConfig, result: CompileResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "circuit.json").write_text(emit_circuit(result.circuit, "canonical-json"))
    (out / "circuit.txt").write_text(emit_circuit(result.circuit, "qasm-like-text"))
    (out / "trial_log.csv").write_text(trial_log_csv(result.trial_log))
    report = {
        "coverage": result.coverage.to_dict(),
        "root": result.root,
        "best_trial": result.best_trial,
        "blocked": sorted(result.blocked),
        "n_data": result.circuit.n_data,
        "checks": [
            {"ancilla": chk.ancilla, "i": chk.i, "j": chk.j, "region_size": len(chk.region)}
            for chk in result.checks
        ],
        "depth": depth_stats(result.circuit),
        "uncomputed": sorted(result.circuit.ground_spans),
        **provenance(cfg),
    }
    (out / "coverage.json").write_text(canonical_json(report))


# -- simulate ------------------------------------------------------------------


def run_simulate(
    cfg: PipelineConfig,
    circuit: Circuit,
    threads: int | None = None,
    backend: str = "auto",
) -> ShotData:
    graph = parse_hardware_graph(cfg.graph_path.read_text())
    plan = build_plan(cfg, circuit.n_data)
    return run_shots(
        circuit,
        cfg.noise,
        plan.settings,
        cfg.estimation.shots_per_setting,
        cfg.seed,
        graph=graph,
        threads=threads or cfg.threads,
        backend=backend,
    )


def write_simulate_outputs(cfg: PipelineConfig, data: ShotData, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "shots.jsonl", "w") as fh:
        summary = write_shot_records(data, fh)
    summary["wilson_95"] = list(wilson_interval(summary["accepted"], summary["shots"]))
    summary.update(provenance(cfg))
    (out / "summary.json").write_text(canonical_json(summary))
    return summary


def load_shot_data(paths: list[Path], n_data: int) -> ShotData:
    """Rebuild per-setting shot arrays from JSONL record files."""
    order: list[str] = []
    buckets: dict[str, list[dict]] = {}
    for path in paths:
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                key = rec["setting"]
                if key not in buckets:
                    buckets[key] = []
                    order.append(key)
                buckets[key].append(rec)
    runs = []
    wd = max(1, (n_data + 63) // 64)
    n_checks = 0
    for key in order:
        recs = buckets[key]
        setting = MeasurementSetting.parse(key)
        syn = np.array([int(r["syndromes"], 16) for r in recs], dtype=np.uint64)
        accepted = np.array([bool(r["accepted"]) for r in recs], dtype=bool)
        n_checks = max(n_checks, max((int(s).bit_length() for s in syn), default=0))
        if setting.kind == "z":
            words = np.zeros((len(recs), wd), dtype=np.uint64)
            for i, r in enumerate(recs):
                bits = int(r["data"][::-1], 2)
                for w in range(wd):
                    words[i, w] = (bits >> (64 * w)) & rng.MASK64
            runs.append(SettingRun(setting, syn, accepted, bit_words=words))
        else:
            outcomes = np.array([int(r["data"]) for r in recs], dtype=np.int8)
            runs.append(SettingRun(setting, syn, accepted, outcomes=outcomes))
    if not runs:
        raise EstimationError("no shot records found")
    return ShotData(
        runs=runs,
        shots_per_setting=max(r.n_shots for r in runs),
        n_data=n_data,
        n_checks=n_checks,
    )


# -- estimate ------------------------------------------------------------------


def run_estimate(cfg: PipelineConfig, data: ShotData, circuit: Circuit) -> dict:
    """Fidelity report for all configured methods, plus their agreement.

    Readout calibration for mitigation is resolved from the configured
    rates of the circuit's data qubits.  Raises :class:`RetentionTooLow`
    when post-selection leaves nothing (or less than the configured
    floor) to estimate from.
    """
    est_cfg = cfg.estimation
    graph = parse_hardware_graph(cfg.graph_path.read_text())
    plan = build_plan(cfg, circuit.n_data)
    retention = data.retention
    if retention == 0.0 or retention < est_cfg.retention_floor:
        raise RetentionTooLow(
            f"retention {retention} below floor {max(est_cfg.retention_floor, 0.0)}; "
            "estimation aborted"
        )
    cal = (
        ReadoutCalibration.from_noise_model(cfg.noise, graph, circuit.data_qubits)
        if est_cfg.mitigation
        else None
    )
    estimates = []
    signals = None
    if "dfe" in est_cfg.methods:
        estimates.append(
            estimate_dfe(
                plan.dfe_labels,
                data,
                cal=cal,
                mitigation="trex" if cal is not None else "none",
                post_select=est_cfg.post_select,
            )
        )
    if "parity_oscillation" in est_cfg.methods:
        est, raw_sig, mit_sig = estimate_parity_oscillation(
            data, circuit.n_data, cal=cal, post_select=est_cfg.post_select
        )
        estimates.append(est)
        signals = (raw_sig, mit_sig)
    if not estimates:
        raise EstimationError("no estimation methods configured")
    report = {
        "estimates": [
            {**e.to_dict(), "retention": retention, "shots_used": data.shots_per_setting}
            for e in estimates
        ],
        "retention": retention,
        **provenance(cfg),
    }
    if len(estimates) == 2:
        a, b = estimates
        diff = abs(a.value - b.value)
        sigma = (a.std_error**2 + b.std_error**2) ** 0.5
        report["agreement"] = {
            "difference": diff,
            "sigma_combined": sigma,
            "within_2_sigma": bool(diff <= 2 * sigma) if sigma > 0 else bool(diff == 0),
        }
    if signals is not None:
        report["_signals"] = signals  # stripped before writing
    return report


def signal_csv(raw, mitigated) -> str:
    lines = ["j,phi,raw,mitigated,stderr"]
    for j, phi in enumerate(raw.angles):
        lines.append(
            f"{j},{phi!r},{raw.values[j]!r},{mitigated.values[j]!r},{mitigated.stderr[j]!r}"
        )
    return "\n".join(lines) + "\n"


def write_estimate_outputs(report: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    signals = report.pop("_signals", None)
    (out / "estimate.json").write_text(canonical_json(report))
    if signals is not None:
        (out / "signal.csv").write_text(signal_csv(*signals))


# -- sweep ---------------------------------------------------------------------


def apply_override(raw_config: dict, dotted: str, value) -> dict:
    data = copy.deepcopy(raw_config)
    node = data
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value
    return data


def run_sweep(
    raw_config: dict,
    base_dir: Path,
    grid: dict[str, list],
    threads: int | None = None,
    backend: str = "auto",
) -> list[dict]:
    """One pipeline run per grid point (cartesian product, sorted keys).

    Each point's seed is derived from its parameter-assignment string, so
    a sweep can be resumed or reordered without changing any row.
    Failures are recorded per row and the sweep continues.
    """
    if not grid:
        raise ConfigError("empty sweep grid")
    keys = sorted(grid)
    points: list[list[tuple[str, object]]] = [[]]
    for k in keys:
        values = grid[k]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid entry {k!r} must be a non-empty list")
        points = [pt + [(k, v)] for pt in points for v in values]
    rows = []
    for pt in points:
        assignment = ",".join(f"{k}={v!r}" for k, v in pt)
        data = copy.deepcopy(raw_config)
        for k, v in pt:
            data = apply_override(data, k, v)
        data["seed"] = rng.derive_string(int(raw_config.get("seed", 0)), assignment)
        row = {"parameters": dict(pt), "seed": data["seed"]}
        try:
            cfg = parse_config(data, base_dir=base_dir)
            result = run_compile(cfg, threads=threads)
            shot_data = run_simulate(cfg, result.circuit, threads=threads, backend=backend)
            report = run_estimate(cfg, shot_data, result.circuit)
            first = report["estimates"][0]
            row.update(
                {
                    "status": "ok",
                    "coverage": result.coverage.fraction,
                    "n_checks": len(result.checks),
                    "retention": report["retention"],
                    "fidelity": first["value"],
                    "std_error": first["std_error"],
                    "method": first["method"],
                }
            )
        except (ConfigError, CompileError, EstimationError) as exc:
            log.warning("sweep point %s failed: %s", assignment, exc)
            row.update({"status": f"error: {exc}"})
        rows.append(row)
    return rows


def sweep_csv(rows: list[dict]) -> str:
    lines = ["parameters,seed,status,coverage,n_checks,retention,fidelity,std_error"]
    for r in rows:
        params = ";".join(f"{k}={v!r}" for k, v in sorted(r.get("parameters", {}).items()))
        lines.append(
            ",".join(
                [
                    f'"{params}"',
                    str(r.get("seed", "")),
                    f'"{r.get("status", "")}"',
                    repr(r["coverage"]) if "coverage" in r else "",
                    str(r.get("n_checks", "")),
                    repr(r["retention"]) if "retention" in r else "",
                    repr(r["fidelity"]) if "fidelity" in r else "",
                    repr(r["std_error"]) if "std_error" in r else "",
                ]
            )
        )
    return "\n".join(lines) + "\n"
