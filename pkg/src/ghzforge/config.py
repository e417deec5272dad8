"""Pipeline configuration: one JSON file drives compile/simulate/estimate."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .compiler import CompileConfig
from .hwgraph import DropoutPolicy
from .noise import NoiseModel


class ConfigError(ValueError):
    pass


@dataclass
class EstimationPlan:
    methods: tuple[str, ...] = ("dfe", "parity_oscillation")
    stabilizer_samples: int = 14
    stratified: bool = False
    shots_per_setting: int = 2000
    mitigation: bool = True
    post_select: bool = True
    retention_floor: float = 0.0

    def __post_init__(self):
        for m in self.methods:
            if m not in ("dfe", "parity_oscillation"):
                raise ConfigError(f"unknown estimation method {m!r}")
        if self.stabilizer_samples < 2:
            raise ConfigError("stabilizer_samples must be >= 2")
        if self.shots_per_setting < 1:
            raise ConfigError("shots_per_setting must be >= 1")

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "stabilizer_samples": self.stabilizer_samples,
            "stratified": self.stratified,
            "shots_per_setting": self.shots_per_setting,
            "mitigation": self.mitigation,
            "post_select": self.post_select,
            "retention_floor": self.retention_floor,
        }


@dataclass
class PipelineConfig:
    graph_path: Path
    seed: int = 0
    threads: int = 1
    compile: CompileConfig = field(default_factory=lambda: CompileConfig(n_data=2))
    noise: NoiseModel = field(default_factory=NoiseModel)
    estimation: EstimationPlan = field(default_factory=EstimationPlan)

    def to_dict(self) -> dict:
        return {
            "graph": str(self.graph_path),
            "seed": self.seed,
            "threads": self.threads,
            "compile": {
                "n_data": self.compile.n_data,
                "trials": self.compile.trials,
                "block_probability": self.compile.block_probability,
                "uncompute_idle_threshold": self.compile.uncompute_idle_threshold,
                "enable_uncompute": self.compile.enable_uncompute,
                "weighted_coverage": self.compile.weighted_coverage,
                "dropout": {
                    "max_gate_error": self.compile.dropout.max_gate_error,
                    "max_readout_error": self.compile.dropout.max_readout_error,
                },
            },
            "noise": self.noise.to_dict(),
            "estimation": self.estimation.to_dict(),
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return data[key]


def parse_config(data: dict, base_dir: Path | None = None) -> PipelineConfig:
    try:
        graph = Path(_require(data, "graph", "config"))
        if base_dir is not None and not graph.is_absolute():
            graph = base_dir / graph
        comp = _require(data, "compile", "config")
        dropout = comp.get("dropout", {})
        cc = CompileConfig(
            n_data=int(_require(comp, "n_data", "compile")),
            trials=int(comp.get("trials", 1)),
            block_probability=float(comp.get("block_probability", 0.06)),
            seed=int(data.get("seed", 0)),
            uncompute_idle_threshold=(
                None
                if comp.get("uncompute_idle_threshold") is None
                else int(comp["uncompute_idle_threshold"])
            ),
            enable_uncompute=bool(comp.get("enable_uncompute", True)),
            dropout=DropoutPolicy(
                max_gate_error=float(dropout.get("max_gate_error", 1.0)),
                max_readout_error=float(dropout.get("max_readout_error", 1.0)),
            ),
            weighted_coverage=bool(comp.get("weighted_coverage", False)),
        )
        nm = NoiseModel.from_dict(data.get("noise", {}))
        est_raw = data.get("estimation", {})
        plan = EstimationPlan(
            methods=tuple(est_raw.get("methods", ("dfe", "parity_oscillation"))),
            stabilizer_samples=int(est_raw.get("stabilizer_samples", 14)),
            stratified=bool(est_raw.get("stratified", False)),
            shots_per_setting=int(est_raw.get("shots_per_setting", 2000)),
            mitigation=bool(est_raw.get("mitigation", True)),
            post_select=bool(est_raw.get("post_select", True)),
            retention_floor=float(est_raw.get("retention_floor", 0.0)),
        )
        return PipelineConfig(
            graph_path=graph,
            seed=int(data.get("seed", 0)),
            threads=int(data.get("threads", 1)),
            compile=cc,
            noise=nm,
            estimation=plan,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    cfg = parse_config(data, base_dir=path.parent)
    if not cfg.graph_path.exists():
        raise ConfigError(f"graph file {cfg.graph_path} does not exist")
    return cfg
