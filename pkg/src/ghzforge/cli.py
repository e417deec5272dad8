"""Command-line interface.

Subcommands: compile | simulate | estimate | sweep.  Exit codes: 0 on
success, 2 for configuration errors, 3 for compile failures, 4 when
estimation aborts on the retention floor.  Set GHZFORGE_LOG to a logging
level name to see progress on stderr.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from .circuit import CircuitError, parse_circuit_json
from .compiler import CompileError
from .config import ConfigError, load_config
from .estimation import EstimationError
from .pipeline import (
    RetentionTooLow,
    canonical_json,
    load_shot_data,
    run_compile,
    run_estimate,
    run_simulate,
    run_sweep,
    sweep_csv,
    write_compile_outputs,
    write_estimate_outputs,
    write_simulate_outputs,
)

EXIT_CONFIG = 2
EXIT_COMPILE = 3
EXIT_ESTIMATION = 4


def _setup_logging():
    level = os.environ.get("GHZFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)


def _load(config_path: str, seed: int | None, threads: int | None):
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if seed is not None:
        cfg.seed = seed
        cfg.compile.seed = seed
    if threads is not None:
        cfg.threads = threads
    return cfg


def _echo_summary(payload: dict, fmt: str):
    if fmt == "json":
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        keys = sorted(payload)
        click.echo(",".join(keys))
        click.echo(",".join(str(payload[k]) for k in keys))


_common = [
    click.option("--config", "config_path", required=True, type=click.Path(exists=False)),
    click.option("--seed", type=int, default=None, help="override the config seed"),
    click.option("--threads", type=int, default=None, help="worker threads"),
    click.option("--out", "out_dir", type=click.Path(), default="out"),
    click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json"),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@click.group()
def main():
    _setup_logging()


@main.command("compile")
@common_options
def cmd_compile(config_path, seed, threads, out_dir, fmt):
    """Compile the GHZ circuit and write circuit/trial/coverage artifacts."""
    cfg = _load(config_path, seed, threads)
    try:
        result = run_compile(cfg)
    except CompileError as exc:
        click.echo(f"compile failed: {exc}", err=True)
        sys.exit(EXIT_COMPILE)
    out = Path(out_dir)
    write_compile_outputs(cfg, result, out)
    _echo_summary(
        {
            "coverage": result.coverage.fraction,
            "n_checks": len(result.checks),
            "best_trial": result.best_trial,
            "out": str(out),
        },
        fmt,
    )


@main.command("simulate")
@common_options
@click.option("--circuit", "circuit_path", type=click.Path(exists=False), default=None)
@click.option(
    "--backend",
    type=click.Choice(["auto", "compiled", "numpy"]),
    default="auto",
    help="frame-sampling kernel",
)
def cmd_simulate(config_path, seed, threads, out_dir, fmt, circuit_path, backend):
    """Sample noisy shots of a compiled circuit and write shot records."""
    cfg = _load(config_path, seed, threads)
    out = Path(out_dir)
    circuit_path = Path(circuit_path) if circuit_path else out / "circuit.json"
    if not circuit_path.exists():
        click.echo(f"missing circuit file {circuit_path}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        circuit = parse_circuit_json(circuit_path.read_text())
    except (CircuitError, json.JSONDecodeError) as exc:
        click.echo(f"invalid circuit file: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    data = run_simulate(cfg, circuit, backend=backend)
    summary = write_simulate_outputs(cfg, data, out)
    _echo_summary(
        {"retention": summary["retention"], "shots": summary["shots"], "out": str(out)}, fmt
    )


@main.command("estimate")
@common_options
@click.option("--circuit", "circuit_path", type=click.Path(exists=False), default=None)
@click.option(
    "--shots",
    "shots_paths",
    type=click.Path(exists=False),
    multiple=True,
    help="shot record files (default: OUT/shots.jsonl)",
)
def cmd_estimate(config_path, seed, threads, out_dir, fmt, circuit_path, shots_paths):
    """Estimate fidelity from shot records; write report and signal CSV."""
    cfg = _load(config_path, seed, threads)
    out = Path(out_dir)
    circuit_path = Path(circuit_path) if circuit_path else out / "circuit.json"
    paths = [Path(p) for p in shots_paths] or [out / "shots.jsonl"]
    for p in [circuit_path, *paths]:
        if not p.exists():
            click.echo(f"missing input file {p}", err=True)
            sys.exit(EXIT_CONFIG)
    circuit = parse_circuit_json(circuit_path.read_text())
    try:
        data = load_shot_data(paths, circuit.n_data)
        report = run_estimate(cfg, data, circuit)
    except RetentionTooLow as exc:
        click.echo(f"estimation aborted: {exc}", err=True)
        sys.exit(EXIT_ESTIMATION)
    except EstimationError as exc:
        click.echo(f"estimation failed: {exc}", err=True)
        sys.exit(EXIT_ESTIMATION)
    write_estimate_outputs(report, out)
    first = report["estimates"][0]
    _echo_summary(
        {
            "fidelity": first["value"],
            "std_error": first["std_error"],
            "method": first["method"],
            "retention": report["retention"],
            "out": str(out),
        },
        fmt,
    )


@main.command("sweep")
@common_options
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=False))
@click.option(
    "--backend", type=click.Choice(["auto", "compiled", "numpy"]), default="auto"
)
def cmd_sweep(config_path, seed, threads, out_dir, fmt, grid_path, backend):
    """Run the full pipeline over a parameter grid; one CSV row per point."""
    grid_path = Path(grid_path)
    if not grid_path.exists():
        click.echo(f"missing grid file {grid_path}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        cfg = load_config(config_path)  # validates the base config
        raw = json.loads(Path(config_path).read_text())
        if seed is not None:
            raw["seed"] = seed
        grid = json.loads(grid_path.read_text()).get("parameters", {})
        rows = run_sweep(
            raw, Path(config_path).parent, grid, threads=threads or cfg.threads, backend=backend
        )
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sweep_csv(rows))
    (out / "sweep.json").write_text(canonical_json(rows))
    _echo_summary({"rows": len(rows), "out": str(out)}, fmt)


if __name__ == "__main__":
    main()
