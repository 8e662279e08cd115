"""Experiment configuration: a single YAML file drives every subcommand.

Only named registry functions are accepted (no arbitrary code); the resolved
config is echoed into the run manifest so that manifest + config fully
determine all outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .grids import SpaceGrid, TimeGrid
from .kernels import KERNEL_KINDS, Kernel, make_kernel
from .registry import Coefficients, make_coefficients

_RUN_DEFAULTS = {
    "seed": 0,
    "replicas": 200,
    "n_paths": 10000,
    "s_points": 8,
    "p": [2],
    "time_lags": [],
    "space_lags": [],
    "points": [],
    "epsilons": [],
    "clip_tol": 1e-12,
    "h1a_times": [],
    "t": None,
    "x": None,
    "bandwidth": None,
}


@dataclass(frozen=True)
class ExperimentConfig:
    version: int
    kernel: Kernel
    grid: SpaceGrid
    time_grid: TimeGrid
    coeffs: Coefficients
    run: dict
    output: Path
    resolved: dict = field(repr=False, default_factory=dict)


def _require(mapping: dict, key: str, section: str):
    if key not in mapping:
        raise ConfigError(f"{section}.{key}: missing required field")
    return mapping[key]


def _as_list(value, section):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{section}: expected a list, got {type(value).__name__}")
    return list(value)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    version = raw.get("version")
    if version != 1:
        raise ConfigError(f"version: must be 1, got {version!r}")

    ksec = _require(raw, "kernel", "config")
    if not isinstance(ksec, dict):
        raise ConfigError("kernel: must be a mapping")
    kind = _require(ksec, "kind", "kernel")
    if kind not in KERNEL_KINDS:
        raise ConfigError(f"kernel.kind: unknown kind {kind!r}; one of {sorted(KERNEL_KINDS)}")
    kparams = {k: v for k, v in ksec.items() if k != "kind"}
    try:
        kernel = make_kernel(kind, **kparams)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"kernel: {exc}")

    gsec = _require(raw, "grid", "config")
    try:
        grid = SpaceGrid(
            lower=tuple(float(v) for v in _as_list(_require(gsec, "lower", "grid"), "grid.lower")),
            upper=tuple(float(v) for v in _as_list(_require(gsec, "upper", "grid"), "grid.upper")),
            points=tuple(int(v) for v in _as_list(_require(gsec, "points", "grid"), "grid.points")),
        )
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}")

    tsec = _require(raw, "time", "config")
    try:
        time_grid = TimeGrid(
            t_end=float(_require(tsec, "t_end", "time")),
            steps=int(_require(tsec, "steps", "time")),
        )
    except ValueError as exc:
        raise ConfigError(f"time: {exc}")

    csec = raw.get("coefficients", {})
    if not isinstance(csec, dict):
        raise ConfigError("coefficients: must be a mapping")
    try:
        coeffs = make_coefficients(
            b=csec.get("b", "zero"),
            sigma=csec.get("sigma", "zero"),
            u0=csec.get("u0", "zero"),
            rho=csec.get("rho", 1.0),
        )
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"coefficients: {exc}")

    rsec = raw.get("run", {})
    if not isinstance(rsec, dict):
        raise ConfigError("run: must be a mapping")
    unknown = set(rsec) - set(_RUN_DEFAULTS)
    if unknown:
        raise ConfigError(f"run: unknown fields {sorted(unknown)}")
    run = dict(_RUN_DEFAULTS)
    run.update(rsec)

    output = Path(raw.get("output", "out"))

    resolved = {
        "version": 1,
        "kernel": {"kind": kind, **kparams, "beta": kernel.beta, "gamma": kernel.gamma,
                   "gamma0": kernel.gamma0},
        "grid": {"lower": list(grid.lower), "upper": list(grid.upper),
                 "points": list(grid.points)},
        "time": {"t_end": time_grid.t_end, "steps": time_grid.steps},
        "coefficients": {
            "b": coeffs.b.describe(),
            "sigma": coeffs.sigma.describe(),
            "u0": coeffs.u0.describe(),
            "rho": coeffs.rho,
        },
        "run": run,
        "output": str(output),
    }
    return ExperimentConfig(
        version=1,
        kernel=kernel,
        grid=grid,
        time_grid=time_grid,
        coeffs=coeffs,
        run=run,
        output=output,
        resolved=resolved,
    )
