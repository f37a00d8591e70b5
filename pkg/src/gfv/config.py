"""Run configuration: JSON parsing with strict validation.

A run file is a single JSON object; unknown fields are rejected everywhere.
Grid and initial-data defaults follow the full-resolution experiment
(N=2501, k=200, a=30, b_exp=60); the calibrated desk preset (N=900, k=75)
is the smallest grid on which the Malthus-parameter table reproduces within
the acceptance tolerances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import Schedule
from .errors import ConfigError
from .grid import Grid, build_grid
from .model import (
    DivisionLaw,
    FeatureSet,
    GrowthLaw,
    Kernel,
    Model,
    build_named_kernel,
)

PAPER_GRID = {"N": 2501, "k": 200}
DESK_GRID = {"N": 900, "k": 75}
# anti-diffusion stand-in for the refined one-way-mutation experiments
REFINED_GRID = {"N": 1500, "k": 150}
DEFAULT_INITIAL = {"a": 30.0, "b_exp": 60.0}
DEFAULT_EIGEN = {"tol": 1e-10, "max_iter": 1_000_000}


@dataclass
class EigenSettings:
    tol: float = 1e-10
    max_iter: int = 1_000_000


@dataclass
class OutputSettings:
    directory: str = "out"
    emit_snapshots: bool = False


@dataclass
class InitialSettings:
    a: float = 30.0
    b_exp: float = 60.0


@dataclass
class RunConfig:
    grid: Grid
    model: Model
    schedule: Schedule
    initial: InitialSettings
    eigen: EigenSettings
    output: OutputSettings
    raw: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True)


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(unknown)}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing field {where}.{key}")
    return section[key]


def _positive_number(value, where: str, allow_zero: bool = False) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        raise ConfigError(f"{where} must be positive, got {value}")
    return float(value)


def _parse_grid(section) -> Grid:
    if not isinstance(section, dict):
        raise ConfigError("grid must be an object")
    _reject_unknown(section, {"N", "k", "preset"}, "grid")
    if "preset" in section:
        if set(section) != {"preset"}:
            raise ConfigError("grid.preset excludes explicit N/k")
        presets = {"paper": PAPER_GRID, "desk": DESK_GRID, "refined": REFINED_GRID}
        preset = section["preset"]
        if preset not in presets:
            raise ConfigError(f"unknown grid preset {preset!r}")
        chosen = presets[preset]
        return build_grid(chosen["N"], chosen["k"])
    n_half = section.get("N", PAPER_GRID["N"])
    k = section.get("k", PAPER_GRID["k"])
    if not isinstance(n_half, int) or not isinstance(k, int):
        raise ConfigError("grid.N and grid.k must be integers")
    try:
        return build_grid(n_half, k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_growth(section) -> GrowthLaw:
    if not isinstance(section, dict):
        raise ConfigError("model.growth must be an object")
    kind = _require(section, "kind", "model.growth")
    if kind == "linear":
        _reject_unknown(section, {"kind"}, "model.growth")
        return GrowthLaw("linear")
    if kind == "power":
        _reject_unknown(section, {"kind", "exponent"}, "model.growth")
        return GrowthLaw("power", exponent=float(_require(section, "exponent", "model.growth")))
    if kind == "tabulated":
        _reject_unknown(section, {"kind", "values"}, "model.growth")
        return GrowthLaw("tabulated", table=np.asarray(_require(section, "values", "model.growth"), dtype=float))
    raise ConfigError(f"unknown growth kind {kind!r}")


def _parse_division(section) -> DivisionLaw:
    if not isinstance(section, dict):
        raise ConfigError("model.division must be an object")
    kind = _require(section, "kind", "model.division")
    if kind == "power":
        _reject_unknown(section, {"kind", "coeff", "exponent", "threshold"}, "model.division")
        return DivisionLaw(
            "power",
            coeff=_positive_number(section.get("coeff", 1.0), "model.division.coeff"),
            exponent=float(section.get("exponent", 2.0)),
            threshold=_positive_number(section.get("threshold", 0.0), "model.division.threshold", allow_zero=True),
        )
    if kind == "tabulated":
        _reject_unknown(section, {"kind", "values", "threshold"}, "model.division")
        return DivisionLaw(
            "tabulated",
            table=np.asarray(_require(section, "values", "model.division"), dtype=float),
            threshold=_positive_number(section.get("threshold", 0.0), "model.division.threshold", allow_zero=True),
        )
    raise ConfigError(f"unknown division kind {kind!r}")


def _parse_kernel(section, feature_count: int) -> Kernel:
    if not isinstance(section, dict):
        raise ConfigError("model.kernel must be an object")
    if "matrix" in section:
        _reject_unknown(section, {"matrix"}, "model.kernel")
        matrix = np.asarray(section["matrix"], dtype=float)
        if matrix.ndim != 2 or matrix.shape != (feature_count, feature_count):
            raise ConfigError(
                f"kernel matrix must be {feature_count}x{feature_count}, "
                f"got shape {matrix.shape}"
            )
        return Kernel(matrix)
    if "name" in section:
        _reject_unknown(section, {"name", "p"}, "model.kernel")
        return build_named_kernel(section["name"], size=feature_count, p=section.get("p"))
    raise ConfigError("model.kernel needs either 'matrix' or 'name'")


def _parse_model(section) -> Model:
    if not isinstance(section, dict):
        raise ConfigError("model must be an object")
    _reject_unknown(
        section,
        {"features", "growth", "division", "kernel", "death_factor"},
        "model",
    )
    features = FeatureSet(np.asarray(_require(section, "features", "model"), dtype=float))
    growth = _parse_growth(_require(section, "growth", "model"))
    division = _parse_division(_require(section, "division", "model"))
    kernel = _parse_kernel(_require(section, "kernel", "model"), features.count)
    death = section.get("death_factor", 1.0)
    if not isinstance(death, (int, float)) or isinstance(death, bool) or not 0.0 < death <= 1.0:
        raise ConfigError(f"model.death_factor must lie in (0, 1], got {death!r}")
    return Model(features, growth, division, kernel, float(death))


def _parse_schedule(section) -> Schedule:
    if not isinstance(section, dict):
        raise ConfigError("schedule must be an object")
    _reject_unknown(section, {"t_end", "record_dt", "snapshot_times"}, "schedule")
    t_end = _positive_number(_require(section, "t_end", "schedule"), "schedule.t_end")
    record_dt = _positive_number(section.get("record_dt", t_end / 1000.0), "schedule.record_dt")
    snaps = section.get("snapshot_times", [])
    if not isinstance(snaps, list) or any(
        not isinstance(s, (int, float)) or s <= 0 or s > t_end for s in snaps
    ):
        raise ConfigError("schedule.snapshot_times must be numbers in (0, t_end]")
    return Schedule(t_end, record_dt, tuple(float(s) for s in snaps))


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("run configuration must be a JSON object")
    _reject_unknown(
        data, {"grid", "model", "schedule", "initial", "eigen", "output"}, "config"
    )
    grid = _parse_grid(data.get("grid", {}))
    model = _parse_model(_require(data, "model", "config"))
    schedule = _parse_schedule(_require(data, "schedule", "config"))

    init_section = data.get("initial", {})
    _reject_unknown(init_section, {"a", "b_exp"}, "initial")
    initial = InitialSettings(
        a=_positive_number(init_section.get("a", DEFAULT_INITIAL["a"]), "initial.a", allow_zero=True),
        b_exp=_positive_number(init_section.get("b_exp", DEFAULT_INITIAL["b_exp"]), "initial.b_exp"),
    )

    eigen_section = data.get("eigen", {})
    _reject_unknown(eigen_section, {"tol", "max_iter"}, "eigen")
    eigen = EigenSettings(
        tol=_positive_number(eigen_section.get("tol", DEFAULT_EIGEN["tol"]), "eigen.tol"),
        max_iter=int(eigen_section.get("max_iter", DEFAULT_EIGEN["max_iter"])),
    )
    if eigen.max_iter < 1:
        raise ConfigError("eigen.max_iter must be >= 1")

    out_section = data.get("output", {})
    _reject_unknown(out_section, {"directory", "emit_snapshots"}, "output")
    output = OutputSettings(
        directory=str(out_section.get("directory", "out")),
        emit_snapshots=bool(out_section.get("emit_snapshots", False)),
    )

    # run the model validation against the actual grid before any compute
    from .model import validate_model

    validate_model(model, grid)
    return RunConfig(grid, model, schedule, initial, eigen, output, raw=data)


def parse_config(path) -> RunConfig:
    """Read and validate a JSON run file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)
