"""CSV and JSON output with embedded provenance.

Every file starts with two comment lines: the artifact version and the full
run configuration as canonical JSON.  Numbers are written with 17
significant digits so outputs are bit-identical across runs on the same
platform.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import Trajectory
from .grid import Grid

DIAGNOSTIC_PREFIX = ("t", "log_mass", "lambda_n", "lambda_tau", "lambda_gamma",
                     "entropy_sq", "dissipation_sq", "l1_phi")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (str, np.str_)):
        return f'"{value}"' if "," in value else str(value)
    return f"{float(value):.17g}"


def _header_lines(config_json: str) -> list[str]:
    return [f"# gfv {__version__}", f"# config: {config_json}"]


def write_csv(path, columns: dict, config_json: str) -> None:
    """Write named columns (equal length) with the provenance header."""
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ValueError("columns must have equal length")
    lines = _header_lines(config_json)
    lines.append(",".join(names))
    for row in range(length):
        lines.append(",".join(_fmt(a[row]) for a in arrays))
    Path(path).write_text("\n".join(lines) + "\n")


def write_diagnostics(path, trajectory: Trajectory, config_json: str) -> None:
    """Diagnostics series in the documented column order."""
    columns = {"t": trajectory.times}
    for name in DIAGNOSTIC_PREFIX[1:]:
        columns[name] = trajectory.columns[name]
    for name in sorted(trajectory.columns):
        if name.startswith("slice_"):
            columns[name] = trajectory.columns[name]
    write_csv(path, columns, config_json)


def write_snapshot(path, grid: Grid, values: np.ndarray, log_scale: float,
                   config_json: str) -> None:
    """One snapshot: per-feature density at renormalized scale."""
    m, n = values.shape
    columns = {
        "feature": np.repeat(np.arange(1, m + 1), n),
        "x": np.tile(grid.nodes, m),
        "density": values.ravel(),
        "log_scale": np.full(m * n, log_scale),
    }
    write_csv(path, columns, config_json)


def write_eigenpair(path, grid: Grid, pair, config_json: str) -> None:
    """Eigenpair export: feature, x, N, phi."""
    m = pair.direct.shape[0]
    n = grid.size
    columns = {
        "feature": np.repeat(np.arange(1, m + 1), n),
        "x": np.tile(grid.nodes, m),
        "N": pair.direct.ravel(),
        "phi": (pair.adjoint if pair.adjoint is not None else np.full_like(pair.direct, np.nan)).ravel(),
    }
    write_csv(path, columns, config_json)


def write_json(path, payload: dict) -> None:
    payload = {"gfv_version": __version__, **payload}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv(path):
    """Read a file written by :func:`write_csv`.

    Returns (meta, columns) where meta holds the header comments and columns
    maps names to float arrays.
    """
    meta = {}
    names = None
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("config:"):
                meta["config"] = json.loads(body[len("config:"):].strip())
            elif body.startswith("gfv"):
                meta["version"] = body.split()[-1]
            continue
        if not line.strip():
            continue
        if names is None:
            names = line.split(",")
        else:
            rows.append([float(cell) for cell in line.split(",")])
    if names is None:
        raise ValueError(f"{path}: no header row")
    data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(names)))
    return meta, {name: data[:, j] for j, name in enumerate(names)}
