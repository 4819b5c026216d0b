"""CSV and JSON persistence.

Floats are written with 17 significant digits so files round-trip exactly
and identical inputs give byte-identical outputs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DataError, NonUniformGrid
from .simulate import ObservationSet

FORMAT_VERSION = "spotvol-1"
UNIFORM_RTOL = 1e-9


def write_csv(path: str | Path, header: list[str], columns: list[np.ndarray]) -> None:
    table = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, table, fmt="%.17g", delimiter=",", newline="\n")


def write_observations(path: str | Path, obs: ObservationSet, keep_truth: bool = False) -> None:
    t = obs.t
    if keep_truth and obs.truth is not None:
        write_csv(path, ["t", "z", "x", "sigma2"], [t, obs.z, obs.truth.x, obs.truth.sigma2])
    else:
        write_csv(path, ["t", "z"], [t, obs.z])


def read_observations(path: str | Path) -> tuple[ObservationSet, dict]:
    """Read a ``t,z`` CSV (extra columns ignored) and check the time grid.

    The grid must be uniform; it is mapped onto ``[0, 1]`` and the original
    span is returned as ``{"t0": ..., "horizon": ...}``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None
    if header[:2] != ["t", "z"]:
        raise DataError(f"{path}: expected header starting with 't,z', got {','.join(header)!r}")
    if data.shape[0] < 3:
        raise DataError(f"{path}: need at least 3 observations")
    t, z = data[:, 0], data[:, 1]
    n = t.size - 1
    span = t[-1] - t[0]
    if not span > 0:
        raise NonUniformGrid(f"{path}: time column is not increasing")
    expected = t[0] + span * np.arange(n + 1) / n
    if np.max(np.abs(t - expected)) > UNIFORM_RTOL * max(1.0, abs(span)) or np.any(np.diff(t) <= 0):
        raise NonUniformGrid(f"{path}: time column is not a uniform grid")
    return ObservationSet(z=z), {"t0": float(t[0]), "horizon": float(span)}


def write_json(path: str | Path, payload: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def manifest(command: str, run_config: dict, **extra: Any) -> dict:
    return {"format_version": FORMAT_VERSION, "command": command, "run_config": run_config, **extra}


def sidecar(path: str | Path, suffix: str) -> Path:
    """``obs.csv`` -> ``obs.<suffix>``."""
    p = Path(path)
    return p.with_name(f"{p.stem}.{suffix}")
