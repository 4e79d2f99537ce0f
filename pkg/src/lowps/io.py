"""File formats: Matrix Market for matrices, CSV for trajectories and grids, JSON for reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import scipy.io

from .errors import ParseError
from .lowrank import LowRankFactors
from .transfer import Trajectory


def read_matrix(path) -> np.ndarray:
    try:
        a = scipy.io.mmread(str(path))
    except (ValueError, IndexError, TypeError) as exc:
        raise ParseError(f"{path}: not a readable Matrix Market file ({exc})") from exc
    if hasattr(a, "toarray"):
        a = a.toarray()
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if not np.isfinite(a).all():
        raise ParseError(f"{path}: matrix contains NaN or Inf")
    return a


def write_matrix(path, a) -> None:
    scipy.io.mmwrite(str(path), np.asarray(a), field="complex" if np.iscomplexobj(a) else "real")


def read_factors(u_path, v_path) -> LowRankFactors:
    return LowRankFactors(read_matrix(u_path), read_matrix(v_path))


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_trajectory(path, dt: float | None = None) -> Trajectory:
    """CSV with one row per time step; a first row that is not numeric is taken as a header."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0])
    try:
        data = np.array([[float(c) for c in row] for row in rows])
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != width:
        raise ParseError(f"{path}: rows have differing lengths")
    return Trajectory(data, dt, {"source": str(path)})


def write_trajectory(path, traj: Trajectory) -> None:
    k = traj.states.shape[1]
    write_csv(path, [f"x{i}" for i in range(k)], traj.states)


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    """RFC 4180 CSV (CRLF line ends) with every float at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating, int, np.integer)) and not isinstance(v, bool) else v for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(c) for c in r] for r in rows[1:]])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
