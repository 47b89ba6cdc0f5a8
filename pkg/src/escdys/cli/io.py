"""On-disk formats: field snapshots, CSV tables and key = value summaries."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..errors import StructuralError

HEADER_BYTES = 32
MAGIC = "esc-field"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(v)


def write_field(path, phi: np.ndarray, iteration: int) -> None:
    """Row-major little-endian float64 values after a 32-byte ASCII header line."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim not in (2, 3) or len(set(phi.shape)) != 1:
        raise StructuralError(f"snapshot needs a square 2D or cubic 3D field, got {phi.shape}")
    header = f"{MAGIC} {phi.ndim} {phi.shape[0]} {int(iteration)}"
    if len(header) >= HEADER_BYTES:
        raise StructuralError("snapshot header does not fit in 32 bytes")
    with open(path, "wb") as fh:
        fh.write(header.ljust(HEADER_BYTES - 1).encode("ascii") + b"\n")
        fh.write(np.ascontiguousarray(phi, dtype="<f8").tobytes())


def read_field(path) -> tuple[np.ndarray, int]:
    """Inverse of :func:`write_field`; returns (field, iteration)."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER_BYTES)
        body = fh.read()
    parts = head.decode("ascii", errors="replace").split()
    if len(parts) != 4 or parts[0] != MAGIC:
        raise StructuralError(f"{path}: not a field snapshot")
    dim, m, it = int(parts[1]), int(parts[2]), int(parts[3])
    data = np.frombuffer(body, dtype="<f8")
    if data.size != m ** dim:
        raise StructuralError(f"{path}: expected {m ** dim} values, found {data.size}")
    return data.reshape((m,) * dim).astype(float), it


def write_table(path, columns, rows) -> None:
    """CSV with a header line; NaN cells are left empty, floats use repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def write_diagnostics(path, diag, wall_clock: bool = True) -> None:
    cols = list(diag.columns)
    data = [diag.rows[c] for c in cols]
    if not wall_clock and "wall_s" in cols:
        data[cols.index("wall_s")] = [float("nan")] * len(diag)
    write_table(path, cols, zip(*data))


def read_points(path) -> np.ndarray:
    """First two columns of a CSV with a header line, as an (N, 2) array."""
    try:
        pts = np.loadtxt(path, delimiter=",", skiprows=1, usecols=(0, 1), ndmin=2)
    except (OSError, ValueError) as exc:
        raise StructuralError(f"cannot read points from {path}: {exc}") from exc
    return pts


def format_summary(values: dict) -> str:
    return "".join(f"{k} = {str(v).lower() if isinstance(v, (bool, np.bool_)) else _cell(v)}\n"
                   for k, v in values.items())


def write_summary(path, values: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_summary(values))


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out
