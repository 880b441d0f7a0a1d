"""Point-cloud and matrix file IO.

Two interchange formats are supported for clouds:

* CSV: one point per row, comma separated, '.' decimal, LF line endings,
  no header.
* Binary: little-endian, a header of two u64 (n, d) followed by n*d f64
  values in row-major order.

Floats are written with %.17g so values round-trip exactly and repeated runs
produce byte-identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InputError
from .kernels import PointCloud

_MAGIC = b""  # format is dims-first, no magic on purpose (spec'd as plain dims)


def read_points_csv(path: str | Path) -> PointCloud:
    try:
        raw = Path(path).read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = []
    width = None
    for ln, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise InputError(f"{path}:{ln}: expected {width} columns, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise InputError(f"{path}:{ln}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no data rows")
    try:
        return PointCloud(np.asarray(rows, dtype=np.float64))
    except Exception as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_points_csv(path: str | Path, cloud: PointCloud) -> None:
    lines = [",".join(f"{v:.17g}" for v in row) for row in cloud.points]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_points_bin(path: str | Path) -> PointCloud:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if len(blob) < 16:
        raise InputError(f"{path}: binary header truncated")
    n, d = struct.unpack("<QQ", blob[:16])
    expect = 16 + 8 * n * d
    if len(blob) != expect:
        raise InputError(f"{path}: expected {expect} bytes for {n}x{d}, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f8", offset=16).reshape(n, d)
    try:
        return PointCloud(np.array(data, dtype=np.float64))
    except Exception as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_points_bin(path: str | Path, cloud: PointCloud) -> None:
    n, d = cloud.points.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", n, d))
        fh.write(np.ascontiguousarray(cloud.points, dtype="<f8").tobytes())


def read_points(path: str | Path) -> PointCloud:
    """Dispatch on extension: .bin / .mat -> binary, anything else CSV."""
    suffix = Path(path).suffix.lower()
    if suffix in (".bin", ".mat"):
        return read_points_bin(path)
    return read_points_csv(path)


def write_matrix_csv(path: str | Path, m: np.ndarray, header: list[str] | None = None) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    lines = []
    if header:
        lines.append(",".join(header))
    lines.extend(",".join(f"{v:.17g}" for v in row) for row in m)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def write_matrix_bin(path: str | Path, m: np.ndarray) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", *m.shape))
        fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())
