"""Deterministic artifact I/O helpers.

Every artifact written by this package must be byte-for-byte reproducible
from the same inputs and seed: JSON is dumped with sorted keys and no
timestamps, CSV floats are written with 17 significant digits (lossless for
float64), and nothing environment-dependent is embedded.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

FLOAT_FMT = "%.17g"


def dump_json(path, payload: dict) -> None:
    """Write ``payload`` as canonical JSON (sorted keys, 2-space indent)."""
    text = json.dumps(payload, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"artifact file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON artifact {path}: {exc}") from exc


def write_csv(path, header: list[str], rows: np.ndarray) -> None:
    """Write a float matrix as CSV with one header row, full precision."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(FLOAT_FMT % v for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path, expected_header: list[str] | None = None) -> np.ndarray:
    """Read a numeric CSV written by :func:`write_csv`.

    Returns a 2-D float array (rows x columns). Non-numeric content raises
    :class:`DataError` naming the file; header validation is case-insensitive.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"CSV file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip()
        if expected_header is not None:
            got = [c.strip().lower() for c in header.split(",")]
            want = [c.lower() for c in expected_header]
            if got != want:
                raise DataError(
                    f"{path}: expected header {expected_header}, found {header!r}"
                )
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float)
        except ValueError as exc:
            raise DataError(f"{path}: could not parse numeric data: {exc}") from exc
    return data


def require_finite(values: np.ndarray, name: str) -> None:
    """Raise :class:`DataError` citing the first non-finite (row, col)."""
    bad = np.argwhere(~np.isfinite(np.atleast_2d(values)))
    if bad.size:
        row, col = bad[0]
        raise DataError(f"{name}: non-finite entry at row {row}, column {col}")


def geometry_fingerprint(normals: np.ndarray, areas: np.ndarray,
                         ref_area: float, dim: int) -> str:
    """SHA-256 over the exact float64 bytes of the geometry.

    CSV round-trips are lossless at 17 significant digits, so the fingerprint
    is stable across save/load cycles and is used to refuse cross-geometry
    artifact mixing.
    """
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(normals, dtype=float).tobytes())
    h.update(np.ascontiguousarray(areas, dtype=float).tobytes())
    h.update(struct.pack("<d", float(ref_area)))
    h.update(struct.pack("<q", int(dim)))
    return h.hexdigest()
