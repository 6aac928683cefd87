"""Surface geometry, pressure snapshots, and force integration.

The force on the body is the surface integral of the pressure coefficient,
discretized as F = S @ cp where column i of S is the inward unit normal of
face i scaled by its area and 1/A_ref. Lift and drag follow by rotating the
body-frame force into the wind frame at the instantaneous angle of attack.

Wind-frame convention (documented so sign flips are auditable): the body
x-axis lies along the chord, pitch rotates about z, and the freestream is
along wind +x. Hence n_drag = (cos a, sin a, 0) and n_lift = (-sin a, cos a, 0)
with the angle of attack a in degrees, converted to radians internally.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artifacts import geometry_fingerprint, read_csv, require_finite, write_csv
from .errors import DataError

_UNIT_NORM_TOL = 1e-12


def _readonly(a: np.ndarray, dtype=float) -> np.ndarray:
    a = np.asarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SurfaceGeometry:
    """Per-face inward unit normals, face areas, and the reference area.

    All arrays are immutable after construction; instances are safe to share
    across threads.
    """

    normals: np.ndarray        # (N, 3) unit vectors, z == 0 when dim == 2
    areas: np.ndarray          # (N,) face areas, m^2
    ref_area: float            # m^2
    dim: int                   # 2 or 3

    def __post_init__(self):
        normals = _readonly(np.atleast_2d(self.normals))
        areas = _readonly(np.atleast_1d(self.areas))
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "areas", areas)
        if normals.ndim != 2 or normals.shape[1] != 3:
            raise DataError(f"normals must be (N, 3), got {normals.shape}")
        if areas.shape != (normals.shape[0],):
            raise DataError(
                f"areas length {areas.shape[0]} does not match {normals.shape[0]} normals"
            )
        require_finite(normals, "normals")
        require_finite(areas[:, None], "areas")
        norms = np.linalg.norm(normals, axis=1)
        bad = np.argwhere(np.abs(norms - 1.0) > _UNIT_NORM_TOL)
        if bad.size:
            i = int(bad[0][0])
            raise DataError(f"normal {i} has norm {norms[i]!r}, expected 1")
        if np.any(areas <= 0):
            i = int(np.argmax(areas <= 0))
            raise DataError(f"area {i} is {areas[i]!r}, expected > 0")
        if not (math.isfinite(self.ref_area) and self.ref_area > 0):
            raise DataError(f"ref_area must be positive, got {self.ref_area!r}")
        if self.dim not in (2, 3):
            raise DataError(f"dim must be 2 or 3, got {self.dim!r}")
        if self.dim == 2 and np.any(normals[:, 2] != 0.0):
            i = int(np.argmax(normals[:, 2] != 0.0))
            raise DataError(f"2D geometry: normal {i} has nonzero z component")

    @property
    def n_points(self) -> int:
        return self.normals.shape[0]

    def fingerprint(self) -> str:
        return geometry_fingerprint(self.normals, self.areas, self.ref_area, self.dim)


@dataclass(frozen=True)
class SnapshotSet:
    """A labeled collection of surface pressure-coefficient snapshots.

    ``values`` holds one snapshot per column (N locations x M samples); each
    column is labeled by time, pitching frequency, and angle of attack, and
    may carry a ground-truth body-frame force coefficient vector.
    """

    values: np.ndarray         # (N, M) pressure coefficients
    t: np.ndarray              # (M,) s
    f: np.ndarray              # (M,) Hz
    alpha: np.ndarray          # (M,) deg
    forces: np.ndarray | None = None   # (M, 3) body-frame force coefficients
    role_tag: str = "training"
    name: str = ""

    def __post_init__(self):
        values = _readonly(np.atleast_2d(self.values))
        object.__setattr__(self, "values", values)
        for attr in ("t", "f", "alpha"):
            object.__setattr__(self, attr, _readonly(np.atleast_1d(getattr(self, attr))))
        m = values.shape[1]
        for attr in ("t", "f", "alpha"):
            got = getattr(self, attr)
            if got.shape != (m,):
                raise DataError(
                    f"label '{attr}' has length {got.shape[0]}, expected {m} columns"
                )
        if self.forces is not None:
            forces = _readonly(np.atleast_2d(self.forces))
            object.__setattr__(self, "forces", forces)
            if forces.shape != (m, 3):
                raise DataError(f"forces must be ({m}, 3), got {forces.shape}")
            require_finite(forces, "forces")
        if self.role_tag not in ("training", "validation", "testing"):
            raise DataError(f"role_tag must be training/validation/testing, got {self.role_tag!r}")
        require_finite(values, "snapshot values")

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ForceIntegrationMatrix:
    """The 3xN operator mapping a pressure-coefficient vector to body force."""

    s_matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s_matrix", _readonly(np.atleast_2d(self.s_matrix)))
        if self.s_matrix.shape[0] != 3:
            raise DataError(f"s_matrix must have 3 rows, got {self.s_matrix.shape}")

    @property
    def n_points(self) -> int:
        return self.s_matrix.shape[1]


def scaled_normal_matrix(geom: SurfaceGeometry) -> ForceIntegrationMatrix:
    """Assemble the force-integration matrix with columns n_i * S_i / A_ref."""
    s = (geom.normals * geom.areas[:, None]).T / geom.ref_area
    return ForceIntegrationMatrix(s)


def integrate_force(smat: ForceIntegrationMatrix, cp: np.ndarray) -> np.ndarray:
    """Integrate surface pressure into the body-frame force coefficient vector."""
    cp = np.asarray(cp, dtype=float)
    if cp.shape[0] != smat.n_points:
        raise DataError(
            f"pressure vector length {cp.shape[0]} does not match {smat.n_points} faces"
        )
    require_finite(cp.reshape(1, -1) if cp.ndim == 1 else cp, "pressure vector")
    return smat.s_matrix @ cp


def lift_drag(force: np.ndarray, alpha_deg: float) -> tuple[float, float]:
    """Rotate a body-frame force into (Cl, Cd) at angle of attack ``alpha_deg``."""
    if not math.isfinite(alpha_deg):
        raise DataError(f"angle of attack must be finite, got {alpha_deg!r}")
    a = math.radians(alpha_deg)
    fx, fy = float(force[0]), float(force[1])
    cd = fx * math.cos(a) + fy * math.sin(a)
    cl = -fx * math.sin(a) + fy * math.cos(a)
    return cl, cd


# ---------------------------------------------------------------------------
# Manifest format: one JSON file naming the geometry CSVs and the datasets.
# CSVs are UTF-8, comma-separated, one header row, 17 significant digits.
# ---------------------------------------------------------------------------

_LABEL_HEADER = ["t", "f", "alpha"]
_FORCE_HEADER = ["fx", "fy", "fz"]


def load_snapshots(manifest_path) -> tuple[SurfaceGeometry, list[SnapshotSet]]:
    """Load geometry and all datasets declared in a manifest JSON file.

    Raises :class:`DataError` naming the offending file and row/column for
    missing files, dimension mismatches, non-finite entries, and malformed
    manifests.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"manifest file not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest {manifest_path}: {exc}") from exc

    base = manifest_path.parent
    try:
        geo = manifest["geometry"]
        dataset_entries = manifest["datasets"]
        normals_csv = geo["normals_csv"]
        areas_csv = geo["areas_csv"]
        ref_area = float(geo["ref_area"])
        dim = int(geo["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed manifest {manifest_path}: {exc!r}") from exc

    normals = read_csv(base / normals_csv, ["nx", "ny", "nz"])
    areas = read_csv(base / areas_csv, ["area"])[:, 0]
    geom = SurfaceGeometry(normals=normals, areas=areas, ref_area=ref_area, dim=dim)

    datasets = []
    for entry in dataset_entries:
        try:
            name = entry["name"]
            role = entry["role"]
            snap_csv = entry["snapshots_csv"]
            labels_csv = entry["labels_csv"]
            forces_csv = entry.get("forces_csv")
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed dataset entry in {manifest_path}: {exc!r}") from exc
        values = read_csv(base / snap_csv)
        if values.shape[0] != geom.n_points:
            raise DataError(
                f"{snap_csv}: {values.shape[0]} rows, but geometry has {geom.n_points} points"
            )
        require_finite(values, str(snap_csv))
        labels = read_csv(base / labels_csv, _LABEL_HEADER)
        require_finite(labels, str(labels_csv))
        if labels.shape[0] != values.shape[1]:
            raise DataError(
                f"{labels_csv}: {labels.shape[0]} label rows for {values.shape[1]} snapshots"
            )
        forces = None
        if forces_csv is not None:
            forces = read_csv(base / forces_csv, _FORCE_HEADER)
            if forces.shape[0] != values.shape[1]:
                raise DataError(
                    f"{forces_csv}: {forces.shape[0]} force rows for {values.shape[1]} snapshots"
                )
        datasets.append(SnapshotSet(
            values=values, t=labels[:, 0], f=labels[:, 1], alpha=labels[:, 2],
            forces=forces, role_tag=role, name=name,
        ))
    return geom, datasets


def write_manifest(out_dir, geom: SurfaceGeometry, datasets: list[SnapshotSet]) -> Path:
    """Write geometry + datasets in the manifest layout; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "normals.csv", ["nx", "ny", "nz"], geom.normals)
    write_csv(out_dir / "areas.csv", ["area"], geom.areas[:, None])
    entries = []
    for ds in datasets:
        if not ds.name:
            raise DataError("datasets must be named before writing a manifest")
        snap_csv = f"{ds.name}_snapshots.csv"
        labels_csv = f"{ds.name}_labels.csv"
        header = [f"c{j}" for j in range(ds.n_samples)]
        write_csv(out_dir / snap_csv, header, ds.values)
        write_csv(out_dir / labels_csv, _LABEL_HEADER,
                  np.column_stack([ds.t, ds.f, ds.alpha]))
        entry = {"name": ds.name, "role": ds.role_tag,
                 "snapshots_csv": snap_csv, "labels_csv": labels_csv}
        if ds.forces is not None:
            forces_csv = f"{ds.name}_forces.csv"
            write_csv(out_dir / forces_csv, _FORCE_HEADER, ds.forces)
            entry["forces_csv"] = forces_csv
        entries.append(entry)
    manifest = {
        "geometry": {"normals_csv": "normals.csv", "areas_csv": "areas.csv",
                     "ref_area": geom.ref_area, "dim": geom.dim},
        "datasets": entries,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                             encoding="utf-8")
    return manifest_path
