"""Offline assembly and online evaluation of the sensor-driven force model.

Offline, the force-integration matrix is folded through the reconstruction
matrix into a 3 x n_s operator plus an offset vector, so the online force
prediction is a single small affine map (about 6 * n_s multiply-adds). The
reconstruction matrix and snapshot mean are kept in the model artifact so the
full surface field can still be recovered for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .artifacts import dump_json, load_json
from .deim import SensorSelection, reconstruction_matrix
from .errors import DataError
from .geometry import SurfaceGeometry, _readonly, scaled_normal_matrix
from .pod import ReducedBasis

MODEL_SCHEMA = "aerosparse/linear-force-model/1"


@dataclass(frozen=True)
class LinearForceModel:
    """Precomputed affine map from sensor pressures to body-frame forces."""

    m_s: np.ndarray              # (3, n_s)
    m_0: np.ndarray              # (3,)
    selection: SensorSelection
    mean_at_sensors: np.ndarray  # (n_s,)
    recon: np.ndarray            # (N, n_s), kept for full-field output
    mean: np.ndarray             # (N,)
    geometry_hash: str = ""

    def __post_init__(self):
        for attr in ("m_s", "m_0", "mean_at_sensors", "recon", "mean"):
            object.__setattr__(self, attr, _readonly(getattr(self, attr)))
        n_s = self.selection.n_sensors
        if self.m_s.shape != (3, n_s):
            raise DataError(f"m_s must be (3, {n_s}), got {self.m_s.shape}")
        if self.m_0.shape != (3,):
            raise DataError(f"m_0 must be a 3-vector, got {self.m_0.shape}")
        if self.mean_at_sensors.shape != (n_s,):
            raise DataError("mean_at_sensors length does not match the selection")
        if self.recon.shape != (self.mean.shape[0], n_s):
            raise DataError("reconstruction matrix shape does not match mean/selection")

    @property
    def n_sensors(self) -> int:
        return self.selection.n_sensors

    def to_dict(self) -> dict:
        return {"schema": MODEL_SCHEMA,
                "m_s": self.m_s.tolist(),
                "m_0": self.m_0.tolist(),
                "indices": self.selection.indices.tolist(),
                "candidates": self.selection.candidates.tolist(),
                "mean_at_sensors": self.mean_at_sensors.tolist(),
                "recon": self.recon.tolist(),
                "mean": self.mean.tolist(),
                "geometry_hash": self.geometry_hash}

    @classmethod
    def from_dict(cls, payload: dict) -> "LinearForceModel":
        try:
            selection = SensorSelection(
                indices=np.array(payload["indices"], dtype=int),
                candidates=np.array(payload["candidates"], dtype=int))
            return cls(m_s=np.array(payload["m_s"], dtype=float),
                       m_0=np.array(payload["m_0"], dtype=float),
                       selection=selection,
                       mean_at_sensors=np.array(payload["mean_at_sensors"], dtype=float),
                       recon=np.array(payload["recon"], dtype=float),
                       mean=np.array(payload["mean"], dtype=float),
                       geometry_hash=payload.get("geometry_hash", ""))
        except KeyError as exc:
            raise DataError(f"force-model artifact missing field {exc}") from exc


def assemble_force_model(geom: SurfaceGeometry, basis: ReducedBasis,
                         selection: SensorSelection) -> LinearForceModel:
    """Fold geometry, basis, and sensor selection into the online operator."""
    if basis.n_points != geom.n_points:
        raise DataError(
            f"basis has {basis.n_points} rows but geometry has {geom.n_points} points"
        )
    smat = scaled_normal_matrix(geom).s_matrix
    recon = reconstruction_matrix(basis, selection)
    mean_at_sensors = basis.mean[selection.indices]
    m_s = smat @ recon
    m_0 = smat @ basis.mean - m_s @ mean_at_sensors
    return LinearForceModel(m_s=m_s, m_0=m_0, selection=selection,
                            mean_at_sensors=mean_at_sensors, recon=recon,
                            mean=basis.mean, geometry_hash=geom.fingerprint())


def _check_sensor_vector(model: LinearForceModel, cp_s: np.ndarray) -> np.ndarray:
    cp_s = np.asarray(cp_s, dtype=float)
    if cp_s.shape != (model.n_sensors,):
        raise DataError(
            f"sensor vector has shape {cp_s.shape}, expected ({model.n_sensors},)"
        )
    if not np.all(np.isfinite(cp_s)):
        raise DataError("sensor vector contains non-finite entries")
    return cp_s


def predict_force(model: LinearForceModel, cp_s: np.ndarray) -> np.ndarray:
    """Body-frame force coefficients from one sensor reading."""
    cp_s = _check_sensor_vector(model, cp_s)
    return model.m_s @ cp_s + model.m_0


def reconstruct_pressure(model: LinearForceModel, cp_s: np.ndarray) -> np.ndarray:
    """Full-surface pressure-coefficient field interpolating the sensor values."""
    cp_s = _check_sensor_vector(model, cp_s)
    return model.mean + model.recon @ (cp_s - model.mean_at_sensors)


def save_model(path, model: LinearForceModel, meta: dict | None = None) -> None:
    payload = model.to_dict()
    if meta:
        payload["meta"] = meta
    dump_json(path, payload)


def load_model(path) -> tuple[LinearForceModel, dict]:
    payload = load_json(path)
    if payload.get("schema") != MODEL_SCHEMA:
        raise DataError(f"{path}: not a linear-force-model artifact")
    return LinearForceModel.from_dict(payload), payload.get("meta", {})
