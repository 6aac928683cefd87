"""Greedy interpolation-point selection and the pressure reconstruction matrix.

Sensors are picked one mode at a time: the first index maximizes the first
mode's magnitude over the candidate set; each later index maximizes the
magnitude of the residual between the next mode and its interpolation from
the indices chosen so far. Indices are 0-based everywhere in this package;
ties break toward the lowest index, and already-selected indices are excluded
(their residual is zero up to rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .artifacts import dump_json, load_json
from .errors import DataError, NumericsError
from .geometry import _readonly
from .pod import ReducedBasis

MAX_CONDITION = 1e12

SELECTION_SCHEMA = "aerosparse/sensor-selection/1"


@dataclass(frozen=True)
class SensorSelection:
    """Ordered sensor indices and the candidate set they were drawn from."""

    indices: np.ndarray     # (n_s,), in greedy selection order
    candidates: np.ndarray  # (m,)

    def __post_init__(self):
        object.__setattr__(self, "indices", _readonly(self.indices, dtype=int))
        object.__setattr__(self, "candidates", _readonly(self.candidates, dtype=int))
        if len(set(self.indices.tolist())) != self.indices.size:
            raise DataError("selected indices contain duplicates")
        if not set(self.indices.tolist()) <= set(self.candidates.tolist()):
            raise DataError("selected indices must be a subset of the candidates")

    @property
    def n_sensors(self) -> int:
        return int(self.indices.size)

    def to_dict(self) -> dict:
        return {"schema": SELECTION_SCHEMA,
                "indices": self.indices.tolist(),
                "candidates": self.candidates.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "SensorSelection":
        try:
            return cls(indices=np.array(payload["indices"], dtype=int),
                       candidates=np.array(payload["candidates"], dtype=int))
        except KeyError as exc:
            raise DataError(f"sensor-selection artifact missing field {exc}") from exc


def _argmax_lowest(values: np.ndarray, indices: np.ndarray) -> int:
    """Index (from ``indices``) of the largest value, lowest index on ties."""
    best = np.max(values)
    winners = indices[values == best]
    return int(np.min(winners))


def _mode_matrix(basis) -> np.ndarray:
    """Accept a ReducedBasis or a plain (N, n_b) mode matrix."""
    u = basis.basis if isinstance(basis, ReducedBasis) else np.asarray(basis, dtype=float)
    if u.ndim != 2 or u.shape[1] == 0:
        raise DataError(f"mode matrix must be (N, n_b), got shape {u.shape}")
    return u


def deim_select(basis, candidates, n_s: int) -> SensorSelection:
    """Greedy selection of ``n_s`` sensor locations from ``candidates``.

    ``basis`` may be a :class:`~.pod.ReducedBasis` or a plain (N, n_b) mode
    matrix; orthonormality is not required by the greedy recursion. The
    argmax at every step is restricted to the candidate set; residuals are
    always computed with full-length modes. Raises :class:`NumericsError` if
    an interior interpolation system is singular.
    """
    u = _mode_matrix(basis)
    candidates = np.asarray(candidates, dtype=int)
    if candidates.size == 0:
        raise DataError("candidate index set is empty")
    if len(set(candidates.tolist())) != candidates.size:
        raise DataError("candidate indices contain duplicates")
    if np.any(candidates < 0) or np.any(candidates >= u.shape[0]):
        raise DataError("candidate index out of range for the basis")
    if not 1 <= n_s <= u.shape[1]:
        raise DataError(f"n_s must be in [1, {u.shape[1]} basis modes], got {n_s}")
    if n_s > candidates.size:
        raise DataError(f"cannot select {n_s} sensors from {candidates.size} candidates")

    selected = [_argmax_lowest(np.abs(u[candidates, 0]), candidates)]
    for ell in range(1, n_s):
        block = u[np.ix_(selected, range(ell))]
        rhs = u[selected, ell]
        try:
            c = np.linalg.solve(block, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericsError(
                f"singular interpolation system at step {ell + 1}; "
                "basis and candidate set are incompatible"
            ) from exc
        residual = u[:, ell] - u[:, :ell] @ c
        remaining = candidates[~np.isin(candidates, selected)]
        selected.append(_argmax_lowest(np.abs(residual[remaining]), remaining))
    return SensorSelection(indices=np.array(selected), candidates=candidates)


def reconstruction_matrix(basis, selection: SensorSelection) -> np.ndarray:
    """The N x n_s matrix taking sensor deviations to the full-surface field.

    Rows at the selected indices form the identity, so reconstruction
    interpolates the sensor values exactly. Raises :class:`NumericsError`
    when the selected row block is singular or has condition number above
    ``MAX_CONDITION``.
    """
    modes = _mode_matrix(basis)
    n_s = selection.n_sensors
    if n_s > modes.shape[1]:
        raise DataError(f"{n_s} sensors selected but basis has {modes.shape[1]} modes")
    u = modes[:, :n_s]
    block = u[selection.indices, :]
    cond = np.linalg.cond(block)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NumericsError(
            f"selected sensor block is ill-conditioned (cond = {cond:.3e})"
        )
    # R = U @ inv(U[I, :]), computed via a solve on the transposed system.
    return np.linalg.solve(block.T, u.T).T


def save_selection(path, selection: SensorSelection, meta: dict | None = None) -> None:
    payload = selection.to_dict()
    if meta:
        payload["meta"] = meta
    dump_json(path, payload)


def load_selection(path) -> tuple[SensorSelection, dict]:
    payload = load_json(path)
    if payload.get("schema") != SELECTION_SCHEMA:
        raise DataError(f"{path}: not a sensor-selection artifact")
    return SensorSelection.from_dict(payload), payload.get("meta", {})
