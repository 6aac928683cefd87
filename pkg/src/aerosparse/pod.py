"""Mean-centered reduced basis extraction and projection diagnostics.

The basis is built from a snapshot matrix by subtracting the column mean and
taking the leading left singular vectors. Column signs are fixed so the
largest-magnitude entry of each mode is positive, which makes the
decomposition deterministic across runs and BLAS builds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .artifacts import dump_json, load_json
from .errors import DataError, NumericsError
from .geometry import SnapshotSet, _readonly

log = logging.getLogger(__name__)

_ORTHO_TOL = 1e-10
_RANK_TOL_FACTOR = 1e-12

BASIS_SCHEMA = "aerosparse/reduced-basis/1"


@dataclass(frozen=True)
class ReducedBasis:
    """Snapshot mean, orthonormal mode matrix, and the full singular spectrum."""

    mean: np.ndarray              # (N,)
    basis: np.ndarray             # (N, n_b), orthonormal columns
    singular_values: np.ndarray   # (r,), nonincreasing, r = min(N, M)

    def __post_init__(self):
        for attr in ("mean", "basis", "singular_values"):
            object.__setattr__(self, attr, _readonly(getattr(self, attr)))
        n, n_b = self.basis.shape
        if self.mean.shape != (n,):
            raise DataError(f"mean length {self.mean.shape} does not match basis rows {n}")
        sv = self.singular_values
        if np.any(sv < 0) or np.any(np.diff(sv) > 0):
            raise DataError("singular values must be nonincreasing and nonnegative")
        if n_b > sv.shape[0]:
            raise DataError(f"basis has {n_b} columns but spectrum has rank {sv.shape[0]}")
        gram = self.basis.T @ self.basis
        if np.max(np.abs(gram - np.eye(n_b))) > _ORTHO_TOL:
            raise DataError("basis columns are not orthonormal within 1e-10")

    @property
    def n_points(self) -> int:
        return self.basis.shape[0]

    @property
    def n_modes(self) -> int:
        return self.basis.shape[1]

    def truncated(self, n_b: int) -> "ReducedBasis":
        """The same decomposition restricted to the leading ``n_b`` modes."""
        if not 1 <= n_b <= self.n_modes:
            raise DataError(f"n_b must be in [1, {self.n_modes}], got {n_b}")
        return ReducedBasis(self.mean, self.basis[:, :n_b], self.singular_values)

    def to_dict(self) -> dict:
        return {"schema": BASIS_SCHEMA,
                "mean": self.mean.tolist(),
                "basis": self.basis.tolist(),
                "singular_values": self.singular_values.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "ReducedBasis":
        try:
            return cls(mean=np.array(payload["mean"], dtype=float),
                       basis=np.array(payload["basis"], dtype=float),
                       singular_values=np.array(payload["singular_values"], dtype=float))
        except KeyError as exc:
            raise DataError(f"basis artifact missing field {exc}") from exc


def compute_mean(snapshots: SnapshotSet) -> np.ndarray:
    """Arithmetic mean of the snapshot columns."""
    if snapshots.n_samples < 1:
        raise DataError("cannot average an empty snapshot set")
    return snapshots.values.mean(axis=1)


def pod_basis(snapshots: SnapshotSet, n_b: int) -> ReducedBasis:
    """Extract the leading ``n_b`` modes of the mean-centered snapshot matrix.

    Parameters
    ----------
    snapshots : SnapshotSet
        N x M pressure-coefficient snapshots.
    n_b : int
        Number of modes to retain, 1 <= n_b <= min(N, M).

    Returns
    -------
    ReducedBasis
        Mean vector, sign-fixed orthonormal modes, and the full spectrum.
    """
    n, m = snapshots.values.shape
    r = min(n, m)
    if not 1 <= n_b <= r:
        raise DataError(f"n_b must be in [1, min(N, M) = {r}], got {n_b}")
    mean = compute_mean(snapshots)
    centered = snapshots.values - mean[:, None]
    try:
        u, s, _ = np.linalg.svd(centered, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"SVD of the centered snapshot matrix failed: {exc}") from exc
    u = u[:, :n_b].copy()
    # Deterministic sign: largest-|entry| component of each mode is positive.
    for k in range(n_b):
        i = int(np.argmax(np.abs(u[:, k])))
        if u[i, k] < 0:
            u[:, k] = -u[:, k]
    return ReducedBasis(mean=mean, basis=u, singular_values=s)


def singular_spectrum(basis: ReducedBasis) -> np.ndarray:
    """Singular values scaled by the leading one; first entry is exactly 1."""
    sv = basis.singular_values
    if sv.size == 0 or sv[0] <= 0:
        raise DataError("spectrum is all zero; nothing to scale by")
    return sv / sv[0]


def projection_error(basis: ReducedBasis, candidates, probe: SnapshotSet) -> float:
    """Mean relative distance of probe columns from the restricted mode span.

    The basis rows are restricted to ``candidates`` and re-orthonormalized;
    each probe column (length m = number of candidates) is centered with the
    candidate-restricted mean and the ratio of its out-of-span residual to its
    norm is averaged over columns. Columns whose centered norm is exactly zero
    are skipped with a logged warning.
    """
    candidates = np.asarray(candidates, dtype=int)
    if candidates.size == 0:
        raise DataError("candidate index set is empty")
    restricted = basis.basis[candidates, :]
    m, n_b = restricted.shape
    if m < n_b:
        raise NumericsError(
            f"{m} candidate rows cannot carry {n_b} independent modes"
        )
    if probe.values.shape[0] != m:
        raise DataError(
            f"probe columns have length {probe.values.shape[0]}, expected {m} candidates"
        )
    q, rmat = np.linalg.qr(restricted)
    diag = np.abs(np.diag(rmat))
    if np.any(diag <= _RANK_TOL_FACTOR * max(diag.max(), 1.0)):
        raise NumericsError(
            f"restricted basis ({m} rows, {n_b} columns) is rank deficient"
        )
    centered = probe.values - basis.mean[candidates, None]
    residual = centered - q @ (q.T @ centered)
    norms = np.linalg.norm(centered, axis=0)
    keep = norms > 0.0
    if not np.all(keep):
        log.warning("projection_error: skipping %d probe column(s) with zero centered norm",
                    int(np.sum(~keep)))
    if not np.any(keep):
        raise DataError("all probe columns have zero centered norm")
    ratios = np.linalg.norm(residual[:, keep], axis=0) / norms[keep]
    return float(np.mean(ratios))


def save_basis(path, basis: ReducedBasis, meta: dict | None = None) -> None:
    payload = basis.to_dict()
    if meta:
        payload["meta"] = meta
    dump_json(path, payload)


def load_basis(path) -> tuple[ReducedBasis, dict]:
    payload = load_json(path)
    if payload.get("schema") != BASIS_SCHEMA:
        raise DataError(f"{path}: not a reduced-basis artifact")
    return ReducedBasis.from_dict(payload), payload.get("meta", {})
