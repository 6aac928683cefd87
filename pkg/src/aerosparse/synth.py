"""Deterministic two-fidelity dynamic-stall surrogate datasets.

The generator stands in for unavailable simulation and experimental data. It
builds a closed thin-ellipse surface and a phenomenological pressure field
with a steady component, angle-of-attack-driven harmonics, a localized stall
mode gated by a logistic switch, and a decaying tail of higher harmonics so
the snapshot spectrum has genuine content past the leading modes. The "truth"
fidelity adds pitch-rate lag to the stall switch and an extra stall force
contribution that is absent from the pressure field itself, mimicking force
physics the surface sensors cannot see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import SnapshotSet, SurfaceGeometry, scaled_normal_matrix


@dataclass(frozen=True)
class PitchConfig:
    """Harmonic pitching: alpha(t) = alpha0 + amplitude * sin(2 pi freq t)."""

    alpha0: float                 # deg
    amplitude: float              # deg
    freq: float                   # Hz
    t_samples: tuple[float, ...]  # s, strictly increasing

    def __post_init__(self):
        if self.amplitude < 0:
            raise DataError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.freq <= 0:
            raise DataError(f"freq must be > 0, got {self.freq}")
        t = np.asarray(self.t_samples, dtype=float)
        if t.size == 0 or np.any(np.diff(t) <= 0):
            raise DataError("t_samples must be nonempty and strictly increasing")
        object.__setattr__(self, "t_samples", tuple(float(v) for v in t))


@dataclass(frozen=True)
class FidelityConfig:
    """Knobs separating the low-fidelity surrogate from the ground truth.

    ``lag_tau`` delays the stall switch by the pitch rate, ``stall_gain``
    scales the stall pressure mode, and ``force_stall_gain`` adds a stall
    force contribution that never appears in the pressure field (zero for
    the low-fidelity configuration). ``force_noise`` adds seeded Gaussian
    measurement noise to the ground-truth forces, standing in for
    experimental uncertainty. The tail parameters control the amplitude,
    decay ratio, and count of the higher-harmonic modes.
    """

    lag_tau: float = 0.0            # s
    stall_gain: float = 3.0
    stall_alpha: float = 25.0       # deg
    stall_width: float = 2.0        # deg
    c1: float = 2.0 * math.pi
    c2: float = 1.0
    force_stall_gain: float = 0.0
    force_noise: float = 0.0
    tail_gain: float = 0.3
    tail_decay: float = 0.6
    tail_modes: int = 8

    def __post_init__(self):
        if self.stall_width <= 0:
            raise DataError(f"stall_width must be > 0, got {self.stall_width}")
        if self.force_noise < 0:
            raise DataError(f"force_noise must be >= 0, got {self.force_noise}")
        if self.tail_modes < 0 or not 0 < self.tail_decay < 1:
            raise DataError("tail_modes must be >= 0 and tail_decay in (0, 1)")


def low_fidelity_config() -> FidelityConfig:
    """Surrogate for limited-fidelity simulation data: no lag, weakened stall."""
    return FidelityConfig(lag_tau=0.0, stall_gain=0.7 * 3.0, force_stall_gain=0.0)


def truth_config() -> FidelityConfig:
    """Ground truth: lagged stall, the unsensed stall force, measurement noise."""
    return FidelityConfig(lag_tau=0.01, stall_gain=3.0, force_stall_gain=3.0,
                          force_noise=0.12)


def pitching_alpha(t, cfg: PitchConfig):
    """Instantaneous angle of attack of the harmonic pitching motion, deg."""
    t = np.asarray(t, dtype=float)
    out = cfg.alpha0 + cfg.amplitude * np.sin(2.0 * math.pi * cfg.freq * t)
    return float(out) if out.ndim == 0 else out


def pitching_rate(t, cfg: PitchConfig):
    """Time derivative of the pitching angle, deg/s."""
    t = np.asarray(t, dtype=float)
    w = 2.0 * math.pi * cfg.freq
    out = cfg.amplitude * w * np.cos(w * t)
    return float(out) if out.ndim == 0 else out


def ellipse_geometry(n_points: int, half_thickness: float = 0.05) -> SurfaceGeometry:
    """Closed thin-ellipse surface with unit chord and unit reference area.

    Faces are the polygon edges between uniformly parametrized boundary
    vertices; normals point into the body and areas are the edge lengths, so
    the area-weighted normals of the closed contour sum to zero exactly.
    """
    if n_points < 8:
        raise DataError(f"n_points must be >= 8 for a non-degenerate contour, got {n_points}")
    phi = 2.0 * math.pi * np.arange(n_points + 1) / n_points
    verts = np.column_stack([0.5 * np.cos(phi), half_thickness * np.sin(phi)])
    edges = np.diff(verts, axis=0)                      # (n, 2)
    lengths = np.linalg.norm(edges, axis=1)
    inward = np.column_stack([-edges[:, 1], edges[:, 0]]) / lengths[:, None]
    normals = np.column_stack([inward, np.zeros(n_points)])
    return SurfaceGeometry(normals=normals, areas=lengths, ref_area=1.0, dim=2)


def surface_angles(n_points: int) -> np.ndarray:
    """Parameter angle of each face midpoint of :func:`ellipse_geometry`."""
    return 2.0 * math.pi * (np.arange(n_points) + 0.5) / n_points


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


_ROLE_STREAM = {"training": 0, "validation": 1, "testing": 2}


def _pressure_modes(theta: np.ndarray, fidelity: FidelityConfig,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Fixed spatial shapes: [sin, sin2, stall, tails...] plus tail phases."""
    shapes = [np.sin(theta), np.sin(2.0 * theta),
              np.maximum(0.0, np.sin(theta)) ** 2]
    phases = rng.uniform(0.0, 2.0 * math.pi, size=fidelity.tail_modes)
    for j in range(fidelity.tail_modes):
        k = 3 + j
        shapes.append(np.sin(k * theta + phases[j]))
    return np.column_stack(shapes), phases


def _mode_coefficients(t: np.ndarray, pitch: PitchConfig, fidelity: FidelityConfig,
                       phases: np.ndarray) -> np.ndarray:
    """Per-snapshot coefficients of the pressure modes; column order matches
    :func:`_pressure_modes`."""
    alpha = pitching_alpha(t, pitch)
    alpha_r = np.radians(alpha)
    alpha_eff = alpha - fidelity.lag_tau * pitching_rate(t, pitch)
    stall = _logistic((alpha_eff - fidelity.stall_alpha) / fidelity.stall_width)
    coeffs = [fidelity.c1 * alpha_r, fidelity.c2 * alpha_r ** 2,
              fidelity.stall_gain * stall]
    for j in range(fidelity.tail_modes):
        k = 3 + j
        coeffs.append(fidelity.tail_gain * fidelity.tail_decay ** (k - 2)
                      * np.cos(k * alpha_r + phases[j]))
    return np.column_stack(coeffs)


def generate_dataset(pitch: PitchConfig, fidelity: FidelityConfig,
                     n_points: int = 200, seed: int = 0,
                     role: str = "training", name: str = "synthetic",
                     geom: SurfaceGeometry | None = None) -> tuple[SurfaceGeometry, SnapshotSet]:
    """Generate one labeled snapshot set with ground-truth forces.

    The pressure field at face angle theta is a steady profile 1 - 4 sin^2
    (theta/2) plus the mode expansion from :func:`_pressure_modes`; forces are
    the quadrature of that field, and configurations with a nonzero
    ``force_stall_gain`` additionally receive the full-strength stall force
    term that the pressure field does not carry. Identical arguments produce
    bitwise-identical output; ``seed`` only sets the tail-mode phases.
    """
    if geom is None:
        geom = ellipse_geometry(n_points)
    theta = surface_angles(n_points)
    rng = np.random.default_rng(seed)
    shapes, phases = _pressure_modes(theta, fidelity, rng)

    t = np.asarray(pitch.t_samples, dtype=float)
    alpha = pitching_alpha(t, pitch)
    steady = 1.0 - 4.0 * np.sin(theta / 2.0) ** 2
    coeffs = _mode_coefficients(t, pitch, fidelity, phases)
    values = steady[:, None] + shapes @ coeffs.T        # (N, M)

    smat = scaled_normal_matrix(geom).s_matrix
    forces = (smat @ values).T                          # (M, 3)
    if fidelity.force_stall_gain != 0.0:
        alpha_eff = alpha - fidelity.lag_tau * pitching_rate(t, pitch)
        gate = _logistic((alpha_eff - fidelity.stall_alpha) / fidelity.stall_width)
        stall_force_mode = smat @ (np.maximum(0.0, np.sin(theta)) ** 2)
        forces = forces + fidelity.force_stall_gain * gate[:, None] * stall_force_mode[None, :]
    if fidelity.force_noise > 0.0:
        # Seeded per (seed, frequency, role) so distinct datasets carry
        # independent measurement noise while sharing the tail phases.
        noise_rng = np.random.default_rng(
            [seed, int(round(pitch.freq * 1e6)), _ROLE_STREAM[role]])
        forces = forces + fidelity.force_noise * noise_rng.normal(size=forces.shape)

    snapshots = SnapshotSet(values=values, t=t, f=np.full(t.shape, pitch.freq),
                            alpha=alpha, forces=forces, role_tag=role, name=name)
    return geom, snapshots


def concat_snapshots(parts: list[SnapshotSet], role: str, name: str) -> SnapshotSet:
    """Stack several snapshot sets column-wise into one labeled set."""
    if not parts:
        raise DataError("nothing to concatenate")
    forces = None
    if all(p.forces is not None for p in parts):
        forces = np.vstack([p.forces for p in parts])
    return SnapshotSet(values=np.hstack([p.values for p in parts]),
                       t=np.concatenate([p.t for p in parts]),
                       f=np.concatenate([p.f for p in parts]),
                       alpha=np.concatenate([p.alpha for p in parts]),
                       forces=forces, role_tag=role, name=name)


# Frequency roles for the default benchmark: four training tones, one
# validation tone, one testing tone.
TRAIN_FREQS = (0.8, 2.4, 3.2, 4.8)
VAL_FREQ = 1.6
TEST_FREQ = 4.0

DEFAULT_ALPHA0 = 20.0
DEFAULT_AMPLITUDE = 8.0
DEFAULT_N_POINTS = 200
DEFAULT_SAMPLES_PER_PERIOD = 64


def one_period(freq: float, n_samples: int = DEFAULT_SAMPLES_PER_PERIOD) -> PitchConfig:
    """Pitch configuration sampling one whole period of ``freq`` uniformly."""
    t = np.arange(n_samples) / (n_samples * freq)
    return PitchConfig(alpha0=DEFAULT_ALPHA0, amplitude=DEFAULT_AMPLITUDE,
                       freq=freq, t_samples=tuple(t))


def default_benchmark(seed: int = 0, n_points: int = DEFAULT_N_POINTS,
                      samples_per_period: int = DEFAULT_SAMPLES_PER_PERIOD,
                      ) -> tuple[SurfaceGeometry, list[SnapshotSet]]:
    """The standard two-fidelity benchmark used by the CLI preset and tests.

    Returns the geometry and four datasets: low-fidelity training snapshots
    (basis and sensor placement source) and truth-fidelity training,
    validation, and testing snapshots (correction-network data).
    """
    geom = ellipse_geometry(n_points)
    lofi = low_fidelity_config()
    hifi = truth_config()

    def block(freqs, fidelity, role, name):
        parts = []
        for freq in freqs:
            _, ds = generate_dataset(one_period(freq, samples_per_period), fidelity,
                                     n_points=n_points, seed=seed, role=role,
                                     name=name, geom=geom)
            parts.append(ds)
        return concat_snapshots(parts, role, name) if len(parts) > 1 else parts[0]

    datasets = [
        block(TRAIN_FREQS, lofi, "training", "lofi-training"),
        block(TRAIN_FREQS, hifi, "training", "hifi-training"),
        block((VAL_FREQ,), hifi, "validation", "hifi-validation"),
        block((TEST_FREQ,), hifi, "testing", "hifi-testing"),
    ]
    return geom, datasets
