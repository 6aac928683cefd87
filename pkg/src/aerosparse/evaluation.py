"""Error metrics, sensor-noise injection, and model comparison tables.

Errors are computed per coefficient as a flat root-mean-square and a maximum
absolute deviation over all labeled (t, f) samples, together with the angle
of attack at which the maximum occurs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correction import MlpParams, mlp_forward
from .errors import ConfigError, DataError
from .force_model import LinearForceModel
from .geometry import SnapshotSet, _readonly, lift_drag

NOISE_DISTRIBUTIONS = ("uniform", "gaussian")


@dataclass(frozen=True)
class CoefficientSeries:
    """One aerodynamic coefficient sampled over labeled (t, f, alpha) points."""

    t: np.ndarray
    f: np.ndarray
    alpha: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for attr in ("t", "f", "alpha", "values"):
            object.__setattr__(self, attr, _readonly(np.atleast_1d(getattr(self, attr))))
        m = self.values.shape[0]
        for attr in ("t", "f", "alpha"):
            if getattr(self, attr).shape != (m,):
                raise DataError(f"label '{attr}' does not match {m} values")


@dataclass(frozen=True)
class ErrorReport:
    """RMS and worst-case deviation of a predicted coefficient series."""

    l2: float
    linf: float
    alpha_at_linf: float
    per_sample: tuple[tuple[float, float, float, float, float], ...]
    # per_sample rows: (t, f, alpha, truth, prediction)

    def to_dict(self) -> dict:
        return {"l2": self.l2, "linf": self.linf, "alpha_at_linf": self.alpha_at_linf}


def error_metrics(truth: CoefficientSeries, pred: CoefficientSeries) -> ErrorReport:
    """Root-mean-square and max-absolute errors over aligned samples."""
    if truth.values.shape != pred.values.shape:
        raise DataError("truth and prediction series have different lengths")
    if not (np.array_equal(truth.t, pred.t) and np.array_equal(truth.f, pred.f)):
        raise DataError("truth and prediction series have misaligned (t, f) labels")
    dev = np.abs(truth.values - pred.values)
    l2 = float(np.sqrt(np.mean(dev ** 2)))
    worst = int(np.argmax(dev))
    per_sample = tuple(zip(truth.t.tolist(), truth.f.tolist(), truth.alpha.tolist(),
                           truth.values.tolist(), pred.values.tolist()))
    return ErrorReport(l2=l2, linf=float(dev[worst]),
                       alpha_at_linf=float(truth.alpha[worst]), per_sample=per_sample)


def add_noise(cp_s, level: float, seed: int, distribution: str = "uniform") -> np.ndarray:
    """Multiplicative sensor noise: each entry x becomes x * (1 + eta).

    ``eta`` is drawn independently per entry from U(-level, level) by default;
    a zero-mean Gaussian with standard deviation ``level`` is available behind
    the ``distribution`` switch. Works on arrays of any shape; the same seed
    always reproduces the same perturbation.
    """
    if level < 0:
        raise ConfigError(f"noise level must be >= 0, got {level}")
    if distribution not in NOISE_DISTRIBUTIONS:
        raise ConfigError(f"distribution must be one of {NOISE_DISTRIBUTIONS}")
    cp_s = np.asarray(cp_s, dtype=float)
    if level == 0:
        return cp_s.copy()
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        eta = rng.uniform(-level, level, size=cp_s.shape)
    else:
        eta = rng.normal(0.0, level, size=cp_s.shape)
    return cp_s * (1.0 + eta)


@dataclass(frozen=True)
class ModelComparison:
    """Paired error reports for {Cl, Cd} x {interpolation-only, corrected}."""

    reports: dict        # keys: (coef, model) with coef in {cl, cd}, model in {deim, nn}
    noise_level: float
    seed: int

    def report(self, coef: str, model: str) -> ErrorReport:
        return self.reports[(coef, model)]

    def rows(self) -> list[dict]:
        out = []
        for coef in ("cl", "cd"):
            for model in ("deim", "nn"):
                rep = self.reports[(coef, model)]
                out.append({"coefficient": coef, "model": model, "l2": rep.l2,
                            "linf": rep.linf, "alpha_at_linf": rep.alpha_at_linf})
        return out

    def to_csv(self) -> str:
        lines = ["coefficient,model,l2,linf,alpha_at_linf"]
        for row in self.rows():
            lines.append("%s,%s,%.17g,%.17g,%.17g" % (
                row["coefficient"], row["model"], row["l2"], row["linf"],
                row["alpha_at_linf"]))
        return "\n".join(lines) + "\n"


def compare_models(deim_model: LinearForceModel, mlp: MlpParams | None,
                   test_set: SnapshotSet, noise_level: float = 0.0,
                   seed: int = 0, distribution: str = "uniform") -> ModelComparison:
    """Evaluate interpolation-only and corrected predictions on a test set.

    Sensor inputs are read at the model's selected indices, optionally
    perturbed by multiplicative noise, and pushed through both prediction
    paths; ground-truth lift/drag come from the stored body-frame forces
    rotated at each sample's angle of attack. ``mlp=None`` evaluates the
    uncorrected model twice, which is occasionally useful for baselines.
    """
    if test_set.forces is None:
        raise DataError(f"dataset '{test_set.name}' carries no ground-truth forces")
    x = test_set.values[deim_model.selection.indices, :].T   # (M, n_s)
    x = add_noise(x, noise_level, seed, distribution)
    f_deim = x @ deim_model.m_s.T + deim_model.m_0           # (M, 3)
    f_nn = f_deim + (mlp_forward(mlp, x) if mlp is not None else 0.0)

    m = test_set.n_samples
    truth_cl = np.empty(m)
    truth_cd = np.empty(m)
    pred = {("cl", "deim"): np.empty(m), ("cd", "deim"): np.empty(m),
            ("cl", "nn"): np.empty(m), ("cd", "nn"): np.empty(m)}
    for j in range(m):
        a = test_set.alpha[j]
        truth_cl[j], truth_cd[j] = lift_drag(test_set.forces[j], a)
        pred[("cl", "deim")][j], pred[("cd", "deim")][j] = lift_drag(f_deim[j], a)
        pred[("cl", "nn")][j], pred[("cd", "nn")][j] = lift_drag(f_nn[j], a)

    labels = dict(t=test_set.t, f=test_set.f, alpha=test_set.alpha)
    truth = {"cl": CoefficientSeries(values=truth_cl, **labels),
             "cd": CoefficientSeries(values=truth_cd, **labels)}
    reports = {}
    for (coef, model), values in pred.items():
        series = CoefficientSeries(values=values, **labels)
        reports[(coef, model)] = error_metrics(truth[coef], series)
    return ModelComparison(reports=reports, noise_level=noise_level, seed=seed)


def plot_data_rows(deim_model: LinearForceModel, mlp: MlpParams | None,
                   test_set: SnapshotSet, noise_level: float = 0.0,
                   seed: int = 0) -> str:
    """CSV series (t, f, alpha, truth and predictions) for external plotting."""
    comparison = compare_models(deim_model, mlp, test_set, noise_level, seed)
    cl_deim = comparison.report("cl", "deim").per_sample
    cd_deim = comparison.report("cd", "deim").per_sample
    cl_nn = comparison.report("cl", "nn").per_sample
    cd_nn = comparison.report("cd", "nn").per_sample
    lines = ["t,f,alpha,cl_truth,cl_deim,cl_nn,cd_truth,cd_deim,cd_nn"]
    for j in range(len(cl_deim)):
        t, f, alpha, cl_truth, cl_d = cl_deim[j]
        cd_truth, cd_d = cd_deim[j][3], cd_deim[j][4]
        lines.append(",".join("%.17g" % v for v in (
            t, f, alpha, cl_truth, cl_d, cl_nn[j][4], cd_truth, cd_d, cd_nn[j][4])))
    return "\n".join(lines) + "\n"
