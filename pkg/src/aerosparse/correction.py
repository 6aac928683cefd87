"""ReLU correction network bridging ground-truth and interpolated forces.

The network maps raw sensor pressures to a 3-vector correction of the
body-frame force prediction, so the angle of attack never enters the input.
Everything is plain float64 numpy: forward, backprop, Adam with coupled L2
weight decay, a step learning-rate schedule, and early stopping on the
validation loss. All randomness flows through one seed, and two runs with the
same seed produce bitwise-identical parameters and logs.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .artifacts import dump_json, load_json
from .errors import ConfigError, DataError, NumericsError
from .force_model import LinearForceModel, predict_force
from .geometry import SnapshotSet, _readonly, lift_drag

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MLP_SCHEMA = "aerosparse/correction-mlp/1"

# Architecture / regularization grid swept by default in grid_search.
DEFAULT_GRID_HIDDEN_LAYERS = (2, 3, 4)
DEFAULT_GRID_HIDDEN_WIDTHS = (10, 20, 30, 40)
DEFAULT_GRID_WEIGHT_DECAYS = (1e-5, 1e-6, 1e-7)


@dataclass(frozen=True)
class MlpParams:
    """Layer weights/biases plus the optional input standardization.

    ``layers[j]`` is a pair (W, b) with W of shape (fan_in, fan_out); hidden
    layers apply ReLU, the final layer is affine. When ``input_mean`` is set,
    inputs are standardized before the first layer; the statistics are part
    of the model, not trainable.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    input_mean: np.ndarray | None = None
    input_std: np.ndarray | None = None

    def __post_init__(self):
        layers = tuple((_readonly(w), _readonly(b)) for w, b in self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise DataError("network must have at least one layer")
        for j, (w, b) in enumerate(layers):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DataError(f"layer {j}: weight {w.shape} and bias {b.shape} mismatch")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DataError(f"layer {j}: non-finite parameters")
            if j > 0 and layers[j - 1][0].shape[1] != w.shape[0]:
                raise DataError(f"layer {j}: input width {w.shape[0]} does not chain")
        if layers[-1][0].shape[1] != 3:
            raise DataError(f"final layer must output 3 values, got {layers[-1][0].shape[1]}")
        if (self.input_mean is None) != (self.input_std is None):
            raise DataError("input_mean and input_std must be set together")
        if self.input_mean is not None:
            mean = _readonly(self.input_mean)
            std = _readonly(self.input_std)
            object.__setattr__(self, "input_mean", mean)
            object.__setattr__(self, "input_std", std)
            n_in = layers[0][0].shape[0]
            if mean.shape != (n_in,) or std.shape != (n_in,):
                raise DataError("normalization statistics must match the input width")
            if np.any(std <= 0):
                raise DataError("input_std must be positive")

    @property
    def widths(self) -> list[int]:
        return [self.layers[0][0].shape[0]] + [w.shape[1] for w, _ in self.layers]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        payload = {"schema": MLP_SCHEMA,
                   "widths": self.widths,
                   "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in self.layers],
                   "normalization": None}
        if self.input_mean is not None:
            payload["normalization"] = {"mean": self.input_mean.tolist(),
                                        "std": self.input_std.tolist()}
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "MlpParams":
        try:
            layers = tuple((np.array(layer["w"], dtype=float),
                            np.array(layer["b"], dtype=float))
                           for layer in payload["layers"])
            norm = payload.get("normalization")
        except (KeyError, TypeError) as exc:
            raise DataError(f"mlp artifact missing field {exc!r}") from exc
        if norm is None:
            return cls(layers=layers)
        return cls(layers=layers,
                   input_mean=np.array(norm["mean"], dtype=float),
                   input_std=np.array(norm["std"], dtype=float))


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer, schedule, architecture, and stopping settings."""

    initial_lr: float = 1e-3
    lr_step: int = 50         # epochs between learning-rate decays
    lr_decay: float = 0.95
    batch_size: int = 64
    weight_decay: float = 1e-6
    patience: int = 100       # epochs without validation improvement
    max_epochs: int = 1000
    seed: int = 0
    hidden_layers: int = 2
    hidden_width: int = 10

    def __post_init__(self):
        positive = ("initial_lr", "lr_step", "lr_decay", "batch_size",
                    "max_epochs", "hidden_layers", "hidden_width")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Step schedule: initial_lr * lr_decay ** floor(epoch / lr_step)."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return cfg.initial_lr * cfg.lr_decay ** (epoch // cfg.lr_step)


def init_params(widths, rng: np.random.Generator,
                input_mean=None, input_std=None) -> MlpParams:
    """He-style initialization: N(0, 2/fan_in) weights, zero biases."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or widths[-1] != 3:
        raise ConfigError(f"widths must chain input -> ... -> 3, got {widths}")
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return MlpParams(layers=tuple(layers), input_mean=input_mean, input_std=input_std)


def _standardize(params: MlpParams, x: np.ndarray) -> np.ndarray:
    if params.input_mean is None:
        return x
    return (x - params.input_mean) / params.input_std


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Evaluate the network on one sensor vector (n_s,) or a batch (B, n_s)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.widths[0]:
        raise DataError(f"input width {x.shape[-1]}, network expects {params.widths[0]}")
    h = _standardize(params, x)
    last = params.n_layers - 1
    for j, (w, b) in enumerate(params.layers):
        h = h @ w + b
        if j < last:
            h = np.maximum(0.0, h)
    return h


def mlp_loss(params: MlpParams, x: np.ndarray, y: np.ndarray) -> float:
    """Mean over samples of the squared Euclidean residual norm."""
    r = mlp_forward(params, x) - y
    return float(np.mean(np.sum(r * r, axis=-1)))


def mlp_gradient(params: MlpParams, x: np.ndarray, y: np.ndarray):
    """Loss and its gradient with respect to every weight and bias.

    The loss is the batch mean of the squared 3-vector residual; the ReLU
    subgradient at exactly zero is taken as zero. Returns ``(loss, grads)``
    with ``grads`` shaped like ``params.layers``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0:
        raise DataError("gradient of an empty batch is undefined")
    if y.shape != (x.shape[0], 3):
        raise DataError(f"targets must be ({x.shape[0]}, 3), got {y.shape}")
    batch = x.shape[0]
    last = params.n_layers - 1

    h = _standardize(params, x)
    activations = [h]                 # inputs to each layer
    pre_acts = []
    for j, (w, b) in enumerate(params.layers):
        z = h @ w + b
        pre_acts.append(z)
        h = np.maximum(0.0, z) if j < last else z
        if j < last:
            activations.append(h)

    residual = h - y
    loss = float(np.mean(np.sum(residual * residual, axis=-1)))
    delta = 2.0 * residual / batch
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * params.n_layers
    for j in range(last, -1, -1):
        grads[j] = (activations[j].T @ delta, delta.sum(axis=0))
        if j > 0:
            delta = (delta @ params.layers[j][0].T) * (pre_acts[j - 1] > 0.0)
    return loss, grads


@dataclass
class AdamState:
    """Parameters plus first/second moment accumulators and the step count."""

    params: MlpParams
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    t: int = 0

    @classmethod
    def init(cls, params: MlpParams) -> "AdamState":
        zeros = lambda: [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]
        return cls(params=params, m=zeros(), v=zeros(), t=0)


def adam_step(state: AdamState, grads, lr: float, weight_decay: float = 0.0) -> AdamState:
    """One bias-corrected Adam update with coupled L2 weight decay.

    Decay is added to the raw gradient (g <- g + wd * theta) before the moment
    updates, matching the classic coupled form; it applies to weights and
    biases alike. Non-finite gradients abort the step.
    """
    t = state.t + 1
    new_layers, new_m, new_v = [], [], []
    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(state.params.layers, grads,
                                                    state.m, state.v):
        for name, g in (("weight", gw), ("bias", gb)):
            if not np.all(np.isfinite(g)):
                raise NumericsError(f"non-finite {name} gradient at Adam step {t}")
        updated = []
        for theta, g, m, v in ((w, gw, mw, vw), (b, gb, mb, vb)):
            g = g + weight_decay * theta
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
            m_hat = m / (1.0 - ADAM_BETA1 ** t)
            v_hat = v / (1.0 - ADAM_BETA2 ** t)
            theta = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
            if not np.all(np.isfinite(theta)):
                raise NumericsError(f"parameter overflow at Adam step {t}")
            updated.append((theta, m, v))
        new_layers.append((updated[0][0], updated[1][0]))
        new_m.append((updated[0][1], updated[1][1]))
        new_v.append((updated[0][2], updated[1][2]))
    params = MlpParams(layers=tuple(new_layers),
                       input_mean=state.params.input_mean,
                       input_std=state.params.input_std)
    return AdamState(params=params, m=new_m, v=new_v, t=t)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float


@dataclass(frozen=True)
class TrainResult:
    params: MlpParams
    log: tuple[EpochRecord, ...]
    best_epoch: int
    best_val_loss: float
    diverged: bool = False
    config: TrainConfig | None = None


def sensor_inputs(model: LinearForceModel, snapshots: SnapshotSet) -> np.ndarray:
    """Sensor pressure readings for every snapshot, shape (M, n_s)."""
    if snapshots.n_points <= int(np.max(model.selection.indices)):
        raise DataError("snapshot rows do not cover the selected sensor indices")
    return snapshots.values[model.selection.indices, :].T


def correction_targets(model: LinearForceModel, snapshots: SnapshotSet) -> np.ndarray:
    """Body-frame gap between ground-truth and interpolated forces, (M, 3)."""
    if snapshots.forces is None:
        raise DataError(f"dataset '{snapshots.name}' carries no ground-truth forces")
    x = sensor_inputs(model, snapshots)
    deim = x @ model.m_s.T + model.m_0
    return snapshots.forces - deim


def train(deim_model: LinearForceModel, train_set: SnapshotSet,
          val_set: SnapshotSet, cfg: TrainConfig) -> TrainResult:
    """Fit the correction network on the force gap of the training set.

    Inputs are standardized with training-set statistics (stored in the
    returned parameters). The best-validation parameters are returned;
    training stops after ``cfg.patience`` epochs without strict validation
    improvement, or immediately (keeping the last good checkpoint) if a loss
    turns non-finite.
    """
    x_train = sensor_inputs(deim_model, train_set)
    y_train = correction_targets(deim_model, train_set)
    x_val = sensor_inputs(deim_model, val_set)
    y_val = correction_targets(deim_model, val_set)

    # Center per channel but share one scale across channels: per-channel
    # scaling blows up relative sensor noise on low-variance channels, which
    # wrecks prediction robustness (sensor noise is relative to the reading,
    # not to its variation).
    mean = x_train.mean(axis=0)
    scale = float((x_train - mean).std())
    std = np.full(mean.shape, scale if scale > 1e-12 else 1.0)

    rng = np.random.default_rng(cfg.seed)
    widths = [x_train.shape[1]] + [cfg.hidden_width] * cfg.hidden_layers + [3]
    state = AdamState.init(init_params(widths, rng, input_mean=mean, input_std=std))

    best_params = state.params
    best_val = math.inf
    best_epoch = -1
    records: list[EpochRecord] = []
    diverged = False
    n_samples = x_train.shape[0]

    for epoch in range(cfg.max_epochs):
        lr = lr_schedule(epoch, cfg)
        perm = rng.permutation(n_samples)
        try:
            for start in range(0, n_samples, cfg.batch_size):
                idx = perm[start:start + cfg.batch_size]
                _, grads = mlp_gradient(state.params, x_train[idx], y_train[idx])
                state = adam_step(state, grads, lr, cfg.weight_decay)
        except NumericsError:
            log.warning("training diverged at epoch %d; keeping best checkpoint", epoch)
            diverged = True
            break
        train_loss = mlp_loss(state.params, x_train, y_train)
        val_loss = mlp_loss(state.params, x_val, y_val)
        records.append(EpochRecord(epoch=epoch, lr=lr,
                                   train_loss=train_loss, val_loss=val_loss))
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            log.warning("training diverged at epoch %d; keeping best checkpoint", epoch)
            diverged = True
            break
        if val_loss < best_val:
            best_val = val_loss
            best_params = state.params
            best_epoch = epoch
        elif epoch - best_epoch >= cfg.patience:
            break

    if best_epoch < 0:
        # Nothing ever improved on +inf: only possible if the very first
        # epoch diverged. Fall back to the (finite) initialization.
        best_val = mlp_loss(best_params, x_val, y_val)
        best_epoch = 0
    return TrainResult(params=best_params, log=tuple(records), best_epoch=best_epoch,
                       best_val_loss=best_val, diverged=diverged, config=cfg)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    config: TrainConfig
    best_val_loss: float
    result: TrainResult


@dataclass(frozen=True)
class GridSearchResult:
    best: TrialRecord
    trials: tuple[TrialRecord, ...]


def derive_trial_seed(base_seed: int, trial_index: int) -> int:
    """Deterministic per-trial seed from the base seed and trial position."""
    return int(np.random.SeedSequence([base_seed, trial_index]).generate_state(1)[0])


def grid_search(deim_model: LinearForceModel, train_set: SnapshotSet,
                val_set: SnapshotSet, base_cfg: TrainConfig,
                hidden_layers=DEFAULT_GRID_HIDDEN_LAYERS,
                hidden_widths=DEFAULT_GRID_HIDDEN_WIDTHS,
                weight_decays=DEFAULT_GRID_WEIGHT_DECAYS) -> GridSearchResult:
    """Train every architecture/decay combination; keep the best-validation one.

    Trials are seeded individually from ``base_cfg.seed`` and the trial index,
    so the search is reproducible and trials could run in any order.
    """
    combos = list(itertools.product(hidden_layers, hidden_widths, weight_decays))
    if not combos:
        raise ConfigError("hyperparameter grid is empty")
    trials = []
    for trial, (n_layers, width, decay) in enumerate(combos):
        cfg = replace(base_cfg, hidden_layers=n_layers, hidden_width=width,
                      weight_decay=decay, seed=derive_trial_seed(base_cfg.seed, trial))
        result = train(deim_model, train_set, val_set, cfg)
        trials.append(TrialRecord(trial=trial, config=cfg,
                                  best_val_loss=result.best_val_loss, result=result))
        log.info("grid trial %d/%d: layers=%d width=%d decay=%g -> val %.3e",
                 trial + 1, len(combos), n_layers, width, decay, result.best_val_loss)
    best = min(trials, key=lambda rec: rec.best_val_loss)
    return GridSearchResult(best=best, trials=tuple(trials))


def predict_corrected(deim_model: LinearForceModel, mlp: MlpParams,
                      cp_s, alpha_deg: float) -> tuple[float, float]:
    """Corrected (Cl, Cd): interpolated force plus network output, rotated."""
    force = predict_force(deim_model, cp_s) + mlp_forward(mlp, np.asarray(cp_s, dtype=float))
    return lift_drag(force, alpha_deg)


def save_mlp(path, params: MlpParams, config: TrainConfig | None = None,
             meta: dict | None = None) -> None:
    payload = params.to_dict()
    payload["config"] = asdict(config) if config is not None else None
    payload["seed"] = config.seed if config is not None else None
    if meta:
        payload["meta"] = meta
    dump_json(path, payload)


def load_mlp(path) -> tuple[MlpParams, dict]:
    payload = load_json(path)
    if payload.get("schema") != MLP_SCHEMA:
        raise DataError(f"{path}: not a correction-network artifact")
    return MlpParams.from_dict(payload), payload


def write_training_log(path, records) -> None:
    """Training log CSV: epoch, lr, train_loss, val_loss."""
    lines = ["epoch,lr,train_loss,val_loss"]
    for rec in records:
        lines.append("%d,%.17g,%.17g,%.17g" % (rec.epoch, rec.lr,
                                               rec.train_loss, rec.val_loss))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
