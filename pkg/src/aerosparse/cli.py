"""Command-line pipeline driver.

Each subcommand reads declared inputs, writes declared artifacts, and prints a
one-line summary. Artifacts embed the configuration and seed that produced
them plus a geometry fingerprint, and ``eval`` refuses to mix artifacts built
from different geometries. Runs are reproducible: identical inputs and seeds
yield byte-identical artifacts.

Configuration may come from a JSON file (``--config``) whose keys match the
flag names with underscores; explicitly passed flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import correction, deim, evaluation, force_model, pod, synth
from .errors import ConfigError, DataError, NumericsError
from .geometry import lift_drag, load_snapshots, write_manifest

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICS = 4
EXIT_CONFIG = 5

_EPILOG = """\
exit codes:
  0  success
  2  usage error (unknown flags, missing arguments)
  3  data error (missing/malformed files, dimension mismatches, non-finite values)
  4  numerical error (singular or ill-conditioned systems, divergence)
  5  configuration error (invalid settings, mismatched artifacts)
"""

# Per-command defaults, applied under --config values, which sit under
# explicitly passed flags.
_DEFAULTS = {
    "synth": {"preset": "paper-2d", "seed": 0,
              "n_points": synth.DEFAULT_N_POINTS,
              "samples_per_period": synth.DEFAULT_SAMPLES_PER_PERIOD},
    "pod": {"dataset": None, "n_b": 10, "seed": 0},
    "select": {"n_s": None, "candidates": "all", "seed": 0},
    "assemble": {"seed": 0},
    "train": {"train_dataset": "hifi-training", "val_dataset": "hifi-validation",
              "hidden_layers": 2, "hidden_width": 10, "weight_decay": 1e-6,
              "batch_size": 64, "initial_lr": 1e-3, "lr_step": 50, "lr_decay": 0.95,
              "patience": 100, "max_epochs": 1000, "seed": 0, "log": None},
    "grid-search": {"train_dataset": "hifi-training", "val_dataset": "hifi-validation",
                    "hidden_layers": "2,3,4", "hidden_widths": "10,20,30,40",
                    "weight_decays": "1e-5,1e-6,1e-7", "batch_size": 64,
                    "initial_lr": 1e-3, "lr_step": 50, "lr_decay": 0.95,
                    "patience": 100, "max_epochs": 1000, "seed": 0,
                    "trials_csv": None},
    "predict": {"mlp": None, "alpha": 0.0},
    "eval": {"dataset": "hifi-testing", "mlp": None, "noise": 0.0, "seed": 0,
             "format": "csv", "out": None, "plot_data": None},
}


def _merge_config(command: str, args: argparse.Namespace) -> dict:
    """defaults < config-file values < explicitly passed flags."""
    merged = dict(_DEFAULTS[command])
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            file_values = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        unknown = set(file_values) - set(merged)
        if unknown:
            raise ConfigError(f"unknown config keys for '{command}': {sorted(unknown)}")
        merged.update(file_values)
    for key in merged:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"--{flag} expects comma-separated integers, got {text!r}") from exc


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"--{flag} expects comma-separated numbers, got {text!r}") from exc


def _pick_dataset(datasets, name=None, role=None, flag="--dataset"):
    if name:
        for ds in datasets:
            if ds.name == name:
                return ds
        raise ConfigError(f"{flag}: no dataset named {name!r} in the manifest "
                          f"(available: {[d.name for d in datasets]})")
    for ds in datasets:
        if role is None or ds.role_tag == role:
            return ds
    raise ConfigError(f"{flag}: manifest has no dataset with role {role!r}")


def _train_config(cfg: dict) -> correction.TrainConfig:
    return correction.TrainConfig(
        initial_lr=float(cfg["initial_lr"]), lr_step=int(cfg["lr_step"]),
        lr_decay=float(cfg["lr_decay"]), batch_size=int(cfg["batch_size"]),
        weight_decay=float(cfg["weight_decay"]),
        patience=int(cfg["patience"]), max_epochs=int(cfg["max_epochs"]),
        seed=int(cfg["seed"]), hidden_layers=int(cfg["hidden_layers"]),
        hidden_width=int(cfg["hidden_width"]))


# --------------------------------------------------------------------------
# Subcommand handlers
# --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _merge_config("synth", args)
    if cfg["preset"] != "paper-2d":
        raise ConfigError(f"unknown preset {cfg['preset']!r}; available: paper-2d")
    geom, datasets = synth.default_benchmark(
        seed=int(cfg["seed"]), n_points=int(cfg["n_points"]),
        samples_per_period=int(cfg["samples_per_period"]))
    manifest_path = write_manifest(args.out, geom, datasets)
    print(f"synth: wrote {len(datasets)} datasets "
          f"({geom.n_points} surface points) to {manifest_path}")
    return EXIT_OK


def cmd_pod(args) -> int:
    cfg = _merge_config("pod", args)
    geom, datasets = load_snapshots(args.manifest)
    ds = _pick_dataset(datasets, cfg["dataset"], role="training")
    basis = pod.pod_basis(ds, int(cfg["n_b"]))
    meta = {"config": {"n_b": int(cfg["n_b"]), "dataset": ds.name,
                       "manifest": str(args.manifest)},
            "seed": int(cfg["seed"]), "geometry_hash": geom.fingerprint()}
    pod.save_basis(args.out, basis, meta)
    spectrum = pod.singular_spectrum(basis)
    print(f"pod: {basis.n_modes} modes from dataset '{ds.name}' "
          f"(sigma_nb/sigma_1 = {spectrum[basis.n_modes - 1]:.3e}) -> {args.out}")
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = _merge_config("select", args)
    basis, basis_meta = pod.load_basis(args.basis)
    n_s = int(cfg["n_s"]) if cfg["n_s"] is not None else basis.n_modes
    if n_s > basis.n_modes:
        raise ConfigError(f"n_s = {n_s} exceeds the {basis.n_modes} basis modes")
    if n_s < basis.n_modes:
        print(f"select: warning: n_s = {n_s} decoupled from n_b = {basis.n_modes}; "
              "using the leading modes", file=sys.stderr)
    if cfg["candidates"] == "all":
        candidates = np.arange(basis.n_points)
    else:
        candidates = np.array(_parse_int_list(cfg["candidates"], "candidates"))
    selection = deim.deim_select(basis.truncated(n_s), candidates, n_s)
    meta = {"config": {"n_s": n_s, "basis": str(args.basis),
                       "candidates": cfg["candidates"]},
            "seed": int(cfg["seed"]),
            "geometry_hash": basis_meta.get("geometry_hash", "")}
    deim.save_selection(args.out, selection, meta)
    print(f"select: {n_s} sensors from {candidates.size} candidates, "
          f"order {selection.indices.tolist()} -> {args.out}")
    return EXIT_OK


def cmd_assemble(args) -> int:
    cfg = _merge_config("assemble", args)
    geom, _ = load_snapshots(args.manifest)
    basis, basis_meta = pod.load_basis(args.basis)
    selection, sel_meta = deim.load_selection(args.sensors)
    for label, meta in (("basis", basis_meta), ("sensor", sel_meta)):
        recorded = meta.get("geometry_hash", "")
        if recorded and recorded != geom.fingerprint():
            raise ConfigError(f"{label} artifact was built from a different geometry")
    model = force_model.assemble_force_model(geom, basis.truncated(selection.n_sensors),
                                             selection)
    meta = {"config": {"manifest": str(args.manifest), "basis": str(args.basis),
                       "sensors": str(args.sensors)},
            "seed": int(cfg["seed"])}
    force_model.save_model(args.out, model, meta)
    cond = float(np.linalg.cond(basis.basis[selection.indices, :selection.n_sensors]))
    print(f"assemble: {model.n_sensors}-sensor force model "
          f"(sensor block cond {cond:.2e}) -> {args.out}")
    return EXIT_OK


def _load_training_data(args, cfg):
    geom, datasets = load_snapshots(args.manifest)
    model, model_meta = force_model.load_model(args.model)
    if model.geometry_hash and model.geometry_hash != geom.fingerprint():
        raise ConfigError("force model was built from a different geometry")
    train_set = _pick_dataset(datasets, cfg["train_dataset"], flag="--train-dataset")
    val_set = _pick_dataset(datasets, cfg["val_dataset"], flag="--val-dataset")
    return geom, model, train_set, val_set


def cmd_train(args) -> int:
    cfg = _merge_config("train", args)
    geom, model, train_set, val_set = _load_training_data(args, cfg)
    train_cfg = _train_config(cfg)
    result = correction.train(model, train_set, val_set, train_cfg)
    meta = {"geometry_hash": geom.fingerprint(),
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
            "diverged": result.diverged}
    correction.save_mlp(args.out, result.params, train_cfg, meta)
    if cfg["log"]:
        correction.write_training_log(cfg["log"], result.log)
    print(f"train: {len(result.log)} epochs, best val loss "
          f"{result.best_val_loss:.6e} at epoch {result.best_epoch} -> {args.out}")
    return EXIT_OK


def cmd_grid_search(args) -> int:
    cfg = _merge_config("grid-search", args)
    geom, model, train_set, val_set = _load_training_data(args, cfg)
    base = correction.TrainConfig(
        initial_lr=float(cfg["initial_lr"]), lr_step=int(cfg["lr_step"]),
        lr_decay=float(cfg["lr_decay"]), batch_size=int(cfg["batch_size"]),
        patience=int(cfg["patience"]), max_epochs=int(cfg["max_epochs"]),
        seed=int(cfg["seed"]))
    result = correction.grid_search(
        model, train_set, val_set, base,
        hidden_layers=_parse_int_list(cfg["hidden_layers"], "hidden-layers"),
        hidden_widths=_parse_int_list(cfg["hidden_widths"], "hidden-widths"),
        weight_decays=_parse_float_list(cfg["weight_decays"], "weight-decays"))
    best = result.best
    meta = {"geometry_hash": geom.fingerprint(),
            "best_epoch": best.result.best_epoch,
            "best_val_loss": best.best_val_loss,
            "trial": best.trial, "n_trials": len(result.trials)}
    correction.save_mlp(args.out, best.result.params, best.config, meta)
    if cfg["trials_csv"]:
        lines = ["trial,hidden_layers,hidden_width,weight_decay,seed,best_val_loss"]
        for rec in result.trials:
            lines.append("%d,%d,%d,%.17g,%d,%.17g" % (
                rec.trial, rec.config.hidden_layers, rec.config.hidden_width,
                rec.config.weight_decay, rec.config.seed, rec.best_val_loss))
        Path(cfg["trials_csv"]).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"grid-search: {len(result.trials)} trials, best "
          f"{best.config.hidden_layers}x{best.config.hidden_width} "
          f"wd={best.config.weight_decay:g} (val {best.best_val_loss:.6e}) -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _merge_config("predict", args)
    model, _ = force_model.load_model(args.model)
    cp_s = np.array(_parse_float_list(args.sensors, "sensors"))
    alpha = float(cfg["alpha"])
    if cfg["mlp"]:
        params, _ = correction.load_mlp(cfg["mlp"])
        cl, cd = correction.predict_corrected(model, params, cp_s, alpha)
    else:
        cl, cd = lift_drag(force_model.predict_force(model, cp_s), alpha)
    print(f"predict: alpha={alpha:g} deg Cl={cl:.17g} Cd={cd:.17g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _merge_config("eval", args)
    geom, datasets = load_snapshots(args.manifest)
    model, _ = force_model.load_model(args.model)
    fingerprint = geom.fingerprint()
    if model.geometry_hash and model.geometry_hash != fingerprint:
        raise ConfigError("force model was built from a different geometry")
    params = None
    if cfg["mlp"]:
        params, mlp_payload = correction.load_mlp(cfg["mlp"])
        recorded = (mlp_payload.get("meta") or {}).get("geometry_hash", "")
        if recorded and recorded != fingerprint:
            raise ConfigError("correction network was trained on a different geometry")
    test_set = _pick_dataset(datasets, cfg["dataset"], role="testing")
    comparison = evaluation.compare_models(model, params, test_set,
                                           noise_level=float(cfg["noise"]),
                                           seed=int(cfg["seed"]))
    if cfg["format"] == "json":
        payload = {"noise_level": comparison.noise_level, "seed": comparison.seed,
                   "dataset": test_set.name, "rows": comparison.rows()}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    elif cfg["format"] == "csv":
        text = comparison.to_csv()
    else:
        raise ConfigError(f"--format must be csv or json, got {cfg['format']!r}")
    if cfg["out"]:
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if cfg["plot_data"]:
        Path(cfg["plot_data"]).write_text(
            evaluation.plot_data_rows(model, params, test_set,
                                      float(cfg["noise"]), int(cfg["seed"])),
            encoding="utf-8")
    cl_nn = comparison.report("cl", "nn").l2
    cl_deim = comparison.report("cl", "deim").l2
    print(f"eval: dataset '{test_set.name}' noise={cfg['noise']:g} "
          f"Cl l2: deim {cl_deim:.4e} / corrected {cl_nn:.4e}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aerosparse",
        description="Sparse-sensor aerodynamic force prediction pipeline",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text, epilog=_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(handler=handler)
        p.add_argument("--config", help="JSON file with defaults for this command "
                                        "(explicit flags win)")
        return p

    p = add("synth", cmd_synth, "generate the synthetic two-fidelity benchmark")
    p.add_argument("--preset", help="benchmark preset (paper-2d)")
    p.add_argument("--out", required=True, help="output directory for the manifest")
    p.add_argument("--seed", type=int, help="generator seed")
    p.add_argument("--n-points", dest="n_points", type=int, help="surface points")
    p.add_argument("--samples-per-period", dest="samples_per_period", type=int)

    p = add("pod", cmd_pod, "build the reduced basis from a training dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dataset", help="dataset name (default: first training role)")
    p.add_argument("--n-b", dest="n_b", type=int, help="number of modes")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="basis artifact path")

    p = add("select", cmd_select, "choose sensor locations on the basis")
    p.add_argument("--basis", required=True)
    p.add_argument("--n-s", dest="n_s", type=int,
                   help="number of sensors (default: all basis modes)")
    p.add_argument("--candidates", help="'all' or comma-separated 0-based indices")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="sensor-selection artifact path")

    p = add("assemble", cmd_assemble, "fold geometry+basis+sensors into the force model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--sensors", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="force-model artifact path")

    p = add("train", cmd_train, "train the correction network")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--train-dataset", dest="train_dataset")
    p.add_argument("--val-dataset", dest="val_dataset")
    p.add_argument("--hidden-layers", dest="hidden_layers", type=int)
    p.add_argument("--hidden-width", dest="hidden_width", type=int)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--initial-lr", dest="initial_lr", type=float)
    p.add_argument("--lr-step", dest="lr_step", type=int)
    p.add_argument("--lr-decay", dest="lr_decay", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--log", help="training-log CSV path")
    p.add_argument("--out", required=True, help="network artifact path")

    p = add("grid-search", cmd_grid_search, "sweep architectures and weight decay")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--train-dataset", dest="train_dataset")
    p.add_argument("--val-dataset", dest="val_dataset")
    p.add_argument("--hidden-layers", dest="hidden_layers",
                   help="comma-separated layer counts")
    p.add_argument("--hidden-widths", dest="hidden_widths",
                   help="comma-separated layer widths")
    p.add_argument("--weight-decays", dest="weight_decays",
                   help="comma-separated decay factors")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--initial-lr", dest="initial_lr", type=float)
    p.add_argument("--lr-step", dest="lr_step", type=int)
    p.add_argument("--lr-decay", dest="lr_decay", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials-csv", dest="trials_csv", help="per-trial record CSV")
    p.add_argument("--out", required=True, help="best network artifact path")

    p = add("predict", cmd_predict, "one-shot lift/drag prediction from sensor values")
    p.add_argument("--model", required=True)
    p.add_argument("--mlp", help="correction network artifact (optional)")
    p.add_argument("--sensors", required=True, help="comma-separated sensor pressures")
    p.add_argument("--alpha", type=float, help="angle of attack, deg")

    p = add("eval", cmd_eval, "error tables on a labeled test dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--mlp", help="correction network artifact (optional)")
    p.add_argument("--dataset", help="dataset name (default: testing role)")
    p.add_argument("--noise", type=float, help="relative sensor noise level")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--plot-data", dest="plot_data",
                   help="CSV path for (t, f, alpha, Cl, Cd) series per model")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.handler(args)
    except DataError as exc:
        print(f"error (data): {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericsError as exc:
        print(f"error (numerics): {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except ConfigError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
