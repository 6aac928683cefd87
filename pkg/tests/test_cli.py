import json
from pathlib import Path

import numpy as np
import pytest

from aerosparse.cli import main
from aerosparse.correction import MlpParams, save_mlp
from aerosparse.force_model import load_model

FAST = ["--n-points", "64", "--samples-per-period", "16"]


def run_pipeline(workdir, monkeypatch, n_b="6", max_epochs="40"):
    """synth -> pod -> select -> assemble -> train, all inside workdir."""
    monkeypatch.chdir(workdir)
    steps = [
        ["synth", "--preset", "paper-2d", "--out", "data", *FAST],
        ["pod", "--manifest", "data/manifest.json", "--dataset", "lofi-training",
         "--n-b", n_b, "--out", "basis.json"],
        ["select", "--basis", "basis.json", "--n-s", n_b, "--out", "sensors.json"],
        ["assemble", "--manifest", "data/manifest.json", "--basis", "basis.json",
         "--sensors", "sensors.json", "--out", "model.json"],
        ["train", "--manifest", "data/manifest.json", "--model", "model.json",
         "--max-epochs", max_epochs, "--out", "mlp.json", "--log", "train_log.csv"],
    ]
    for argv in steps:
        assert main(argv) == 0, argv


def artifact_bytes(workdir):
    out = {}
    for name in ("basis.json", "sensors.json", "model.json", "mlp.json",
                 "train_log.csv", "report.csv"):
        path = Path(workdir) / name
        if path.exists():
            out[name] = path.read_bytes()
    for path in sorted((Path(workdir) / "data").iterdir()):
        out[f"data/{path.name}"] = path.read_bytes()
    return out


class TestEndToEnd:
    def test_smoke_run_produces_four_error_rows(self, tmp_path, monkeypatch, capsys):
        run_pipeline(tmp_path, monkeypatch)
        assert main(["eval", "--manifest", "data/manifest.json", "--model",
                     "model.json", "--mlp", "mlp.json", "--out", "report.csv"]) == 0
        lines = (tmp_path / "report.csv").read_text().strip().splitlines()
        assert lines[0] == "coefficient,model,l2,linf,alpha_at_linf"
        assert len(lines) == 5
        summary = capsys.readouterr().out
        assert "eval: dataset 'hifi-testing'" in summary

    def test_eval_stdout_json(self, tmp_path, monkeypatch, capsys):
        run_pipeline(tmp_path, monkeypatch)
        assert main(["eval", "--manifest", "data/manifest.json", "--model",
                     "model.json", "--format", "json", "--out", "report.json"]) == 0
        payload = json.loads((tmp_path / "report.json").read_text())
        assert len(payload["rows"]) == 4
        assert payload["dataset"] == "hifi-testing"

    def test_plot_data_flag(self, tmp_path, monkeypatch):
        run_pipeline(tmp_path, monkeypatch)
        assert main(["eval", "--manifest", "data/manifest.json", "--model",
                     "model.json", "--mlp", "mlp.json", "--out", "report.csv",
                     "--plot-data", "plot.csv"]) == 0
        header = (tmp_path / "plot.csv").read_text().splitlines()[0]
        assert header == "t,f,alpha,cl_truth,cl_deim,cl_nn,cd_truth,cd_deim,cd_nn"


class TestPredict:
    def test_zero_network_matches_pure_linear(self, tmp_path, monkeypatch, capsys):
        run_pipeline(tmp_path, monkeypatch)
        model, _ = load_model("model.json")
        sensors = ",".join("%.17g" % v for v in model.mean_at_sensors)
        zero = MlpParams(layers=(
            (np.zeros((model.n_sensors, 4)), np.zeros(4)),
            (np.zeros((4, 3)), np.zeros(3))))
        save_mlp("zero_mlp.json", zero)
        capsys.readouterr()
        assert main(["predict", "--model", "model.json", "--sensors", sensors,
                     "--alpha", "20"]) == 0
        plain = capsys.readouterr().out.strip()
        assert main(["predict", "--model", "model.json", "--mlp", "zero_mlp.json",
                     "--sensors", sensors, "--alpha", "20"]) == 0
        corrected = capsys.readouterr().out.strip()
        assert plain == corrected
        assert plain.startswith("predict: alpha=20")


class TestDeterminism:
    def test_rerun_byte_identical(self, tmp_path, monkeypatch):
        dir_a = tmp_path / "a"
        dir_b = tmp_path / "b"
        dir_a.mkdir()
        dir_b.mkdir()
        run_pipeline(dir_a, monkeypatch)
        assert main(["eval", "--manifest", "data/manifest.json", "--model",
                     "model.json", "--mlp", "mlp.json", "--noise", "0.015",
                     "--seed", "0", "--out", "report.csv"]) == 0
        run_pipeline(dir_b, monkeypatch)
        assert main(["eval", "--manifest", "data/manifest.json", "--model",
                     "model.json", "--mlp", "mlp.json", "--noise", "0.015",
                     "--seed", "0", "--out", "report.csv"]) == 0
        bytes_a = artifact_bytes(dir_a)
        bytes_b = artifact_bytes(dir_b)
        assert set(bytes_a) == set(bytes_b)
        for name in bytes_a:
            assert bytes_a[name] == bytes_b[name], f"{name} differs between reruns"


class TestErrorHandling:
    def test_missing_manifest_exits_3(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        code = main(["pod", "--manifest", "missing.json", "--n-b", "4",
                     "--out", "basis.json"])
        assert code == 3
        assert "error (data)" in capsys.readouterr().err

    def test_oversized_n_s_exits_5(self, tmp_path, monkeypatch, capsys):
        run_pipeline(tmp_path, monkeypatch)
        code = main(["select", "--basis", "basis.json", "--n-s", "20",
                     "--out", "s2.json"])
        assert code == 5
        assert "error (config)" in capsys.readouterr().err

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["pod", "--manifest", "x.json", "--bogus", "1"])
        assert exc.value.code == 2

    def test_no_command_prints_help(self, capsys):
        assert main([]) == 2
        assert "COMMAND" in capsys.readouterr().out

    def test_geometry_mismatch_exits_5(self, tmp_path, monkeypatch, capsys):
        run_pipeline(tmp_path, monkeypatch)
        assert main(["synth", "--preset", "paper-2d", "--out", "other",
                     "--n-points", "48", "--samples-per-period", "16"]) == 0
        code = main(["eval", "--manifest", "other/manifest.json", "--model",
                     "model.json", "--out", "r.csv"])
        assert code == 5
        assert "different geometry" in capsys.readouterr().err

    def test_unknown_dataset_exits_5(self, tmp_path, monkeypatch):
        run_pipeline(tmp_path, monkeypatch)
        code = main(["eval", "--manifest", "data/manifest.json", "--model",
                     "model.json", "--dataset", "nope", "--out", "r.csv"])
        assert code == 5


class TestArtifactMetadata:
    def test_artifacts_embed_config_and_seed(self, tmp_path, monkeypatch):
        run_pipeline(tmp_path, monkeypatch)
        for name in ("basis.json", "sensors.json", "model.json"):
            payload = json.loads((tmp_path / name).read_text())
            assert "config" in payload["meta"], name
            assert "seed" in payload["meta"], name
        mlp = json.loads((tmp_path / "mlp.json").read_text())
        assert mlp["config"]["seed"] == mlp["seed"] == 0
        assert mlp["meta"]["geometry_hash"]


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_win(self, tmp_path, monkeypatch):
        run_pipeline(tmp_path, monkeypatch)
        (tmp_path / "pod_cfg.json").write_text(json.dumps({"n_b": 4}))
        assert main(["pod", "--manifest", "data/manifest.json", "--config",
                     "pod_cfg.json", "--out", "b4.json"]) == 0
        assert len(json.loads((tmp_path / "b4.json").read_text())["basis"][0]) == 4
        assert main(["pod", "--manifest", "data/manifest.json", "--config",
                     "pod_cfg.json", "--n-b", "3", "--out", "b3.json"]) == 0
        assert len(json.loads((tmp_path / "b3.json").read_text())["basis"][0]) == 3

    def test_unknown_config_key_exits_5(self, tmp_path, monkeypatch, capsys):
        run_pipeline(tmp_path, monkeypatch)
        (tmp_path / "bad.json").write_text(json.dumps({"n_modes": 4}))
        code = main(["pod", "--manifest", "data/manifest.json", "--config",
                     "bad.json", "--out", "x.json"])
        assert code == 5
        assert "unknown config keys" in capsys.readouterr().err


class TestGridSearchCommand:
    def test_small_grid(self, tmp_path, monkeypatch):
        run_pipeline(tmp_path, monkeypatch)
        assert main(["grid-search", "--manifest", "data/manifest.json",
                     "--model", "model.json", "--hidden-layers", "2",
                     "--hidden-widths", "10,20", "--weight-decays", "1e-6",
                     "--max-epochs", "10", "--out", "best.json",
                     "--trials-csv", "trials.csv"]) == 0
        lines = (tmp_path / "trials.csv").read_text().strip().splitlines()
        assert lines[0].startswith("trial,hidden_layers")
        assert len(lines) == 3
        payload = json.loads((tmp_path / "best.json").read_text())
        assert payload["schema"] == "aerosparse/correction-mlp/1"
        assert payload["meta"]["n_trials"] == 2
