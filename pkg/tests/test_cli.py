import csv
import dataclasses
import io
import json

import pytest

from mpcorr import __version__
from mpcorr.cli import main
from mpcorr.errors import ConfigError, ConvergenceError
from mpcorr.experiments import EXPERIMENTS, Result, load_config


def write_config(tmp_path, **doc):
    doc = {"schema_version": 1, **doc}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


class TestRun:
    def test_spg_scaling_artifacts(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="spg-scaling", seed=7,
                           parameters={"n_list": [64, 128, 256], "n_train": 200, "n_test": 300})
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_csv(out / "spg_scaling.csv")
        assert [int(r["n"]) for r in rows] == [64, 128, 256]
        assert {"spg_mp_db", "spg_mac_db"} <= set(rows[0])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"] == json.loads(cfg.read_text())
        assert manifest["seed"] == 7 and manifest["library_version"] == __version__
        assert (out / "summary.txt").read_text().startswith("spg-scaling")
        assert "spg-scaling" in capsys.readouterr().out

    def test_tradeoff_columns(self, tmp_path):
        cfg = write_config(tmp_path, experiment="transient-tradeoff", parameters={"n": 64, "n_reads": 4})
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_csv(out / "tradeoff.csv")
        assert {"t_read", "enob", "tops_w_core", "tops_w_system"} <= set(rows[0])

    def test_seed_override_recorded(self, tmp_path):
        cfg = write_config(tmp_path, experiment="maxent-check", seed=1, parameters={"trials": 3})
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
        assert json.loads((out / "manifest.json").read_text())["seed"] == 5

    def test_output_dir_from_config(self, tmp_path):
        out = tmp_path / "from_cfg"
        cfg = write_config(tmp_path, experiment="maxent-check", parameters={"trials": 2},
                           output_dir=str(out))
        assert main(["run", "--config", str(cfg)]) == 0
        assert (out / "manifest.json").exists()

    def test_repeat_byte_identical(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, experiment="cosamp", seed=2,
                           parameters={"k_templates": 32, "bins": 128, "backend": "mac"})
        blobs = []
        for k, threads in enumerate(("1", "2")):
            monkeypatch.setenv("MPCORR_THREADS", threads)
            out = tmp_path / f"o{k}"
            main(["run", "--config", str(cfg), "--out", str(out)])
            blobs.append({p.name: p.read_bytes() for p in out.iterdir()})
        assert blobs[0] == blobs[1]


class TestExitCodes:
    @pytest.mark.parametrize("params", [{"n": "big"}, {"n": 2.5}, {"n": True}, {"nope": 1},
                                        {"phase_step": -1.0}])
    def test_invalid_parameter_writes_nothing(self, tmp_path, capsys, params):
        cfg = write_config(tmp_path, experiment="mp-demo", parameters=params)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
        assert not out.exists()
        assert "parameters." in capsys.readouterr().err

    @pytest.mark.parametrize("doc", [{"experiment": "nope"}, {"experiment": "mp-demo", "extra": 1},
                                     {"experiment": "mp-demo", "seed": -1},
                                     {"experiment": "mp-demo", "schema_version": 2}])
    def test_invalid_document(self, tmp_path, doc):
        cfg = write_config(tmp_path, **doc)
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2

    def test_missing_output_dir(self, tmp_path):
        cfg = write_config(tmp_path, experiment="maxent-check")
        assert main(["run", "--config", str(cfg)]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_numerical_failure(self, tmp_path, monkeypatch, capsys):
        def boom(p, seed, threads):
            raise ConvergenceError("no bracket", bracket=(0.0, 1.0))
        monkeypatch.setitem(EXPERIMENTS, "maxent-check",
                            dataclasses.replace(EXPERIMENTS["maxent-check"], runner=boom))
        cfg = write_config(tmp_path, experiment="maxent-check")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
        assert "ConvergenceError" in capsys.readouterr().err

    def test_failed_result(self, tmp_path, monkeypatch):
        fail = lambda p, s, t: Result({"x.csv": "a\n"}, "failed", False)
        monkeypatch.setitem(EXPERIMENTS, "maxent-check",
                            dataclasses.replace(EXPERIMENTS["maxent-check"], runner=fail))
        cfg = write_config(tmp_path, experiment="maxent-check")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


class TestConfig:
    def test_field_level_message(self):
        with pytest.raises(ConfigError, match="parameters.n_list"):
            load_config(json.dumps({"schema_version": 1, "experiment": "spg-scaling",
                                    "parameters": {"n_list": [64, "x"]}}))

    def test_list_experiments(self, capsys):
        assert main(["list-experiments"]) == 0
        out = capsys.readouterr().out
        for name in EXPERIMENTS:
            assert f"{name}:" in out
        assert len(EXPERIMENTS) == 11
