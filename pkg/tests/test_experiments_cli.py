import json
import os

import pytest

from holevo_lab import cli, experiments
from holevo_lab.errors import ValidationError


def _cfg(**kw):
    base = dict(experiment="haar-opnorm-mean", k=2, n_samples=50)
    base.update(kw)
    return experiments.ExperimentConfig(**base)


class TestConfig:
    def test_text_round_trip(self):
        cfg = _cfg(seed=7, out_path="reports/run-a")
        parsed = experiments.ExperimentConfig.from_dict(
            experiments.parse_config_block(cfg.to_text().splitlines()))
        assert parsed == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            experiments.ExperimentConfig.from_dict(
                {"experiment": "levy-tails", "banana": 3})

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ValidationError):
            experiments.ExperimentConfig(experiment="nope")

    def test_default_out_path_is_experiment_name(self):
        assert _cfg().out_path == "haar-opnorm-mean"

    def test_value_parsing(self):
        block = experiments.parse_config_block([
            'experiment = "levy-tails"  # trailing comment',
            "d = 16",
            "eps = 0.25",
        ])
        assert block == {"experiment": "levy-tails", "d": 16, "eps": 0.25}

    def test_missing_equals_rejected(self):
        with pytest.raises(ValidationError):
            experiments.parse_config_block(["experiment levy-tails"])


class TestScanFile:
    def test_blocks(self, tmp_path):
        path = tmp_path / "scan.cfg"
        path.write_text(
            'experiment = "levy-tails"\nd = 8\nout_path = "a"\n'
            "\n"
            '# second block\nexperiment = "haar-opnorm-mean"\nk = 2\nout_path = "b"\n')
        configs = experiments.load_scan_file(str(path))
        assert [c.experiment for c in configs] == ["levy-tails", "haar-opnorm-mean"]

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("# nothing here\n\n")
        with pytest.raises(ValidationError):
            experiments.load_scan_file(str(path))

    def test_unknown_key_in_block(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text('experiment = "levy-tails"\nwat = 1\n')
        with pytest.raises(ValidationError):
            experiments.load_scan_file(str(path))


class TestReports:
    def test_deterministic_csv(self, tmp_path):
        a = experiments.run(_cfg(seed=3, out_path=str(tmp_path / "a")))
        b = experiments.run(_cfg(seed=3, out_path=str(tmp_path / "b")))
        assert open(a.csv_path, "rb").read() == open(b.csv_path, "rb").read()

    def test_seed_changes_output(self, tmp_path):
        a = experiments.run(_cfg(seed=3, out_path=str(tmp_path / "a")))
        b = experiments.run(_cfg(seed=4, out_path=str(tmp_path / "b")))
        assert open(a.csv_path, "rb").read() != open(b.csv_path, "rb").read()

    def test_json_summary_schema(self, tmp_path):
        rep = experiments.run(_cfg(out_path=str(tmp_path / "r")))
        payload = json.load(open(rep.json_path))
        assert payload["schema_version"] == experiments.SCHEMA_VERSION
        assert payload["log_base"] == 2.0
        assert payload["experiment"] == "haar-opnorm-mean"
        assert payload["config"]["k"] == 2
        assert "mean" in payload["summary"]
        assert payload["wall_time_s"] >= 0.0

    def test_atomic_write_leaves_nothing_on_failure(self, tmp_path):
        target = tmp_path / "report.csv"

        def boom(fh):
            fh.write("partial")
            raise RuntimeError("disk on fire")

        with pytest.raises(RuntimeError):
            experiments._atomic_write(str(target), boom)
        assert not target.exists()
        assert os.listdir(tmp_path) == []

    def test_csv_floats_full_precision(self, tmp_path):
        path = tmp_path / "x.csv"
        experiments.write_csv(str(path), ["v"], [{"v": 1.0 / 3.0}])
        text = path.read_text().splitlines()
        assert text[0] == "v"
        assert float(text[1]) == 1.0 / 3.0


class TestScan:
    def test_duplicate_out_paths_rejected_before_running(self, tmp_path):
        cfgs = [_cfg(out_path=str(tmp_path / "same")),
                _cfg(out_path=str(tmp_path / "same"))]
        with pytest.raises(ValidationError):
            experiments.scan(cfgs, index_path=str(tmp_path / "idx"))
        assert os.listdir(tmp_path) == []

    def test_failure_isolation(self, tmp_path):
        good = _cfg(out_path=str(tmp_path / "good"))
        # hayden-winter without d/m fails validation at run time
        bad = experiments.ExperimentConfig(experiment="hayden-winter",
                                           n_samples=5,
                                           out_path=str(tmp_path / "bad"))
        reports = experiments.scan([good, bad], index_path=str(tmp_path / "idx"))
        assert reports[0] is not None and reports[1] is None
        index = json.load(open(tmp_path / "idx.json"))
        assert index["n_ok"] == 1 and index["n_failed"] == 1
        statuses = {e["out_path"]: e["status"] for e in index["entries"]}
        assert statuses[str(tmp_path / "good")] == "ok"
        assert statuses[str(tmp_path / "bad")] == "failed"

    def test_parallel_matches_serial(self, tmp_path):
        serial = [_cfg(seed=s, out_path=str(tmp_path / f"s{s}")) for s in range(3)]
        par = [_cfg(seed=s, out_path=str(tmp_path / f"p{s}")) for s in range(3)]
        experiments.scan(serial, index_path=str(tmp_path / "i1"), parallel=1)
        experiments.scan(par, index_path=str(tmp_path / "i2"), parallel=2)
        for s in range(3):
            a = open(tmp_path / f"s{s}.csv", "rb").read()
            b = open(tmp_path / f"p{s}.csv", "rb").read()
            assert a == b

    def test_thread_cap_env(self, monkeypatch):
        monkeypatch.setenv("HOLEVO_LAB_THREADS", "2")
        assert experiments.max_threads(8) == 2
        assert experiments.max_threads(1) == 1
        monkeypatch.setenv("HOLEVO_LAB_THREADS", "0")
        with pytest.raises(ValidationError):
            experiments.max_threads(4)


class TestCli:
    def test_success_exit_code(self, tmp_path, capsys):
        code = cli.main(["haar-opnorm-mean", "--k", "2", "--samples", "50",
                         "--out", str(tmp_path / "r")])
        assert code == cli.EXIT_OK
        assert (tmp_path / "r.csv").exists()
        assert (tmp_path / "r.json").exists()
        assert "wrote" in capsys.readouterr().out

    def test_validation_exit_code(self, tmp_path, capsys):
        code = cli.main(["hayden-winter", "--k", "2", "--samples", "5",
                         "--out", str(tmp_path / "r")])
        assert code == cli.EXIT_VALIDATION
        assert "--d" in capsys.readouterr().err

    def test_guard_exit_code(self, tmp_path):
        code = cli.main(["subspace-variation", "--k", "4", "--d", "16",
                         "--m", "20", "--samples", "1",
                         "--out", str(tmp_path / "r")])
        assert code == cli.EXIT_GUARD

    def test_precision_exit_code(self, tmp_path):
        code = cli.main(["poly-envelope", "--p", "2", "--eps", "0.25",
                         "--precision-bits", "128", "--samples", "10",
                         "--out", str(tmp_path / "r")])
        assert code == cli.EXIT_PRECISION

    def test_missing_scan_file(self, tmp_path, capsys):
        code = cli.main(["scan", "--file", str(tmp_path / "nope.cfg")])
        assert code == cli.EXIT_VALIDATION

    def test_scan_end_to_end(self, tmp_path, capsys):
        scan_file = tmp_path / "scan.cfg"
        scan_file.write_text(
            f'experiment = "haar-opnorm-mean"\nk = 2\nn_samples = 50\n'
            f'out_path = "{tmp_path / "a"}"\n'
            "\n"
            f'experiment = "levy-tails"\nd = 16\nn_samples = 2000\n'
            f'out_path = "{tmp_path / "b"}"\n')
        code = cli.main(["scan", "--file", str(scan_file),
                         "--out", str(tmp_path / "idx"), "--parallel", "2"])
        assert code == cli.EXIT_OK
        index = json.load(open(tmp_path / "idx.json"))
        assert index["n_ok"] == 2 and index["n_failed"] == 0

    def test_config_file_experiment_mismatch(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text('experiment = "levy-tails"\nd = 8\n')
        code = cli.main(["haar-opnorm-mean", "--config", str(cfg)])
        assert code == cli.EXIT_VALIDATION

    def test_config_file_with_override(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text('experiment = "haar-opnorm-mean"\nk = 2\nn_samples = 50\n')
        code = cli.main(["haar-opnorm-mean", "--config", str(cfg),
                         "--seed", "5", "--out", str(tmp_path / "r")])
        assert code == cli.EXIT_OK
        payload = json.load(open(tmp_path / "r.json"))
        assert payload["config"]["seed"] == 5
        assert payload["config"]["k"] == 2
