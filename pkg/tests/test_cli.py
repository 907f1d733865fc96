import json

import numpy as np
import pytest
from click.testing import CliRunner

from fdrkit.cli import main

FAST_FIT = ["--epochs", "3", "--batch-size", "128", "--grid-size", "200",
            "--f1-sweeps", "2", "--hidden", "16,16"]


@pytest.fixture()
def runner():
    return CliRunner()


def _json_payload(output: str) -> dict:
    start = output.index("{")
    return json.loads(output[start:])


def simulate(runner, tmp_path, name="t.csv", seed="7", n="400", scenario="A"):
    path = tmp_path / name
    res = runner.invoke(main, ["simulate", "--scenario", scenario, "--seed",
                               seed, "--n", n, "--out", str(path)])
    assert res.exit_code == 0, res.output
    return path, _json_payload(res.output)


class TestSimulate:
    def test_writes_table_with_truth(self, runner, tmp_path):
        path, payload = simulate(runner, tmp_path)
        header = path.read_text().splitlines()[0].split(",")
        assert "h" in header and "z" in header
        assert payload["n"] == 400
        assert "config_hash" in payload

    def test_unknown_scenario_usage_error(self, runner, tmp_path):
        res = runner.invoke(main, ["simulate", "--scenario", "Q", "--out",
                                   str(tmp_path / "x.csv")])
        assert res.exit_code == 2
        assert "available" in res.output

    def test_byte_identical_reruns(self, runner, tmp_path):
        p1, _ = simulate(runner, tmp_path, name="a.csv")
        p2, _ = simulate(runner, tmp_path, name="b.csv")
        assert p1.read_bytes() == p2.read_bytes()


class TestFit:
    def test_fit_writes_model(self, runner, tmp_path):
        table, _ = simulate(runner, tmp_path)
        model_path = tmp_path / "m.json"
        res = runner.invoke(main, ["fit", "--in", str(table), "--variant", "b",
                                   "--seed", "7", "--out", str(model_path),
                                   *FAST_FIT])
        assert res.exit_code == 0, res.output
        payload = _json_payload(res.output)
        assert payload["variant"] == "neurt_b"
        saved = json.loads(model_path.read_text())
        assert saved["variant"] == "neurt_b"

    def test_missing_input_nonzero_exit(self, runner, tmp_path):
        res = runner.invoke(main, ["fit", "--in", str(tmp_path / "nope.csv"),
                                   "--out", str(tmp_path / "m.json")])
        assert res.exit_code != 0

    def test_q_zero_warns_but_fits(self, runner, tmp_path):
        path = tmp_path / "noq.csv"
        rng = np.random.default_rng(0)
        lines = ["z,x0"] + [f"{float(z)!r},{float(x)!r}" for z, x in
                            zip(rng.standard_normal(60),
                                rng.standard_normal(60))]
        path.write_text("\n".join(lines) + "\n")
        res = runner.invoke(main, ["fit", "--in", str(path), "--variant", "a",
                                   "--seed", "1", "--out",
                                   str(tmp_path / "m.json"), *FAST_FIT])
        assert res.exit_code == 0, res.output
        assert "skipped" in res.output


class TestDiscover:
    def test_bh_on_null_z(self, runner, tmp_path):
        path = tmp_path / "null.csv"
        lines = ["z,x0"] + [f"0.0,{i}" for i in range(20)]
        path.write_text("\n".join(lines) + "\n")
        out = tmp_path / "d.csv"
        res = runner.invoke(main, ["discover", "--in", str(path), "--method",
                                   "bh", "--alpha", "0.1", "--out", str(out)])
        assert res.exit_code == 0, res.output
        assert _json_payload(res.output)["discoveries"] == 0

    def test_alpha_out_of_range(self, runner, tmp_path):
        table, _ = simulate(runner, tmp_path)
        res = runner.invoke(main, ["discover", "--in", str(table), "--method",
                                   "bh", "--alpha", "1.5", "--out",
                                   str(tmp_path / "d.csv")])
        assert res.exit_code == 2

    def test_neurt_requires_model(self, runner, tmp_path):
        table, _ = simulate(runner, tmp_path)
        res = runner.invoke(main, ["discover", "--in", str(table), "--method",
                                   "neurt", "--out", str(tmp_path / "d.csv")])
        assert res.exit_code == 2

    def test_full_pipeline_report(self, runner, tmp_path):
        table, _ = simulate(runner, tmp_path, n="500")
        model_path = tmp_path / "m.json"
        res = runner.invoke(main, ["fit", "--in", str(table), "--variant", "b",
                                   "--seed", "7", "--out", str(model_path),
                                   *FAST_FIT])
        assert res.exit_code == 0, res.output
        out = tmp_path / "d.csv"
        report = tmp_path / "r.json"
        res = runner.invoke(main, ["discover", "--in", str(table), "--method",
                                   "neurt", "--model", str(model_path),
                                   "--alpha", "0.1", "--out", str(out),
                                   "--report", str(report)])
        assert res.exit_code == 0, res.output
        payload = json.loads(report.read_text())
        assert {"method", "alpha", "n", "discoveries", "fdp", "power",
                "seconds", "config_hash"} <= set(payload)
        assert payload["fdp"] <= 0.2
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "id,score,rejected"
        assert len(lines) == 501


class TestConfigPrecedence:
    def test_config_file_sets_defaults_flags_win(self, runner, tmp_path):
        table, _ = simulate(runner, tmp_path)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"epochs": 2, "hidden": "8,8",
                                        "f1_sweeps": 2, "grid_size": 150}))
        model_path = tmp_path / "m.json"
        res = runner.invoke(main, ["fit", "--in", str(table), "--seed", "1",
                                   "--out", str(model_path), "--config",
                                   str(cfg_path), "--epochs", "1"])
        assert res.exit_code == 0, res.output
        saved = json.loads(model_path.read_text())
        assert saved["train_config"]["epochs"] == 1        # flag beats file
        assert saved["train_config"]["lambda_grid_size"] == 150  # file beats default


class TestBenchmark:
    def test_single_cell_matches_run_report(self, runner, tmp_path):
        out_dir = tmp_path / "bench"
        res = runner.invoke(main, ["benchmark", "--scenario", "A", "--methods",
                                   "bh", "--seeds", "3", "--alpha", "0.1",
                                   "--n", "800", "--out-dir", str(out_dir)])
        assert res.exit_code == 0, res.output
        agg = json.loads((out_dir / "aggregate.json").read_text())
        stats = agg["methods"]["bh"]
        assert stats["sd_discoveries"] == 0.0
        per_seed = (out_dir / "per_seed.csv").read_text().strip().splitlines()
        assert len(per_seed) == 2
        row = per_seed[1].split(",")
        assert row[0] == "bh" and int(row[3]) == stats["mean_discoveries"]
        assert (out_dir / "hist_bh.csv").exists()

    def test_empty_methods_usage_error(self, runner, tmp_path):
        res = runner.invoke(main, ["benchmark", "--methods", "", "--seeds",
                                   "0", "--out-dir", str(tmp_path / "b")])
        assert res.exit_code == 2

    def test_empty_seeds_usage_error(self, runner, tmp_path):
        res = runner.invoke(main, ["benchmark", "--methods", "bh", "--seeds",
                                   "", "--out-dir", str(tmp_path / "b")])
        assert res.exit_code == 2

    def test_unknown_method_usage_error(self, runner, tmp_path):
        res = runner.invoke(main, ["benchmark", "--methods", "magic",
                                   "--seeds", "0", "--out-dir",
                                   str(tmp_path / "b")])
        assert res.exit_code == 2

    def test_parallel_workers_same_aggregate(self, runner, tmp_path):
        args = ["benchmark", "--scenario", "N", "--methods", "bh,sbh",
                "--seeds", "0,1", "--alpha", "0.1", "--n", "500"]
        seq_dir, par_dir = tmp_path / "seq", tmp_path / "par"
        res = runner.invoke(main, args + ["--out-dir", str(seq_dir)],
                            env={"FDRKIT_THREADS": "1"})
        assert res.exit_code == 0, res.output
        res = runner.invoke(main, args + ["--out-dir", str(par_dir)],
                            env={"FDRKIT_THREADS": "4"})
        assert res.exit_code == 0, res.output
        seq = json.loads((seq_dir / "aggregate.json").read_text())
        par = json.loads((par_dir / "aggregate.json").read_text())
        for agg in (seq, par):  # wall time legitimately differs
            for stats in agg["methods"].values():
                stats.pop("mean_seconds")
        assert seq["methods"] == par["methods"]
        assert (seq_dir / "per_seed.csv").read_text().splitlines()[0] == \
            (par_dir / "per_seed.csv").read_text().splitlines()[0]

    def test_histogram_splits_by_truth(self, runner, tmp_path):
        out_dir = tmp_path / "bench2"
        res = runner.invoke(main, ["benchmark", "--scenario", "A", "--methods",
                                   "bh,sbh", "--seeds", "0,1", "--alpha",
                                   "0.1", "--n", "600", "--out-dir",
                                   str(out_dir)])
        assert res.exit_code == 0, res.output
        lines = (out_dir / "hist_sbh.csv").read_text().strip().splitlines()
        assert lines[0] == ("bin_left,bin_right,rejected_null,rejected_alt,"
                            "accepted_null,accepted_alt")
        total = sum(sum(int(v) for v in ln.split(",")[2:]) for ln in lines[1:])
        assert total == 2 * 600  # two seeds pooled


class TestReport:
    def test_renders_table(self, runner, tmp_path):
        out_dir = tmp_path / "bench"
        res = runner.invoke(main, ["benchmark", "--scenario", "N", "--methods",
                                   "bh", "--seeds", "0", "--n", "500",
                                   "--out-dir", str(out_dir)])
        assert res.exit_code == 0, res.output
        res = runner.invoke(main, ["report", "--in", str(out_dir)])
        assert res.exit_code == 0, res.output
        assert "bh" in res.output and "power" in res.output

    def test_missing_aggregate(self, runner, tmp_path):
        res = runner.invoke(main, ["report", "--in", str(tmp_path)])
        assert res.exit_code == 2
