import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from pesinlab.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(args, tmp_path, sub="out"):
    out = tmp_path / sub
    code = main(args + ["--out", str(out)])
    return code, out


class TestExitCodes:
    def test_validate_example1(self, tmp_path):
        code, out = run(["validate", "--config", str(CONFIGS / "example1.json")], tmp_path)
        assert code == 0
        row = json.loads((out / "validate.json").read_text())["rows"][0]
        assert row["degree"] == 3 and row["lambda"] == 2.0 and row["gap_residual"] == 0.0

    def test_infeasible_inner_set(self, tmp_path, capsys):
        code, _ = run(["validate", "--config", str(CONFIGS / "example2_infeasible.json")], tmp_path)
        assert code == 2
        assert "ParamsInfeasible" in capsys.readouterr().err

    def test_glue_failure(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"map": {"kind": "example2", "b0": 0.6, "c1": 0.5, "b1": 0.45}})
        assert run(["validate", "--config", cfg], tmp_path)[0] == 2
        assert "GlueRatioError" in capsys.readouterr().err

    def test_infeasible_k(self, tmp_path):
        cfg = write_cfg(tmp_path, {"map": {"kind": "example1", "k": 1}})
        assert run(["cantor-report", "--config", cfg], tmp_path)[0] == 2

    @pytest.mark.parametrize("cfg", [
        {"map": {"kind": "doubling"}, "extra": 1},
        {"measures": []},
        {"map": {"kind": "doubling"}, "rng": {"seed": -3}},
        {"map": {"kind": "doubling"}, "workers": 0},
        {"map": {"kind": "doubling"}, "experiment": {"times": [10, 5]}},
    ])
    def test_config_errors(self, tmp_path, cfg):
        sub = "basin-scan" if "experiment" in cfg else "validate"
        assert run([sub, "--config", write_cfg(tmp_path, cfg)], tmp_path)[0] == 2

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert run(["validate", "--config", str(p)], tmp_path)[0] == 2

    def test_missing_file(self, tmp_path):
        assert run(["validate", "--config", str(tmp_path / "nope.json")], tmp_path)[0] == 2

    def test_experiment_infeasible(self, tmp_path):
        cfg = write_cfg(tmp_path, {"map": {"kind": "example1", "N": 10},
                                   "experiment": {"generations": 12}})
        assert run(["distortion", "--config", cfg], tmp_path)[0] == 3


class TestOutputs:
    def test_cantor_report_csv(self, tmp_path):
        code, out = run(["cantor-report", "--config", str(CONFIGS / "example1.json")], tmp_path)
        assert code == 0
        rows = list(csv.DictReader((out / "cantor_report.csv").open()))
        assert rows[0]["L_n"] == "0.75"
        assert float(rows[-1]["m_A_n"]) > 1.088
        assert (out / "cantor_report.csv").read_bytes().count(b"\r") == 0

    def test_pesin_check_torus(self, tmp_path):
        code, out = run(["pesin-check", "--config", str(CONFIGS / "torus.json")], tmp_path)
        assert code == 0
        rows = json.loads((out / "pesin_check.json").read_text())["rows"]
        mu = [r for r in rows if r["measure"].startswith("mu_")]
        assert len(mu) == 2
        assert all(r["h_final"] == math.log(4) and abs(r["defect"]) <= 1e-9 for r in mu)
        dirac = [r for r in rows if r["measure"].startswith("dirac")][0]
        assert dirac["defect"] == pytest.approx(2 * math.log(2))

    def test_floats_round_trip(self, tmp_path):
        code, out = run(["distortion", "--config", str(CONFIGS / "example1.json")], tmp_path)
        data = json.loads((out / "distortion.json").read_text())
        rows = list(csv.DictReader((out / "distortion.csv").open()))
        for r, c in zip(data["rows"], rows):
            assert float(c["m_A_n"]) == r["m_A_n"]
            assert c["m_A_n"] == repr(r["m_A_n"])

    def test_json_only(self, tmp_path):
        code, out = run(["validate", "--config", str(CONFIGS / "example2.json"), "--format", "json"],
                        tmp_path)
        assert code == 0 and sorted(p.name for p in out.iterdir()) == ["validate.json"]


class TestSeeds:
    def seed_of(self, tmp_path, extra, sub):
        cfg = write_cfg(tmp_path, {"map": {"kind": "doubling"}, "rng": {"seed": 7},
                                   "experiment": {"times": [5], "epsilons": [0.1], "n_points": 50}})
        code, out = run(["basin-scan", "--config", cfg, "--format", "json"] + extra, tmp_path, sub)
        assert code == 0
        return json.loads((out / "basin_scan.json").read_text())["seed"]

    def test_precedence(self, tmp_path, monkeypatch):
        monkeypatch.delenv("PESINLAB_SEED", raising=False)
        assert self.seed_of(tmp_path, [], "a") == 7
        monkeypatch.setenv("PESINLAB_SEED", "11")
        assert self.seed_of(tmp_path, [], "b") == 11
        assert self.seed_of(tmp_path, ["--seed", "13"], "c") == 13

    def test_bad_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PESINLAB_SEED", "abc")
        cfg = write_cfg(tmp_path, {"map": {"kind": "doubling"}})
        assert run(["validate", "--config", cfg], tmp_path)[0] == 2


class TestDeterminism:
    CFG = {"map": {"kind": "example1"},
           "experiment": {"candidates": [{"kind": "lebesgue"}, {"kind": "mu_K"}],
                          "times": [10, 50], "epsilons": [0.05, 0.1], "n_points": 600, "block": 100},
           "rng": {"seed": 42}}

    def test_basin_scan_worker_counts(self, tmp_path):
        cfg = write_cfg(tmp_path, self.CFG)
        outs = [run(["basin-scan", "--config", cfg, "--workers", str(w)], tmp_path, f"w{w}")
                for w in (1, 3)]
        assert all(code == 0 for code, _ in outs)
        for name in ("basin_scan.csv", "basin_scan.json"):
            assert (outs[0][1] / name).read_bytes() == (outs[1][1] / name).read_bytes()

    def test_seed_changes_results(self, tmp_path):
        cfg = write_cfg(tmp_path, self.CFG)
        _, a = run(["basin-scan", "--config", cfg], tmp_path, "s1")
        _, b = run(["basin-scan", "--config", cfg, "--seed", "43"], tmp_path, "s2")
        ra = list(csv.DictReader((a / "basin_scan.csv").open()))
        rb = list(csv.DictReader((b / "basin_scan.csv").open()))
        assert list(ra[0]) == list(rb[0])
        assert ra != rb


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pesinlab.cli", "validate", "--config",
                           str(CONFIGS / "example1.json"), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "finished in" in proc.stderr and proc.stdout == ""
