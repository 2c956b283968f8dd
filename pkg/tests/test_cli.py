import csv
import io
import json
import subprocess
import sys

import pytest

from photoncert import __version__
from photoncert.cli import EXIT_DATA, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def last_positive(csv_rows):
    pos = [float(r["distance_km"]) for r in csv_rows if float(r["R"]) > 0]
    return max(pos) if pos else None


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    path = tmp_path_factory.mktemp("sim") / "poisson.txt"
    assert main(["simulate", "--source", "poisson:0.42", "--pulses", "1000000",
                 "--efficiency", "0.005", "--seed", "7", "--out", str(path)]) == 0
    return path


class TestSimulate:
    def test_line_count(self, simulated):
        with open(simulated, "rb") as fh:
            assert sum(1 for _ in fh) == 1_000_000

    def test_byte_identical_rerun(self, simulated, tmp_path, capsys):
        again = tmp_path / "again.txt"
        code, out, _ = run(["simulate", "--source", "poisson:0.42", "--pulses", 1000000,
                            "--efficiency", 0.005, "--seed", 7, "--out", again], capsys)
        assert code == EXIT_OK
        assert again.read_bytes() == simulated.read_bytes()
        assert json.loads(out)["records"] == 1_000_000

    def test_metadata_sidecar(self, simulated):
        meta = json.loads(simulated.with_name(simulated.name + ".meta.json").read_text())
        assert meta["version"] == __version__
        assert meta["config"]["seed"] == 7 and meta["config"]["eta0_cap"] == 0.01

    def test_efficiency_above_cap(self, tmp_path, capsys):
        code, _, err = run(["simulate", "--source", "poisson:0.42", "--pulses", 10,
                            "--efficiency", 0.05, "--out", tmp_path / "x.txt"], capsys)
        assert code == EXIT_VALIDATION and "efficiency" in err

    def test_refuses_overwrite(self, tmp_path, capsys):
        out = tmp_path / "x.txt"
        argv = ["simulate", "--source", "single", "--pulses", 10, "--out", out]
        assert run(argv, capsys)[0] == EXIT_OK
        assert run(argv, capsys)[0] == EXIT_IO
        assert run(argv + ["--force"], capsys)[0] == EXIT_OK

    def test_bad_source(self, tmp_path, capsys):
        code, _, _ = run(["simulate", "--source", "laser:1", "--out", tmp_path / "x"], capsys)
        assert code == EXIT_VALIDATION


class TestEstimate:
    def test_pipeline_consistency(self, tmp_path, capsys):
        path = tmp_path / "bright.txt"
        assert run(["simulate", "--source", "poisson:5", "--pulses", 1000000, "--efficiency", 0.01,
                    "--seed", 11, "--out", path], capsys)[0] == EXIT_OK
        code, out, _ = run(["estimate", path], capsys)
        assert code == EXIT_OK
        report = json.loads(out)
        g2 = report["correlations"]["2"]
        assert abs(g2["value"] - 1) <= 5 * g2["sigma"]
        assert report["n_pulses"] == 1_000_000
        assert report["metadata"]["command"] == "estimate"

    def test_dim_source_reports_missing_orders(self, simulated, capsys):
        code, out, _ = run(["estimate", simulated], capsys)
        report = json.loads(out)
        assert code == EXIT_OK
        assert {m["order"] for m in report["insufficient"]} >= {3, 4}

    def test_empty_file(self, tmp_path, capsys):
        path = tmp_path / "empty.txt"
        path.write_bytes(b"")
        code, _, err = run(["estimate", path], capsys)
        assert code == EXIT_DATA and "empty" in err

    def test_malformed_line(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_bytes(b"12 01x1\n")
        code, _, err = run(["estimate", path], capsys)
        assert code == EXIT_DATA and "line 1" in err

    def test_missing_file(self, tmp_path, capsys):
        assert run(["estimate", tmp_path / "nope.txt"], capsys)[0] == EXIT_IO

    def test_no_pairs(self, tmp_path, capsys):
        path = tmp_path / "lonely.txt"
        path.write_bytes(b"0 1000\n1 0100\n2 0010\n3 0001\n")
        assert run(["estimate", path], capsys)[0] == EXIT_DATA


class TestBound:
    def test_g2_only_preset(self, capsys):
        code, out, _ = run(["bound", "--preset", "paper-above-threshold", "--mu", 0.42, "--orders", 2], capsys)
        doc = json.loads(out)
        assert code == EXIT_OK
        lo, hi = doc["bounds"]["1"]
        assert lo == pytest.approx(0.2411, abs=0.005) and hi == pytest.approx(0.4203, abs=0.005)
        assert doc["assumptions"] == {"mass_below_n_cut_at_least": 0.5}
        assert doc["metadata"]["version"] == __version__

    def test_low_mu_preset(self, capsys):
        code, out, _ = run(["bound", "--preset", "paper-above-threshold", "--mu", 0.1, "--orders", "2,3,4"], capsys)
        lo, hi = json.loads(out)["bounds"]["0"]
        assert lo == pytest.approx(0.905, abs=0.002) and hi == pytest.approx(0.905, abs=0.002)

    def test_infeasible_alarm(self, capsys):
        code, _, err = run(["bound", "--g2", "0.0,0.0001", "--mu", 1.5], capsys)
        assert code == EXIT_INFEASIBLE and "calibration" in err

    def test_report_input(self, tmp_path, capsys):
        report = tmp_path / "r.json"
        report.write_text(json.dumps({"correlations": {"2": {"value": 1.0041, "sigma": 0.0039}}}))
        out_path = tmp_path / "b.json"
        assert run(["bound", "--report", report, "--mu", 0.42, "--out", out_path], capsys)[0] == EXIT_OK
        assert json.loads(out_path.read_text())["orders"] == [2]

    def test_conflicting_inputs(self, capsys):
        code, _, _ = run(["bound", "--preset", "paper-above-threshold", "--g2", "1,0.1", "--mu", 0.42], capsys)
        assert code == EXIT_VALIDATION

    def test_bad_order_set(self, capsys):
        code, _, _ = run(["bound", "--preset", "paper-above-threshold", "--mu", 0.42, "--orders", "2,4"], capsys)
        assert code == EXIT_VALIDATION

    def test_config_file_with_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"preset": "paper-above-threshold", "mu": 0.1, "orders": "2,3,4"}))
        _, out, _ = run(["bound", "--config", cfg], capsys)
        assert json.loads(out)["mu"] == 0.1
        _, out, _ = run(["bound", "--config", cfg, "--mu", 0.42], capsys)
        assert json.loads(out)["mu"] == 0.42

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"mu": 0.1, "colour": "blue"}))
        assert run(["bound", "--config", cfg, "--preset", "paper-above-threshold"], capsys)[0] == EXIT_VALIDATION

    def test_usage_error_exit_code(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bound"])
        assert exc.value.code == EXIT_VALIDATION


class TestKeyrate:
    def test_grid_rows(self, capsys):
        code, out, err = run(["keyrate", "--preset", "paper-above-threshold", "--orders", "2,3,4",
                              "--grid", "0:100:5"], capsys)
        assert code == EXIT_OK
        assert len(rows(out)) == 21
        meta = json.loads(err)
        assert meta["scan"]["channel"]["alpha_db_per_km"] == 0.2

    def test_reference_dominates_files(self, tmp_path, capsys):
        ideal, full = tmp_path / "ideal.csv", tmp_path / "g234.csv"
        assert run(["keyrate", "--ideal", "--out", ideal], capsys)[0] == EXIT_OK
        assert run(["keyrate", "--preset", "paper-above-threshold", "--out", full], capsys)[0] == EXIT_OK
        for a, b in zip(rows(ideal.read_text()), rows(full.read_text())):
            assert a["distance_km"] == b["distance_km"]
            assert float(b["R"]) <= float(a["R"]) + 1e-12
        assert json.loads((tmp_path / "g234.csv.meta.json").read_text())["command"] == "keyrate"

    def test_quasi_thermal_range(self, capsys):
        code, out, _ = run(["keyrate", "--preset", "paper-below-threshold"], capsys)
        assert code == EXIT_OK
        assert last_positive(rows(out)) >= 30

    def test_deterministic(self, capsys):
        argv = ["keyrate", "--preset", "paper-above-threshold", "--orders", "2,3", "--workers", 3]
        assert run(argv, capsys)[1] == run(argv, capsys)[1]


def test_pipeline(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out, _ = run(["pipeline", "--source", "poisson:5", "--pulses", 1000000, "--efficiency", 0.01,
                        "--seed", 3, "--grid", "0:20:10", "--out-dir", out_dir], capsys)
    assert code == EXIT_OK
    cert = json.loads((out_dir / "certificate.json").read_text())
    assert [y["distance_km"] for y in cert["yields"]] == [0.0, 10.0, 20.0]
    assert set(cert["yields"][0]) == {"distance_km", "y0_lower", "y1_lower", "e1_upper", "e1_clamped"}
    assert cert["mu"] == 5.0
    assert len(rows((out_dir / "keyrate.csv").read_text())) == 3
    assert json.loads(out)["orders"] == cert["orders"]


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "photoncert", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and __version__ in done.stdout
