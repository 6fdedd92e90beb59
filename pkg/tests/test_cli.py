import json
import subprocess
import sys

import numpy as np
import pytest

from hddr.cli import dataset_to_csv, read_dataset_csv
from hddr.model_core import Dataset, LinkFunction
from hddr.score_test import run_test
from hddr.simulation import build_dgp_params, generate_dataset


def _run(*argv):
    return subprocess.run(
        [sys.executable, "-m", "hddr.cli", *argv],
        capture_output=True, text=True)


def _toy_csv(path, rows=None):
    lines = ["y,a,x1,x2"]
    rows = rows or [
        "1.5,1,0.3,-0.2",
        "-0.7,0,1.1,0.4",
        "0.2,1,-0.5,0.9",
        "2.1,0,0.0,-1.3",
        "-1.0,1,0.8,0.5",
        "0.9,0,-1.2,0.1",
    ]
    path.write_text("\n".join(lines + rows) + "\n")
    return path


class TestCmdTest:
    def test_smoke_on_toy_csv(self, tmp_path):
        csv_path = _toy_csv(tmp_path / "toy.csv")
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "y", "--exposure-col", "a",
                   "--method", "pmle-dr", "--k-folds", "3",
                   "--format", "json")
        assert out.returncode == 0, out.stderr
        payload = json.loads(out.stdout)
        assert payload["schema_version"] == 1
        assert np.isfinite(payload["t_n"])
        assert 0.0 <= payload["p_value"] <= 1.0

    def test_missing_column_names_it(self, tmp_path):
        csv_path = _toy_csv(tmp_path / "toy.csv")
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "outcome", "--exposure-col", "a")
        assert out.returncode == 2
        assert "outcome" in out.stderr

    def test_missing_file(self, tmp_path):
        out = _run("test", "--input-path", str(tmp_path / "nope.csv"),
                   "--outcome-col", "y", "--exposure-col", "a")
        assert out.returncode == 2
        assert "not found" in out.stderr

    def test_non_numeric_cell_reports_location(self, tmp_path):
        csv_path = _toy_csv(tmp_path / "toy.csv",
                            rows=["1.5,1,0.3,-0.2", "-0.7,0,oops,0.4",
                                  "0.2,1,-0.5,0.9"])
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "y", "--exposure-col", "a")
        assert out.returncode == 2
        assert "line 3" in out.stderr and "column 3" in out.stderr

    def test_missing_values_rejected_with_count(self, tmp_path):
        csv_path = _toy_csv(tmp_path / "toy.csv",
                            rows=["1.5,1,0.3,-0.2", "-0.7,0,,0.4",
                                  "0.2,1,-0.5,", "2.0,0,0.1,0.2"])
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "y", "--exposure-col", "a")
        assert out.returncode == 2
        assert "2 row(s)" in out.stderr

    def test_nonbinary_exposure_fails_validation(self, tmp_path):
        csv_path = _toy_csv(tmp_path / "toy.csv",
                            rows=["1.5,2,0.3,-0.2", "-0.7,0,1.0,0.4",
                                  "0.2,1,-0.5,0.9"])
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "y", "--exposure-col", "a",
                   "--method", "pmle-dr")
        assert out.returncode == 2

    def test_degenerate_outcome_is_solver_failure(self, tmp_path):
        csv_path = _toy_csv(tmp_path / "toy.csv",
                            rows=["3.0,1,0.3,-0.2", "3.0,0,1.1,0.4",
                                  "3.0,1,-0.5,0.9", "3.0,0,0.0,-1.3",
                                  "3.0,1,0.8,0.5", "3.0,0,-1.2,0.1"])
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "y", "--exposure-col", "a",
                   "--method", "pmle-dr", "--k-folds", "3")
        assert out.returncode == 3

    def test_known_propensity_requires_exactly_one_source(self, tmp_path):
        csv_path = _toy_csv(tmp_path / "toy.csv")
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "y", "--exposure-col", "a",
                   "--method", "known-propensity")
        assert out.returncode == 2

    def test_known_propensity_value(self, tmp_path):
        csv_path = _toy_csv(tmp_path / "toy.csv")
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "y", "--exposure-col", "a",
                   "--method", "known-propensity", "--propensity-value",
                   "0.5", "--k-folds", "3", "--format", "json")
        assert out.returncode == 0, out.stderr
        payload = json.loads(out.stdout)
        assert 0.0 <= payload["p_value"] <= 1.0


class TestRoundTrip:
    def test_csv_round_trip_reproduces_in_process_result(self, tmp_path):
        params = build_dgp_params(200, 200)
        d = generate_dataset(params, 31)
        csv_path = tmp_path / "sim.csv"
        dataset_to_csv(d, str(csv_path))

        d2, _ = read_dataset_csv(str(csv_path), "y", "a")
        np.testing.assert_array_equal(d.y, d2.y)
        np.testing.assert_array_equal(d.a, d2.a)
        np.testing.assert_array_equal(d.L, d2.L)

        in_process = run_test(d, "pmle_dr", k_folds=10, seed=1)
        out = _run("test", "--input-path", str(csv_path),
                   "--outcome-col", "y", "--exposure-col", "a",
                   "--method", "pmle-dr", "--format", "json")
        assert out.returncode == 0, out.stderr
        payload = json.loads(out.stdout)
        assert payload["t_n"] == in_process.t_n
        assert payload["p_value"] == in_process.p_value


class TestCmdSimulate:
    def test_single_cell_deterministic(self, tmp_path):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        for out_file in (out_a, out_b):
            out = _run("simulate", "--method", "naive-unforced",
                       "--n", "200", "--p", "200", "--reps", "3",
                       "--seed", "7", "--format", "csv",
                       "--output-path", str(out_file))
            assert out.returncode == 0, out.stderr
        assert out_a.read_text() == out_b.read_text()

    def test_zero_reps_usage_error(self):
        out = _run("simulate", "--reps", "0")
        assert out.returncode == 2

    def test_n_without_p_rejected(self):
        out = _run("simulate", "--n", "200", "--reps", "2")
        assert out.returncode == 2

    def test_json_format_schema(self, tmp_path):
        out = _run("simulate", "--method", "naive-unforced", "--n", "200",
                   "--p", "200", "--reps", "2", "--seed", "3",
                   "--format", "json")
        assert out.returncode == 0, out.stderr
        payload = json.loads(out.stdout)
        assert payload["schema_version"] == 1
        row = payload["rows"][0]
        assert row["method"] == "naive_unforced"
        assert 0.0 <= row["rejection_rate"] <= 1.0
        assert row["reps"] == 2

    def test_progress_goes_to_stderr_only(self, tmp_path):
        out = _run("simulate", "--method", "pds-cv", "--n", "200",
                   "--p", "200", "--reps", "2", "--seed", "5",
                   "--format", "csv")
        assert out.returncode == 0
        assert out.stdout.startswith("n,p,outcome_model,method")
