import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kmsw import dataio
from kmsw.cli import main
from kmsw.datagen import DatasetSpec, generate
from kmsw.kernels import PointCloud, gaussian, median_bandwidth
from kmsw.kms import kms2


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def cloud_files(tmp_path):
    spec = DatasetSpec(kind="gauss_cov_shift", n=8, d=3, seed=12, params={"rho": 0.0})
    x, y = generate(spec)
    xp, yp = tmp_path / "x.csv", tmp_path / "y.csv"
    dataio.write_points_csv(xp, x)
    dataio.write_points_csv(yp, y)
    return str(xp), str(yp), x, y


class TestDistance:
    def test_single_point_files(self, tmp_path, capsys):
        (tmp_path / "x.csv").write_text("0.0,0.0\n")
        (tmp_path / "y.csv").write_text("1.0,0.5\n")
        code, out, _ = run_cli(
            ["distance", str(tmp_path / "x.csv"), str(tmp_path / "y.csv"), "--seed", "0"],
            capsys,
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["rank"] == 1
        assert payload["schema"] == "kmsw.distance.v1"

    def test_malformed_csv_exit2(self, tmp_path, capsys):
        (tmp_path / "x.csv").write_text("a,b\n")
        (tmp_path / "y.csv").write_text("1.0,2.0\n")
        code, _, err = run_cli(
            ["distance", str(tmp_path / "x.csv"), str(tmp_path / "y.csv")], capsys
        )
        assert code == 2
        assert json.loads(err)["error"] == "input"

    def test_duplicate_points_exit3(self, tmp_path, capsys):
        (tmp_path / "x.csv").write_text("1.0,2.0\n")
        (tmp_path / "y.csv").write_text("1.0,2.0\n")
        code, _, err = run_cli(
            ["distance", str(tmp_path / "x.csv"), str(tmp_path / "y.csv")], capsys
        )
        assert code == 3
        assert json.loads(err)["error"] == "precondition"

    def test_matches_library_and_deterministic(self, cloud_files, tmp_path, capsys):
        xp, yp, x, y = cloud_files
        args = ["distance", xp, yp, "--seed", "7", "--max-iters", "60",
                "--out", str(tmp_path / "o1.json")]
        assert main(args) == 0
        args[-1] = str(tmp_path / "o2.json")
        assert main(args) == 0
        b1 = Path(tmp_path / "o1.json").read_bytes()
        b2 = Path(tmp_path / "o2.json").read_bytes()
        assert b1 == b2
        payload = json.loads(b1)
        k = gaussian(median_bandwidth(x, y))
        res = kms2(x, y, k, seed=7, cfg_overrides={"max_iters": 60})
        assert payload["distance"] == res.distance
        assert payload["sdr_value"] == res.sdr_value

    def test_schema_valid(self, cloud_files, capsys):
        import jsonschema

        xp, yp, _, _ = cloud_files
        code, out, _ = run_cli(["distance", xp, yp, "--max-iters", "40"], capsys)
        assert code == 0
        schema = json.loads(
            Path(__file__, "../../src/kmsw/schemas/distance_result.schema.json").resolve().read_text()
        )
        jsonschema.validate(json.loads(out), schema)

    def test_sidecar_exports(self, cloud_files, tmp_path, capsys):
        xp, yp, _, _ = cloud_files
        code, _, _ = run_cli(
            ["distance", xp, yp, "--max-iters", "40", "--seed", "2",
             "--out", str(tmp_path / "r.json"),
             "--projector-out", str(tmp_path / "proj.csv"),
             "--trace-out", str(tmp_path / "trace.csv"),
             "--eigen-out", str(tmp_path / "eig.csv"),
             "--s-out", str(tmp_path / "s.bin")],
            capsys,
        )
        assert code == 0
        proj = (tmp_path / "proj.csv").read_text().splitlines()
        assert proj[0] == "coef_x,coef_y"
        assert len(proj) == 1 + 8
        trace = (tmp_path / "trace.csv").read_text().splitlines()
        assert trace[0] == "iteration,inexact_value,step_norm"
        eig = (tmp_path / "eig.csv").read_text().splitlines()
        assert eig[0] == "iteration,position,eigenvalue"
        m = dataio.read_points_bin(tmp_path / "s.bin")
        assert m.points.shape == (16, 16)


class TestTest:
    def test_bootstrap_runs_and_validates(self, cloud_files, capsys):
        import jsonschema

        xp, yp, _, _ = cloud_files
        code, out, _ = run_cli(
            ["test", xp, yp, "--permutations", "50", "--max-iters", "40", "--seed", "3"],
            capsys,
        )
        assert code == 0
        payload = json.loads(out)
        schema = json.loads(
            Path(__file__, "../../src/kmsw/schemas/test_result.schema.json").resolve().read_text()
        )
        jsonschema.validate(payload, schema)
        assert payload["reject"] == (payload["statistic"] > payload["threshold"])

    def test_theorem_mode(self, cloud_files, capsys):
        xp, yp, _, _ = cloud_files
        code, out, _ = run_cli(
            ["test", xp, yp, "--mode", "theorem", "--max-iters", "40"], capsys
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["mode"] == "theorem"
        assert payload["p_value"] is None

    def test_bad_alpha_exit1(self, cloud_files, capsys):
        xp, yp, _, _ = cloud_files
        code, _, err = run_cli(["test", xp, yp, "--alpha", "1.5"], capsys)
        assert code == 1
        assert json.loads(err)["error"] == "usage"


class TestRankcheck:
    def test_bound_column_and_table(self, tmp_path, capsys):
        out_path = tmp_path / "rank.csv"
        code, _, _ = run_cli(
            ["rankcheck", "--n-list", "6,8", "--trials", "1", "--dim", "3",
             "--max-iters", "60", "--seed", "1", "--out", str(out_path), "--threads", "1"],
            capsys,
        )
        assert code == 0
        lines = out_path.read_text().strip().splitlines()
        assert lines[0] == "n,trial,rank_before,rank_after,bound"
        rows = [ln.split(",") for ln in lines[1:]]
        assert len(rows) == 2
        for row in rows:
            assert int(row[3]) <= int(row[4])


class TestSweep:
    def test_csv_rows_and_json(self, tmp_path, capsys):
        prefix = str(tmp_path / "sw")
        code, _, _ = run_cli(
            ["sweep", "--dataset", "two_point_1d", "--sizes", "50,100,200",
             "--trials", "4", "--p", "1", "--seed", "2", "--out-prefix", prefix,
             "--threads", "1"],
            capsys,
        )
        assert code == 0
        rows = Path(prefix + ".csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 3 * 4
        payload = json.loads(Path(prefix + ".json").read_text())
        import jsonschema

        schema = json.loads(
            Path(__file__, "../../src/kmsw/schemas/sweep_summary.schema.json").resolve().read_text()
        )
        jsonschema.validate(payload, schema)
        assert payload["slope"] == pytest.approx(-0.5, abs=0.25)

    def test_single_size_exit1(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["sweep", "--dataset", "two_point_1d", "--sizes", "50",
             "--out-prefix", str(tmp_path / "s")],
            capsys,
        )
        assert code == 1


class TestGenerate:
    def test_deterministic_files(self, tmp_path, capsys):
        spec = DatasetSpec(kind="circle", n=5, seed=3)
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(spec.to_json())
        for prefix in ("a", "b"):
            code, _, _ = run_cli(
                ["generate", "--spec", str(spec_path), "--out-prefix", str(tmp_path / prefix)],
                capsys,
            )
            assert code == 0
        assert (tmp_path / "a_x.csv").read_bytes() == (tmp_path / "b_x.csv").read_bytes()
        assert (tmp_path / "a_y.csv").read_bytes() == (tmp_path / "b_y.csv").read_bytes()
        x = dataio.read_points_csv(tmp_path / "a_x.csv")
        assert x.points.shape == (5, 2)

    def test_invalid_kind_exit1_with_choices(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text('{"kind": "bogus", "n": 5, "d": 2, "seed": 0, "params": {}}')
        code, _, err = run_cli(
            ["generate", "--spec", str(spec_path), "--out-prefix", str(tmp_path / "z")],
            capsys,
        )
        assert code == 1
        msg = json.loads(err)["message"]
        assert "circle" in msg and "two_point_1d" in msg


class TestEntryPoint:
    def test_console_script_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "kmsw.cli", "--help"], capture_output=True, text=True
        )
        assert proc.returncode in (0, 1)

    def test_unknown_command_usage(self, capsys):
        code, _, err = run_cli(["frobnicate"], capsys)
        assert code == 1
