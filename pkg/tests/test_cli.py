"""Command-line interface: outputs, exit codes, and re-run determinism."""
import numpy as np
import pytest

from lrkf.cli import main
from lrkf.harness import GaussianStream, builtin_model
from lrkf.io import read_discrete_model, read_matrix, write_matrix, write_model
from lrkf.model import lift


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestDiscretize:
    def test_round_trip(self, tmp_path):
        out = tmp_path / "lifted"
        assert main(["discretize", "--model", "builtin:unstable10", "--out", str(out)]) == 0
        dm = read_discrete_model(out)
        ref = lift(builtin_model("unstable10"))
        assert np.array_equal(dm.A_d, ref.A_d)
        assert dm.h == ref.h

    def test_model_directory_input(self, tmp_path):
        model_dir = tmp_path / "model"
        write_model(model_dir, builtin_model("unstable10"))
        out = tmp_path / "lifted"
        assert main(["discretize", "--model", str(model_dir), "--out", str(out)]) == 0


class TestDiagnose:
    def test_prints_min_rank(self, capsys, tmp_path):
        report = tmp_path / "report.txt"
        assert main(["diagnose", "--model", "builtin:unstable10", "--out", str(report)]) == 0
        printed = capsys.readouterr().out
        assert "hurwitz_unstable_count=6" in printed
        assert "min_admissible_rank=6" in printed
        assert report.read_text() == printed


class TestOja:
    def test_residual_trace_and_frame(self, tmp_path):
        out = tmp_path / "residuals.csv"
        frame = tmp_path / "frame.csv"
        code = main([
            "oja", "--model", "builtin:unstable10", "--rank", "6",
            "--epsilon", "0.01", "--substeps", "8", "--tol", "1e-9",
            "--out", str(out), "--frame", str(frame),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "step,residual,max_angle"
        last = lines[-1].split(",")
        assert float(last[1]) < 1e-9
        assert float(last[2]) < 1e-6
        u = read_matrix(frame)
        assert u.shape == (10, 6)
        assert (tmp_path / "residuals.png").exists()


class TestFilter:
    def test_outputs_and_determinism(self, tmp_path):
        args = [
            "filter", "--model", "builtin:unstable10", "--mode", "both",
            "--steps", "80", "--rank", "6", "--epsilon", "0.01", "--substeps", "8",
            "--seed", "42",
        ]
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        for suffix in ("_kf.csv", "_lkf.csv", "_kf_states.csv", "_lkf_states.csv", "_traces.png"):
            b1 = read_bytes(str(out1) + suffix)
            b2 = read_bytes(str(out2) + suffix)
            assert b1 == b2, f"re-run changed {suffix}"

    def test_observation_file_input(self, tmp_path):
        obs = GaussianStream(5).normals((12, 4))
        obs_path = tmp_path / "obs.csv"
        write_matrix(obs_path, obs)
        out = tmp_path / "run"
        code = main([
            "filter", "--model", "builtin:unstable10", "--mode", "kf",
            "--obs", str(obs_path), "--out", str(out), "--no-plot",
        ])
        assert code == 0
        lines = (tmp_path / "run_kf.csv").read_text().splitlines()
        assert len(lines) == 13
        assert lines[1].split(",")[2] == "nan"  # no ground truth available

    def test_divergent_rank_exit_code(self, tmp_path):
        code = main([
            "filter", "--model", "builtin:unstable10", "--mode", "lkf",
            "--steps", "6000", "--rank", "5", "--epsilon", "0.01", "--substeps", "8",
            "--out", str(tmp_path / "run"), "--no-plot",
        ])
        assert code == 4

    def test_steps_required_without_observations(self, tmp_path):
        code = main([
            "filter", "--model", "builtin:unstable10", "--mode", "kf",
            "--out", str(tmp_path / "run"), "--no-plot",
        ])
        assert code == 2


class TestSteady:
    def test_report(self, capsys, tmp_path):
        report = tmp_path / "steady.txt"
        code = main([
            "steady", "--model", "builtin:unstable10", "--rank", "6",
            "--out", str(report),
        ])
        assert code == 0
        text = capsys.readouterr().out
        assert "verdict=stable" in text
        assert "closed_loop_radius=" in text
        radius = float(
            [line for line in text.splitlines() if line.startswith("closed_loop_radius")][0]
            .split("=")[1]
        )
        assert radius < 1.0
        assert (tmp_path / "steady.png").exists()

    def test_numerical_failure_exit_code(self, tmp_path):
        # unobservable plant: the steady-state computation must refuse
        model_dir = tmp_path / "model"
        from lrkf.model import ContinuousModel

        bad = ContinuousModel(
            A=np.diag([1.0, 1.0]), G=np.eye(2), C=np.array([[1.0, 1.0]]),
            H=np.eye(1), h=0.1,
        )
        write_model(model_dir, bad)
        code = main(["steady", "--model", str(model_dir), "--rank", "1", "--no-plot"])
        assert code == 3


class TestSweepRank:
    def test_ratio_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep-rank", "--model", "builtin:symmetric20", "--ranks", "10,14,20",
            "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "r,trace_ratio,stable"
        ratios = [float(line.split(",")[1]) for line in lines[1:]]
        assert ratios == sorted(ratios, reverse=True)
        assert (tmp_path / "sweep.png").exists()

    def test_range_spec(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep-rank", "--model", "builtin:symmetric20", "--ranks", "18:20",
            "--out", str(out), "--no-plot",
        ])
        assert code == 0
        assert len(out.read_text().splitlines()) == 4


class TestComplexity:
    def test_boundary_outputs(self, tmp_path):
        out = tmp_path / "boundary"
        code = main([
            "complexity", "--p", "10,40", "--s", "4", "--n-grid", "10:1000:5",
            "--out", str(out),
        ])
        assert code == 0
        for p in (10, 40):
            lines = (tmp_path / f"boundary_p{p}.csv").read_text().splitlines()
            assert lines[0] == "n,r_star,flops_kf,flops_lkf_at_rstar"
        assert (tmp_path / "boundary.png").exists()

    def test_rerun_byte_identical(self, tmp_path):
        args = ["complexity", "--p", "10", "--s", "4", "--n-grid", "10:100:4"]
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert read_bytes(f"{out1}_p10.csv") == read_bytes(f"{out2}_p10.csv")
        assert read_bytes(f"{out1}.png") == read_bytes(f"{out2}.png")


class TestBadInput:
    def test_unknown_model_path(self, tmp_path):
        code = main(["diagnose", "--model", str(tmp_path / "missing")])
        assert code == 2

    def test_unknown_builtin(self):
        assert main(["diagnose", "--model", "builtin:nope"]) == 2

    def test_missing_out(self):
        assert main(["discretize", "--model", "builtin:unstable10"]) == 2

    def test_unknown_format_rejected(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["diagnose", "--model", "builtin:unstable10", "--format", "json"])
        assert excinfo.value.code == 2
