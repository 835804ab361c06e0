"""File formats: exact round-trips and format contracts."""
import numpy as np
import pytest

from lrkf.complexity import boundary_curve
from lrkf.harness import RankSweepEntry, StepRecord
from lrkf.io import (
    read_discrete_model,
    read_matrix,
    read_model,
    write_boundary_csv,
    write_discrete_model,
    write_matrix,
    write_model,
    write_ratio_csv,
    write_residual_csv,
    write_trace_csv,
)


class TestMatrixContainer:
    def test_round_trip_is_exact(self, tmp_path, rng):
        m = rng.standard_normal((7, 3)) * np.logspace(-12, 12, 3)
        path = tmp_path / "m.csv"
        write_matrix(path, m)
        assert np.array_equal(read_matrix(path), m)  # 17 significant digits round-trip

    def test_header_format(self, tmp_path):
        path = tmp_path / "m.csv"
        write_matrix(path, np.eye(2))
        first = path.read_text().splitlines()[0]
        assert first == "# 2 2"

    def test_rejects_missing_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n")
        with pytest.raises(ValueError, match="header"):
            read_matrix(path)

    def test_rejects_shape_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# 2 2\n1.0,2.0\n")
        with pytest.raises(ValueError, match="header says"):
            read_matrix(path)

    def test_vector_written_as_row(self, tmp_path):
        path = tmp_path / "v.csv"
        write_matrix(path, np.array([1.0, 2.0, 3.0]))
        assert read_matrix(path).shape == (1, 3)


class TestModelBundles:
    def test_continuous_round_trip(self, tmp_path, unstable10):
        write_model(tmp_path / "model", unstable10)
        back = read_model(tmp_path / "model")
        assert np.array_equal(back.A, unstable10.A)
        assert np.array_equal(back.G, unstable10.G)
        assert np.array_equal(back.C, unstable10.C)
        assert np.array_equal(back.H, unstable10.H)
        assert back.h == unstable10.h

    def test_discrete_round_trip(self, tmp_path, unstable10_lifted):
        write_discrete_model(tmp_path / "dm", unstable10_lifted)
        back = read_discrete_model(tmp_path / "dm")
        assert np.array_equal(back.A_d, unstable10_lifted.A_d)
        assert np.array_equal(back.G_d, unstable10_lifted.G_d)
        assert back.h == unstable10_lifted.h

    def test_missing_meta_key(self, tmp_path, unstable10):
        write_model(tmp_path / "model", unstable10)
        (tmp_path / "model" / "meta").write_text("label=demo\n")
        with pytest.raises(ValueError, match="'h'"):
            read_model(tmp_path / "model")


class TestRecordWriters:
    def test_trace_csv(self, tmp_path):
        recs = [StepRecord(k=0, trace=1.5, emp_sq_err=2.0), StepRecord(k=1, trace=1.25, emp_sq_err=float("nan"))]
        path = tmp_path / "trace.csv"
        write_trace_csv(path, recs)
        lines = path.read_text().splitlines()
        assert lines[0] == "k,trace,emp_mse"
        assert lines[1] == "0,1.5,2"
        assert lines[2].startswith("1,1.25,nan")

    def test_ratio_csv(self, tmp_path):
        entries = [
            RankSweepEntry(rank=6, trace_ratio=1.25, stable=True),
            RankSweepEntry(rank=7, trace_ratio=None, stable=False, skipped_reason="gap"),
        ]
        path = tmp_path / "ratio.csv"
        write_ratio_csv(path, entries)
        lines = path.read_text().splitlines()
        assert lines[0] == "r,trace_ratio,stable"
        assert lines[1] == "6,1.25,true"
        assert lines[2] == "7,nan,false"

    def test_boundary_csv(self, tmp_path):
        points = boundary_curve(10, 4, [100, 1000])
        path = tmp_path / "boundary.csv"
        write_boundary_csv(path, points)
        lines = path.read_text().splitlines()
        assert lines[0] == "n,r_star,flops_kf,flops_lkf_at_rstar"
        assert len(lines) == 3

    def test_residual_csv(self, tmp_path):
        path = tmp_path / "residual.csv"
        write_residual_csv(path, [(1, 0.5, 0.25), (2, 0.125, 0.0625)])
        lines = path.read_text().splitlines()
        assert lines[0] == "step,residual,max_angle"
        assert lines[1] == "1,0.5,0.25"
