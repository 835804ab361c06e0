"""File formats: matrix CSV container, model bundles, and experiment CSVs.

Matrix container: first line ``# rows cols``, then one comma-separated row
per line, floats written with 17 significant digits so round-trips are exact
and re-runs are byte-identical.

A continuous model bundle is a directory holding ``A.csv``, ``G.csv``,
``C.csv``, ``H.csv`` and a key-value text file ``meta`` with ``h=<value>``.
A lifted bundle holds ``A_d.csv``, ``G_d.csv``, ``C.csv``, ``M.csv`` and the
same ``meta``.
"""
from __future__ import annotations

import os
from typing import Iterable, Mapping, Sequence

import numpy as np

from .complexity import BoundaryPoint
from .model import ContinuousModel, DiscreteModel

FLOAT_FMT = "{:.17g}"


def _fmt(x: float) -> str:
    return FLOAT_FMT.format(float(x))


def write_matrix(path: str, m) -> None:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# {a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_matrix(path: str) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# rows cols' header")
        try:
            rows, cols = (int(tok) for tok in header[1:].split())
        except Exception as exc:
            raise ValueError(f"{path}: malformed header {header!r}") from exc
        data = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data.append([float(tok) for tok in line.split(",")])
    a = np.asarray(data, dtype=float)
    if a.shape != (rows, cols):
        raise ValueError(f"{path}: header says {rows}x{cols}, found {a.shape}")
    return a


def _write_meta(path: str, entries: Mapping[str, str]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for key, val in entries.items():
            fh.write(f"{key}={val}\n")


def _read_meta(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: malformed meta line {line!r}")
            key, val = line.split("=", 1)
            entries[key.strip()] = val.strip()
    return entries


def write_model(directory: str, model: ContinuousModel) -> None:
    os.makedirs(directory, exist_ok=True)
    write_matrix(os.path.join(directory, "A.csv"), model.A)
    write_matrix(os.path.join(directory, "G.csv"), model.G)
    write_matrix(os.path.join(directory, "C.csv"), model.C)
    write_matrix(os.path.join(directory, "H.csv"), model.H)
    _write_meta(os.path.join(directory, "meta"), {"h": _fmt(model.h)})


def read_model(directory: str) -> ContinuousModel:
    meta = _read_meta(os.path.join(directory, "meta"))
    if "h" not in meta:
        raise ValueError(f"{directory}/meta: missing required key 'h'")
    return ContinuousModel(
        A=read_matrix(os.path.join(directory, "A.csv")),
        G=read_matrix(os.path.join(directory, "G.csv")),
        C=read_matrix(os.path.join(directory, "C.csv")),
        H=read_matrix(os.path.join(directory, "H.csv")),
        h=float(meta["h"]),
    )


def write_discrete_model(directory: str, dm: DiscreteModel) -> None:
    os.makedirs(directory, exist_ok=True)
    write_matrix(os.path.join(directory, "A_d.csv"), dm.A_d)
    write_matrix(os.path.join(directory, "G_d.csv"), dm.G_d)
    write_matrix(os.path.join(directory, "C.csv"), dm.C)
    write_matrix(os.path.join(directory, "M.csv"), dm.M)
    meta = {"kind": "discrete"}
    if dm.h is not None:
        meta["h"] = _fmt(dm.h)
    _write_meta(os.path.join(directory, "meta"), meta)


def read_discrete_model(directory: str) -> DiscreteModel:
    meta = _read_meta(os.path.join(directory, "meta"))
    h = float(meta["h"]) if "h" in meta else None
    return DiscreteModel(
        A_d=read_matrix(os.path.join(directory, "A_d.csv")),
        G_d=read_matrix(os.path.join(directory, "G_d.csv")),
        C=read_matrix(os.path.join(directory, "C.csv")),
        M=read_matrix(os.path.join(directory, "M.csv")),
        h=h,
    )


def write_trace_csv(path: str, records: Iterable) -> None:
    """Per-step trace records: header ``k,trace,emp_mse``."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("k,trace,emp_mse\n")
        for rec in records:
            fh.write(f"{rec.k},{_fmt(rec.trace)},{_fmt(rec.emp_sq_err)}\n")


def write_ratio_csv(path: str, entries: Iterable) -> None:
    """Rank-sweep results: header ``r,trace_ratio,stable``."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("r,trace_ratio,stable\n")
        for e in entries:
            ratio = _fmt(e.trace_ratio) if e.trace_ratio is not None else "nan"
            fh.write(f"{e.rank},{ratio},{'true' if e.stable else 'false'}\n")


def write_boundary_csv(path: str, points: Sequence[BoundaryPoint]) -> None:
    """Crossover boundary: header ``n,r_star,flops_kf,flops_lkf_at_rstar``."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("n,r_star,flops_kf,flops_lkf_at_rstar\n")
        for pt in points:
            fh.write(
                f"{pt.n},{pt.r_star},{_fmt(pt.flops_kf)},{_fmt(pt.flops_lkf_at_rstar)}\n"
            )


def write_residual_csv(path: str, rows: Iterable[tuple[int, float, float]]) -> None:
    """Subspace-tracking trace: header ``step,residual,max_angle``."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("step,residual,max_angle\n")
        for step, residual, angle in rows:
            fh.write(f"{step},{_fmt(residual)},{_fmt(angle)}\n")
