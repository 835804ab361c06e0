"""Figure rendering for the experiment CLIs.

Each report command writes a figure next to its delimited output.  The Agg
backend is forced so rendering works headless, and figures carry no
timestamps so re-runs stay byte-identical.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

_DPI = 150


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_trace_figure(path: str, runs: Mapping[str, Sequence]) -> None:
    """Error-covariance trace evolution, one curve per filter mode."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, records in runs.items():
        ks = [rec.k for rec in records]
        traces = [rec.trace for rec in records]
        ax.semilogy(ks, traces, label=label)
    ax.set_xlabel("step k")
    ax.set_ylabel("one-step-ahead error covariance trace")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def save_ratio_figure(path: str, entries: Sequence) -> None:
    """Steady error trace relative to the full filter versus rank."""
    ranks = [e.rank for e in entries if e.trace_ratio is not None]
    ratios = [e.trace_ratio for e in entries if e.trace_ratio is not None]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(ranks, ratios, marker="o")
    ax.axhline(1.0, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("filter rank r")
    ax.set_ylabel("steady trace ratio vs full filter")
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def save_boundary_figure(path: str, curves: Mapping[int, Sequence], s: int) -> None:
    """Crossover-rank boundary curves, one per output dimension."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for p, points in sorted(curves.items()):
        ns = [pt.n for pt in points]
        rs = [pt.r_star for pt in points]
        ax.loglog(ns, np.maximum(rs, 1), label=f"p = {p}")
    ax.set_xlabel("state dimension n")
    ax.set_ylabel("largest advantageous rank r*")
    ax.set_title(f"low-rank filter cheaper below each curve's rank (s = {s})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def save_residual_figure(path: str, rows: Sequence[tuple[int, float, float]]) -> None:
    """Subspace-tracking convergence: residual and angle to the target subspace."""
    steps = [row[0] for row in rows]
    residuals = [max(row[1], 1e-18) for row in rows]
    angles = [max(row[2], 1e-18) for row in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.semilogy(steps, residuals, label="equilibrium residual")
    ax.semilogy(steps, angles, label="max principal angle")
    ax.set_xlabel("interval")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def save_spectrum_figure(path: str, eigenvalues: np.ndarray) -> None:
    """Closed-loop eigenvalues against the unit circle."""
    theta = np.linspace(0, 2 * np.pi, 400)
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    ax.plot(np.cos(theta), np.sin(theta), color="gray", linewidth=1)
    ax.scatter(eigenvalues.real, eigenvalues.imag, marker="x", color="C3")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    _save(fig, path)
