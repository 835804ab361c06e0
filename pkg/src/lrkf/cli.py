"""Command-line interface.

Subcommands: ``discretize``, ``diagnose``, ``oja``, ``filter``, ``steady``,
``sweep-rank``, ``complexity``.  Report commands write delimited output and,
unless ``--no-plot`` is given, render a figure next to it.  Exit codes:
0 ok, 2 bad input, 3 numerical failure, 4 instability detected.

``--model`` takes a model bundle directory (see :mod:`lrkf.io`) or one of
the bundled systems ``builtin:unstable10`` / ``builtin:symmetric20``.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

import numpy as np

from . import io as lio
from .complexity import boundary_curve
from .errors import DivergenceError, NumericalError
from .harness import (
    SimulationConfig,
    builtin_model,
    run_filter,
    run_rank_sweep,
)
from .kalman import kf_steady
from .lowrank import closed_loop_spectrum, lkf_steady, stability_verdict
from .model import diagnose, lift
from .numerics import dominant_invariant_subspace, principal_angles, spectral_norm
from .oja import StiefelPoint, converge, dominant_frame, reduce_model, reduction_consistency

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_INSTABILITY = 4


def _load_model(spec: str):
    if spec.startswith("builtin:"):
        return builtin_model(spec.split(":", 1)[1])
    return lio.read_model(spec)


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_rank_spec(text: str) -> list[int]:
    """Either comma-separated ranks or an inclusive 'lo:hi' range."""
    if ":" in text:
        lo, hi = (int(tok) for tok in text.split(":"))
        if hi < lo:
            raise ValueError(f"empty rank range {text!r}")
        return list(range(lo, hi + 1))
    return _parse_int_list(text)


def _parse_grid(text: str) -> list[int]:
    """Comma-separated dimensions or 'lo:hi:count' for a log-spaced grid."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid spec must be lo:hi:count, got {text!r}")
        lo, hi, count = int(parts[0]), int(parts[1]), int(parts[2])
        grid = np.unique(
            np.rint(np.logspace(np.log10(lo), np.log10(hi), count)).astype(int)
        )
        return [int(n) for n in grid if n >= 1]
    return _parse_int_list(text)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=123, help="random seed (default 123)")
    common.add_argument("--tol", type=float, default=None, help="iteration tolerance override")
    common.add_argument("--epsilon", type=float, default=None, help="subspace-flow speed parameter")
    common.add_argument("--substeps", type=int, default=None, help="Euler substeps per interval")
    common.add_argument("--out", type=str, default=None, help="output path or prefix")
    common.add_argument(
        "--format", choices=["csv"], default="csv", help="delimited output format"
    )
    common.add_argument(
        "--plot",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="render figures next to delimited output",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrkf", description=__doc__)
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", parents=[common], help="lift a model to its sampled form")
    p.add_argument("--model", required=True)

    p = sub.add_parser("diagnose", parents=[common], help="structural checks and minimum rank")
    p.add_argument("--model", required=True)

    p = sub.add_parser("oja", parents=[common], help="converge the subspace flow, trace residuals")
    p.add_argument("--model", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--max-intervals", type=int, default=100_000)
    p.add_argument("--random-start", action="store_true",
                   help="start from a seeded random frame instead of the identity block")
    p.add_argument("--frame", type=str, default=None, help="also write the converged frame here")

    p = sub.add_parser("filter", parents=[common], help="run the filters over observations")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=["kf", "lkf", "both"], default="both")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--obs", type=str, default=None, help="observations matrix CSV (steps x p)")

    p = sub.add_parser("steady", parents=[common], help="steady-state covariances and spectrum")
    p.add_argument("--model", required=True)
    p.add_argument("--rank", type=int, required=True)

    p = sub.add_parser("sweep-rank", parents=[common], help="steady trace ratio versus rank")
    p.add_argument("--model", required=True)
    p.add_argument("--ranks", required=True, help="comma list or inclusive lo:hi range")

    p = sub.add_parser("complexity", parents=[common], help="per-step cost crossover boundary")
    p.add_argument("--p", required=True, help="comma list of output dimensions")
    p.add_argument("--s", type=int, default=4, help="Euler substeps in the cost model")
    p.add_argument("--n-grid", default="10:100000:25", help="comma list or lo:hi:count log grid")

    return parser


def _require_out(args) -> str:
    if args.out is None:
        raise ValueError(f"--out is required for the {args.command} command")
    return args.out


def _cmd_discretize(args) -> int:
    model = _load_model(args.model)
    lio.write_discrete_model(_require_out(args), lift(model))
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    model = _load_model(args.model)
    diag = diagnose(model)
    lines = [
        f"observable={'yes' if diag.observable else 'no'} margin={diag.observability_margin:.6e}",
        f"reachable={'yes' if diag.reachable else 'no'} margin={diag.reachability_margin:.6e}",
        f"hurwitz_unstable_count={diag.hurwitz_unstable_count}",
        f"schur_unstable_count={diag.schur_unstable_count}",
        f"min_admissible_rank={diag.min_admissible_rank}",
    ]
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if args.out is not None:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(report)
    return EXIT_OK


def _cmd_oja(args) -> int:
    model = _load_model(args.model)
    out = _require_out(args)
    epsilon = args.epsilon if args.epsilon is not None else 1.0
    substeps = args.substeps if args.substeps is not None else 8
    tol = args.tol if args.tol is not None else 1e-8
    n, r = model.n, args.rank
    if args.random_start:
        gen = np.random.Generator(np.random.Philox(args.seed))
        u0, _ = np.linalg.qr(gen.standard_normal((n, r)))
    else:
        u0 = np.eye(n, r)
    point = StiefelPoint(U=u0, epsilon=epsilon, substeps=substeps)
    reference = dominant_invariant_subspace(model.A, r)
    rows: list[tuple[int, float, float]] = []

    def record(k, pt, res):
        rows.append((k, res, float(principal_angles(pt.U, reference).max())))

    dt = 0.9 * 0.5 * epsilon / max(spectral_norm(model.A), 1e-300)
    point, intervals = converge(
        point, model.A, interval=dt * substeps, tol=tol,
        max_intervals=args.max_intervals, callback=record,
    )
    lio.write_residual_csv(out, rows)
    if args.frame is not None:
        lio.write_matrix(args.frame, point.U)
    dm = lift(model)
    gap = reduction_consistency(point, model.A, model.h, dm)
    sys.stdout.write(
        f"converged in {intervals} intervals; residual={rows[-1][1]:.6e} "
        f"angle={rows[-1][2]:.6e} reduction_gap={gap:.6e}\n"
    )
    if args.plot:
        from .plotting import save_residual_figure

        save_residual_figure(_figure_path(out), rows)
    return EXIT_OK


def _figure_path(out: str) -> str:
    stem, ext = os.path.splitext(out)
    return (stem if ext else out) + ".png"


def _build_config(args, model, steps: int) -> SimulationConfig:
    return SimulationConfig(
        model=model,
        steps=steps,
        seed=args.seed,
        rank=args.rank,
        epsilon=args.epsilon if args.epsilon is not None else 1.0,
        substeps=args.substeps if args.substeps is not None else 8,
        mode=args.mode,
    )


def _cmd_filter(args) -> int:
    model = _load_model(args.model)
    out = _require_out(args)
    observations = None
    steps = args.steps
    if args.obs is not None:
        observations = lio.read_matrix(args.obs)
        if steps is None:
            steps = observations.shape[0]
        elif steps != observations.shape[0]:
            raise ValueError(
                f"--steps {steps} disagrees with {observations.shape[0]} observation rows"
            )
    if steps is None:
        raise ValueError("--steps is required when no observation file is given")
    cfg = _build_config(args, model, steps)
    runs = run_filter(cfg, observations)
    for mode, run in runs.items():
        lio.write_trace_csv(f"{out}_{mode}.csv", run.records)
        lio.write_matrix(f"{out}_{mode}_states.csv", run.filtered_means)
    if args.plot:
        from .plotting import save_trace_figure

        save_trace_figure(
            f"{out}_traces.png", {mode: run.records for mode, run in runs.items()}
        )
    return EXIT_OK


def _cmd_steady(args) -> int:
    model = _load_model(args.model)
    dm = lift(model)
    tol = args.tol if args.tol is not None else 1e-12
    epsilon = args.epsilon if args.epsilon is not None else 1.0
    steady_full = kf_steady(dm, tol=tol)
    point = dominant_frame(model.A, args.rank, epsilon=epsilon, seed=args.seed)
    steady_red = lkf_steady(reduce_model(point, dm), dm.M, tol=tol)
    spectrum = closed_loop_spectrum(dm, point, steady_red.F, model.A)
    lifted = point.U @ steady_red.R @ point.U.T
    verdict = stability_verdict(model, args.rank)
    lines = [
        f"rank={args.rank}",
        f"verdict={verdict.verdict}",
        f"min_admissible_rank={verdict.min_admissible_rank}",
        f"trace_P_steady={np.trace(steady_full.P):.12e}",
        f"trace_R_steady={np.trace(steady_red.R):.12e}",
        f"trace_lifted_R={np.trace(lifted):.12e}",
        f"closed_loop_radius={np.abs(spectrum.eigenvalues).max():.12e}",
        "closed_loop_eigenvalues="
        + ";".join(f"{z.real:.12e}{z.imag:+.12e}j" for z in spectrum.eigenvalues),
    ]
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if args.out is not None:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(report)
        if args.plot:
            from .plotting import save_spectrum_figure

            save_spectrum_figure(_figure_path(args.out), spectrum.eigenvalues)
    return EXIT_OK


def _cmd_sweep_rank(args) -> int:
    model = _load_model(args.model)
    out = _require_out(args)
    ranks = _parse_rank_spec(args.ranks)
    cfg = SimulationConfig(
        model=model,
        steps=1,
        seed=args.seed,
        rank=min(ranks),
        epsilon=args.epsilon if args.epsilon is not None else 1.0,
        substeps=args.substeps if args.substeps is not None else 8,
        mode="lkf",
    )
    result = run_rank_sweep(cfg, ranks)
    lio.write_ratio_csv(out, result.entries)
    for entry in result.entries:
        if entry.skipped_reason:
            sys.stderr.write(f"rank {entry.rank} skipped: {entry.skipped_reason}\n")
    if args.plot:
        from .plotting import save_ratio_figure

        save_ratio_figure(_figure_path(out), result.entries)
    return EXIT_OK


def _cmd_complexity(args) -> int:
    out = _require_out(args)
    p_values = _parse_int_list(args.p)
    if not p_values:
        raise ValueError("--p needs at least one output dimension")
    grid = _parse_grid(args.n_grid)
    curves = {}
    for p in p_values:
        points = boundary_curve(p, args.s, grid)
        curves[p] = points
        lio.write_boundary_csv(f"{out}_p{p}.csv", points)
    if args.plot:
        from .plotting import save_boundary_figure

        save_boundary_figure(f"{out}.png", curves, args.s)
    return EXIT_OK


_HANDLERS = {
    "discretize": _cmd_discretize,
    "diagnose": _cmd_diagnose,
    "oja": _cmd_oja,
    "filter": _cmd_filter,
    "steady": _cmd_steady,
    "sweep-rank": _cmd_sweep_rank,
    "complexity": _cmd_complexity,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except DivergenceError as exc:
        sys.stderr.write(f"instability detected: {exc}\n")
        return EXIT_INSTABILITY
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
