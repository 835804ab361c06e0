"""Low-rank Kalman filter: reduced recursion, steady state, and stability.

The filter keeps an r x r covariance factor on a tracked r-dimensional
subspace instead of the full n x n covariance.  The gain is evaluated with
the Sherman-Morrison-Woodbury identity so the only fresh factorization per
step is r x r.  Alongside the filter itself this module propagates the exact
n x n covariance of the one-step-ahead estimation error under the low-rank
gain (an analysis tool, deliberately quadratic in n) and exposes the
closed-loop spectrum and the rank criterion for bounded errors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import NumericalError
from .model import (
    ContinuousModel,
    DiscreteModel,
    SystemDiagnostics,
    check_observability,
    check_reachability,
    diagnose,
    lift,
)
from .numerics import (
    Spectrum,
    as_matrix,
    eig_sorted,
    iterate_to_fixed_point,
    spectral_radius,
    symmetrize,
)
from .oja import ReducedMatrices, StiefelPoint, equilibrium_residual, oja_integrate, reduce_model


@dataclass(frozen=True)
class LKFState:
    """Low-rank filter iterate: mean, reduced covariance, and tracked frame."""

    x_pred: np.ndarray
    R_pred: np.ndarray
    point: StiefelPoint
    gain: Optional[np.ndarray] = None
    x_filt: Optional[np.ndarray] = None
    step_index: int = 0


@dataclass(frozen=True)
class SteadyLKF:
    """Steady reduced covariance, gain, and reduced closed loop A_U (I - F C_U)."""

    R: np.ndarray
    F: np.ndarray
    reduced_closed_loop: np.ndarray
    iterations: int


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of the rank criterion for a given model and filter rank."""

    verdict: str  # "stable" | "unstable" | "not_applicable"
    rank: int
    min_admissible_rank: int
    gap_at_rank: Optional[float]
    spectral_radius: Optional[float]
    diagnostics: SystemDiagnostics


def lkf_init(x0, sigma0_r, point: StiefelPoint) -> LKFState:
    """State at k = 0 with a positive definite reduced covariance."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    r0 = symmetrize(np.asarray(sigma0_r, dtype=float))
    r = point.rank
    if r0.shape != (r, r):
        raise ValueError(f"reduced covariance shape {r0.shape} does not match rank {r}")
    if x0.size != point.U.shape[0]:
        raise ValueError(f"state size {x0.size} does not match frame rows {point.U.shape[0]}")
    if np.linalg.eigvalsh(r0).min() <= 0:
        raise ValueError("initial reduced covariance must be positive definite")
    return LKFState(x_pred=x0, R_pred=r0, point=point, step_index=0)


def lkf_gain(r_cov, c_u, m, m_inv=None) -> np.ndarray:
    """Reduced gain F = R C_U^T (C_U R C_U^T + M)^{-1} via the SMW identity.

    The p x p inverse is rewritten so the only fresh factorizations are
    r x r (R itself and R^{-1} + C_U^T M^{-1} C_U); M^{-1} is time-invariant
    and should be passed in precomputed.

    Parameters
    ----------
    r_cov : (r, r) positive definite reduced covariance.
    c_u : (p, r) projected output matrix.
    m : (p, p) positive definite observation-noise covariance.
    m_inv : optional precomputed inverse of ``m``.
    """
    r_cov = as_matrix(r_cov, "reduced covariance", square=True)
    c_u = as_matrix(c_u, "projected output matrix")
    m = as_matrix(m, "M", square=True)
    r = r_cov.shape[0]
    if c_u.shape[1] != r or m.shape[0] != c_u.shape[0]:
        raise ValueError("gain dimensions are inconsistent")
    if m_inv is None:
        m_inv = np.linalg.inv(m)
    try:
        r_factor = sla.cho_factor(r_cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("reduced covariance is not positive definite") from exc
    r_inv = sla.cho_solve(r_factor, np.eye(r))
    w = c_u.T @ m_inv                      # r x p
    b = w @ c_u                            # r x r
    core = sla.cho_factor(symmetrize(r_inv + b))
    x = sla.cho_solve(core, w)             # (R^{-1} + C_U^T M^{-1} C_U)^{-1} C_U^T M^{-1}
    return r_cov @ (w - b @ x)


def lkf_gain_direct(r_cov, c_u, m) -> np.ndarray:
    """Gain through the direct p x p factorization; oracle for :func:`lkf_gain`."""
    r_cov = as_matrix(r_cov, "reduced covariance", square=True)
    c_u = as_matrix(c_u, "projected output matrix")
    m = as_matrix(m, "M", square=True)
    s = symmetrize(c_u @ r_cov @ c_u.T + m)
    factor = sla.cho_factor(s)
    return sla.cho_solve(factor, c_u @ r_cov).T


def lkf_step(
    state: LKFState,
    y,
    dm: DiscreteModel,
    a,
    frozen: bool = False,
) -> LKFState:
    """One full low-rank filter cycle.

    Integrates the subspace flow over one sampling interval (skipped when
    ``frozen``, for precomputed frames), projects the system onto the frame,
    computes the SMW gain, updates the mean with the innovation lifted back
    through U, and advances the reduced covariance
    R_next = A_U (I - F C_U) R A_U^T + G_U G_U^T.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != dm.p:
        raise ValueError(f"observation has size {y.size}, expected {dm.p}")
    pt = state.point
    if not frozen:
        if dm.h is None:
            raise ValueError(
                "sampling period unknown: the model was not produced by lift(); "
                "set DiscreteModel.h or run with frozen=True"
            )
        pt = oja_integrate(pt, a, dm.h)
    rm = reduce_model(pt, dm)
    f = lkf_gain(state.R_pred, rm.C_U, dm.M, dm.M_inv)
    innovation = y - dm.C @ state.x_pred
    x_filt = state.x_pred + pt.U @ (f @ innovation)
    x_next = dm.A_d @ x_filt
    r = pt.rank
    r_next = symmetrize(
        rm.A_U @ (np.eye(r) - f @ rm.C_U) @ state.R_pred @ rm.A_U.T + rm.G_U @ rm.G_U.T
    )
    try:
        sla.cho_factor(r_next)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"reduced covariance lost positive definiteness at step "
            f"{state.step_index + 1}"
        ) from exc
    return LKFState(
        x_pred=x_next,
        R_pred=r_next,
        point=pt,
        gain=f,
        x_filt=x_filt,
        step_index=state.step_index + 1,
    )


def lkf_steady(
    rm: ReducedMatrices,
    m,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> SteadyLKF:
    """Steady reduced covariance by fixed-point iteration from R = I_r.

    Requires the reduced triple (A_U, G_U, C_U) reachable and observable,
    which holds whenever the full system is and the frame is a converged
    equilibrium.  The reduced closed loop is asserted Schur stable.
    """
    m = as_matrix(m, "M", square=True)
    r = rm.A_U.shape[0]
    obs, m_obs = check_observability(rm.C_U, rm.A_U)
    if not obs:
        raise NumericalError(
            f"reduced pair (C_U, A_U) unobservable (margin {m_obs:.3e})"
        )
    rch, m_rch = check_reachability(rm.A_U, rm.G_U)
    if not rch:
        raise NumericalError(
            f"reduced pair (A_U, G_U) unreachable (margin {m_rch:.3e})"
        )
    m_inv = np.linalg.inv(m)
    q_u = rm.G_U @ rm.G_U.T

    def recursion(r_cov):
        f = lkf_gain(r_cov, rm.C_U, m, m_inv)
        return symmetrize(rm.A_U @ (r_cov - f @ (rm.C_U @ r_cov)) @ rm.A_U.T + q_u)

    r_steady, iters = iterate_to_fixed_point(
        recursion, np.eye(r), tol, max_iter, "reduced Riccati recursion"
    )
    f = lkf_gain(r_steady, rm.C_U, m, m_inv)
    reduced_cl = rm.A_U @ (np.eye(r) - f @ rm.C_U)
    rho = spectral_radius(reduced_cl)
    if rho >= 1.0:
        raise NumericalError(f"reduced closed loop is not Schur stable (radius {rho:.6f})")
    return SteadyLKF(R=r_steady, F=f, reduced_closed_loop=reduced_cl, iterations=iters)


def error_cov_step(v, u, f, dm: DiscreteModel) -> np.ndarray:
    """Exact propagation of the true error covariance under the low-rank gain.

    V_next = L V L^T + G_d^2 + (A_d U F) M (A_d U F)^T with
    L = A_d (I - U F C).  Both noise terms are sandwiched by the one-step
    prediction because the predict x <- A_d x_filt happens after the
    measurement update, so at the full rank with the optimal gain the fixed
    point coincides with the steady Kalman covariance.
    """
    v = symmetrize(as_matrix(v, "error covariance", square=True))
    pt = u if isinstance(u, StiefelPoint) else StiefelPoint(u)
    f = as_matrix(f, "gain")
    if v.shape[0] != dm.n:
        raise ValueError(f"covariance dimension {v.shape[0]} does not match model {dm.n}")
    if f.shape != (pt.rank, dm.p):
        raise ValueError(f"gain shape {f.shape}, expected ({pt.rank}, {dm.p})")
    lifted_gain = dm.A_d @ (pt.U @ f)       # n x p
    l = dm.A_d - lifted_gain @ dm.C
    v_next = l @ v @ l.T + dm.Q + lifted_gain @ dm.M @ lifted_gain.T
    return symmetrize(v_next)


def closed_loop_spectrum(
    dm: DiscreteModel,
    u,
    f,
    a,
    residual_tol: float = 1e-6,
    match_tol: float = 1e-6,
) -> Spectrum:
    """Spectrum of the full closed loop A_d (I - U F C), with a structure check.

    At a converged equilibrium frame the eigenvalue multiset must equal the
    reduced closed-loop eigenvalues together with the n - r sampled
    eigenvalues that the frame does not cover.  The two multisets are matched
    by optimal assignment; a mismatch beyond ``match_tol`` raises, which
    usually flags a frame that has not fully converged.
    """
    pt = u if isinstance(u, StiefelPoint) else StiefelPoint(u)
    a = as_matrix(a, "A", square=True)
    f = as_matrix(f, "gain")
    res = equilibrium_residual(pt, a)
    if res > residual_tol:
        raise ValueError(
            f"frame is not a converged equilibrium: residual {res:.3e} > {residual_tol:.1e}"
        )
    r = pt.rank
    cl = dm.A_d @ (np.eye(dm.n) - pt.U @ f @ dm.C)
    spec = eig_sorted(cl)

    reduced_cl = (pt.U.T @ dm.A_d @ pt.U) @ (np.eye(r) - f @ (dm.C @ pt.U))
    lam_ad = np.linalg.eigvals(dm.A_d)
    # the frame covers the r dominant modes; modulus order of e^{lambda h}
    # matches the real-part order of lambda, so the uncovered modes are the
    # n - r smallest in modulus
    tail = lam_ad[np.argsort(-np.abs(lam_ad))][r:]
    expected = np.concatenate([np.linalg.eigvals(reduced_cl), tail])
    cost = np.abs(spec.eigenvalues[:, None] - expected[None, :])
    rows, cols = linear_sum_assignment(cost)
    worst = float(cost[rows, cols].max())
    scale = max(1.0, float(np.abs(spec.eigenvalues).max()))
    if worst > match_tol * scale:
        raise NumericalError(
            f"closed-loop spectrum does not split into reduced + uncovered modes "
            f"(worst eigenvalue mismatch {worst:.3e}); frame may not be converged"
        )
    return spec


def stability_verdict(
    model: ContinuousModel,
    r: int,
    corroborate: bool = False,
) -> StabilityReport:
    """Rank criterion: the low-rank closed loop is Schur stable iff r covers
    every Hurwitz-unstable mode of A.

    Returns ``not_applicable`` when the model fails the reachability or
    observability checks the criterion rests on.  With ``corroborate=True``
    the closed loop is additionally built from a converged frame and its
    spectral radius reported.
    """
    if not 1 <= r <= model.n:
        raise ValueError(f"rank must be in [1, {model.n}], got {r}")
    diag = diagnose(model)
    spec_a = eig_sorted(model.A)
    gap = spec_a.gap(r) if r < model.n else None
    if not (diag.observable and diag.reachable):
        return StabilityReport(
            verdict="not_applicable",
            rank=r,
            min_admissible_rank=diag.min_admissible_rank,
            gap_at_rank=gap,
            spectral_radius=None,
            diagnostics=diag,
        )
    verdict = "stable" if r >= diag.min_admissible_rank else "unstable"
    rho = None
    if corroborate:
        from .oja import dominant_frame  # local import to avoid cycle at module load

        dm = lift(model)
        pt = dominant_frame(model.A, r)
        steady = lkf_steady(reduce_model(pt, dm), dm.M)
        cl = dm.A_d @ (np.eye(dm.n) - pt.U @ steady.F @ dm.C)
        rho = spectral_radius(cl)
    return StabilityReport(
        verdict=verdict,
        rank=r,
        min_admissible_rank=diag.min_admissible_rank,
        gap_at_rank=gap,
        spectral_radius=rho,
        diagnostics=diag,
    )
