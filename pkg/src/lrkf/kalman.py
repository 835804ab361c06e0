"""Full-order Kalman filter for the sampled system.

Reference implementation the low-rank filter is judged against: the
measurement-update / predict recursion and the steady-state covariance
obtained as the fixed point of that recursion.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError
from .model import DiscreteModel, check_observability, check_reachability
from .numerics import iterate_to_fixed_point, spectral_radius, symmetrize


@dataclass(frozen=True)
class KFState:
    """Filter iterate: predicted mean/covariance plus the last update products."""

    x_pred: np.ndarray
    P_pred: np.ndarray
    gain: Optional[np.ndarray] = None
    x_filt: Optional[np.ndarray] = None
    step_index: int = 0


@dataclass(frozen=True)
class SteadyKF:
    """Steady-state covariance, gain, and closed-loop matrix A_d (I - K C)."""

    P: np.ndarray
    K: np.ndarray
    closed_loop: np.ndarray
    iterations: int


def kf_init(x0, sigma0) -> KFState:
    """State at k = 0, before any measurement update."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    p0 = symmetrize(np.asarray(sigma0, dtype=float))
    if p0.shape != (x0.size, x0.size):
        raise ValueError(f"covariance shape {p0.shape} does not match state size {x0.size}")
    w = np.linalg.eigvalsh(p0)
    if w.min() < -1e-10 * max(abs(w).max(), 1e-300):
        raise ValueError("initial covariance must be positive semidefinite")
    return KFState(x_pred=x0, P_pred=p0, step_index=0)


def _gain(p: np.ndarray, c: np.ndarray, m: np.ndarray) -> np.ndarray:
    s = symmetrize(c @ p @ c.T + m)
    try:
        factor = sla.cho_factor(s)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - M > 0 prevents this
        raise NumericalError("innovation covariance is not positive definite") from exc
    return sla.cho_solve(factor, c @ p).T


def kf_step(state: KFState, y, dm: DiscreteModel) -> KFState:
    """One measurement-update plus predict cycle.

    Gain K = P C^T (C P C^T + M)^{-1} via a Cholesky solve, mean update with
    the innovation, then covariance predict
    P_next = A_d (I - K C) P A_d^T + G_d^2, symmetrized.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != dm.p:
        raise ValueError(f"observation has size {y.size}, expected {dm.p}")
    p = state.P_pred
    k_gain = _gain(p, dm.C, dm.M)
    x_filt = state.x_pred + k_gain @ (y - dm.C @ state.x_pred)
    x_next = dm.A_d @ x_filt
    p_next = symmetrize(dm.A_d @ (p - k_gain @ (dm.C @ p)) @ dm.A_d.T + dm.Q)
    return KFState(
        x_pred=x_next,
        P_pred=p_next,
        gain=k_gain,
        x_filt=x_filt,
        step_index=state.step_index + 1,
    )


def kf_steady(
    dm: DiscreteModel,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    p0: Optional[np.ndarray] = None,
) -> SteadyKF:
    """Steady-state covariance by fixed-point iteration of the Riccati recursion.

    Requires (A_d, G_d) reachable and (C, A_d) observable, which guarantees a
    unique positive definite fixed point and a Schur-stable closed loop; both
    are asserted on the result.
    """
    obs, m_obs = check_observability(dm.C, dm.A_d)
    if not obs:
        raise NumericalError(f"(C, A_d) unobservable (margin {m_obs:.3e}); no unique fixed point")
    rch, m_rch = check_reachability(dm.A_d, dm.G_d)
    if not rch:
        raise NumericalError(f"(A_d, G_d) unreachable (margin {m_rch:.3e}); no unique fixed point")

    def recursion(p):
        k = _gain(p, dm.C, dm.M)
        return symmetrize(dm.A_d @ (p - k @ (dm.C @ p)) @ dm.A_d.T + dm.Q)

    start = np.eye(dm.n) if p0 is None else symmetrize(np.asarray(p0, dtype=float))
    p, iters = iterate_to_fixed_point(recursion, start, tol, max_iter, "Riccati recursion")
    k = _gain(p, dm.C, dm.M)
    closed_loop = dm.A_d @ (np.eye(dm.n) - k @ dm.C)
    rho = spectral_radius(closed_loop)
    if rho >= 1.0:
        raise NumericalError(f"steady closed loop is not Schur stable (radius {rho:.6f})")
    return SteadyKF(P=p, K=k, closed_loop=closed_loop, iterations=iters)
