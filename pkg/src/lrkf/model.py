"""System containers, exact sampling, and structural checks.

A :class:`ContinuousModel` holds the plant ``dx/dt = A x + G w`` observed at
period ``h`` through ``y = C x + H v``.  :func:`lift` converts it exactly to
the equivalent :class:`DiscreteModel` ``x[k+1] = A_d x[k] + G_d w_d[k]``,
``y[k] = C x[k] + H v_d[k]`` with standard-normal driving noise.
:func:`diagnose` reports observability, reachability, and the number of
modes that any bounded-error low-rank filter must cover.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import NumericalError
from .numerics import (
    as_matrix,
    eig_sorted,
    expm,
    noise_gramian,
    psd_sqrt,
    spectral_norm,
    symmetrize,
)

#: relative singular-value threshold for rank decisions
RANK_REL_TOL = 1e-10


@dataclass(frozen=True)
class ContinuousModel:
    """Continuous-time plant with discrete-time observations.

    Fields
    ------
    A : (n, n) state matrix (1/time)
    G : (n, q) noise input matrix
    C : (p, n) output matrix
    H : (p, p) observation-noise matrix, must be invertible
    h : sampling period, > 0
    """

    A: np.ndarray
    G: np.ndarray
    C: np.ndarray
    H: np.ndarray
    h: float

    def __post_init__(self):
        a = as_matrix(self.A, "A", square=True)
        g = as_matrix(self.G, "G")
        c = as_matrix(self.C, "C")
        hm = as_matrix(self.H, "H", square=True)
        n = a.shape[0]
        if g.shape[0] != n:
            raise ValueError(f"G has {g.shape[0]} rows, expected {n}")
        if c.shape[1] != n:
            raise ValueError(f"C has {c.shape[1]} columns, expected {n}")
        if hm.shape[0] != c.shape[0]:
            raise ValueError(
                f"H is {hm.shape[0]}x{hm.shape[1]} but C has {c.shape[0]} rows"
            )
        if not self.h > 0:
            raise ValueError(f"sampling period must be positive, got {self.h}")
        sv = np.linalg.svd(hm, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            raise ValueError("H is singular (smallest singular value below 1e-12 rel)")
        for name, val in (("A", a), ("G", g), ("C", c), ("H", hm)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "h", float(self.h))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class DiscreteModel:
    """Sampled system ``x[k+1] = A_d x[k] + G_d w_d[k]``, ``y[k] = C x[k] + H v_d[k]``.

    ``G_d`` is the symmetric PSD loading of the n-dimensional standard-normal
    process noise (n x n even when the continuous noise has fewer channels),
    and ``M = H H^T`` is the positive definite observation-noise covariance.
    ``h`` records the sampling period when the model came from :func:`lift`.
    """

    A_d: np.ndarray
    G_d: np.ndarray
    C: np.ndarray
    M: np.ndarray
    h: Optional[float] = None

    def __post_init__(self):
        ad = as_matrix(self.A_d, "A_d", square=True)
        gd = as_matrix(self.G_d, "G_d", square=True)
        c = as_matrix(self.C, "C")
        m = as_matrix(self.M, "M", square=True)
        n = ad.shape[0]
        if gd.shape[0] != n or c.shape[1] != n:
            raise ValueError("A_d, G_d, C dimensions are inconsistent")
        if m.shape[0] != c.shape[0]:
            raise ValueError("M dimension does not match the output dimension")
        scale = max(float(np.abs(gd).max()), 1e-300)
        if np.linalg.norm(gd - gd.T) > 1e-8 * scale:
            raise ValueError("G_d must be symmetric")
        w = np.linalg.eigvalsh(symmetrize(gd))
        if w.min() < -1e-10 * max(abs(w).max(), 1e-300):
            raise ValueError("G_d must be positive semidefinite")
        wm = np.linalg.eigvalsh(symmetrize(m))
        if wm.min() <= 0:
            raise ValueError("M must be positive definite")
        if np.linalg.norm(m - m.T) > 1e-10 * max(float(np.abs(m).max()), 1e-300):
            raise ValueError("M must be symmetric")
        if self.h is not None and not self.h > 0:
            raise ValueError(f"sampling period must be positive, got {self.h}")
        for name, val in (("A_d", ad), ("G_d", gd), ("C", c), ("M", m)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A_d.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @cached_property
    def Q(self) -> np.ndarray:
        """Process-noise covariance G_d^2."""
        return symmetrize(self.G_d @ self.G_d)

    @cached_property
    def M_inv(self) -> np.ndarray:
        """Precomputed inverse of the observation-noise covariance."""
        return np.linalg.inv(self.M)


@dataclass(frozen=True)
class SystemDiagnostics:
    """Structural summary of a model: rank tests and unstable-mode counts.

    ``min_admissible_rank`` equals the Hurwitz-unstable count: the smallest
    filter rank for which the low-rank closed loop can be Schur stable.
    """

    observable: bool
    observability_margin: float
    reachable: bool
    reachability_margin: float
    hurwitz_unstable_count: int
    schur_unstable_count: int
    min_admissible_rank: int


def lift(model: ContinuousModel) -> DiscreteModel:
    """Exact discretization: A_d = e^{A h}, G_d = sqrt of the noise Gramian."""
    a_d = expm(model.A * model.h)
    g_d = psd_sqrt(noise_gramian(model.A, model.G, model.h))
    m = symmetrize(model.H @ model.H.T)
    return DiscreteModel(A_d=a_d, G_d=g_d, C=model.C.copy(), M=m, h=model.h)


def check_observability(c, a, rel_tol: float = RANK_REL_TOL) -> tuple[bool, float]:
    """Rank test on the stacked observability matrix [C; CA; ...; CA^{n-1}].

    Powers are formed with A pre-scaled by 1/max(1, ||A||_2) to control
    growth; the margin is the smallest-to-largest singular-value ratio of
    the stack and the pair is observable when it exceeds ``rel_tol``.
    """
    a = as_matrix(a, "A", square=True)
    c = as_matrix(c, "C")
    n = a.shape[0]
    if c.shape[1] != n:
        raise ValueError(f"C has {c.shape[1]} columns, expected {n}")
    a_scaled = a / max(1.0, spectral_norm(a))
    blocks = [c]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ a_scaled)
    s = np.linalg.svd(np.vstack(blocks), compute_uv=False)
    margin = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    return margin > rel_tol, margin


def check_reachability(a, g, rel_tol: float = RANK_REL_TOL) -> tuple[bool, float]:
    """Reachability of the pair (A, G): the dual observability test on (A^T, G^T)."""
    g = as_matrix(g, "G")
    return check_observability(g.T, np.asarray(a).T, rel_tol)


def gramian_reachability(g_d, rel_tol: float = RANK_REL_TOL) -> tuple[bool, float]:
    """Reachability of a lifted pair via positivity of G_d^2.

    For models produced by :func:`lift`, the sampled noise Gramian is
    positive definite exactly when the continuous pair (A, G) is reachable,
    so the eigenvalue ratio of G_d^2 is a direct margin.
    """
    g_d = as_matrix(g_d, "G_d", square=True)
    w = np.linalg.eigvalsh(symmetrize(g_d @ g_d))
    top = max(float(w.max()), 0.0)
    margin = float(w.min() / top) if top > 0 else 0.0
    return margin > rel_tol, margin


def diagnose(model: ContinuousModel, rel_tol: float = RANK_REL_TOL) -> SystemDiagnostics:
    """Structural checks on the continuous pair and its lifted counterpart.

    Observability is required of both (C, A) and (C, A_d); reachability of
    (A, G) and, through the Gramian, of (A_d, G_d).  The reported margins are
    the weakest of the two.  The Schur-unstable count of A_d must agree with
    the Hurwitz-unstable count of A since the spectra are related by
    lambda -> e^{lambda h}.
    """
    dm = lift(model)
    obs_c, m_obs_c = check_observability(model.C, model.A, rel_tol)
    obs_d, m_obs_d = check_observability(dm.C, dm.A_d, rel_tol)
    rch_c, m_rch_c = check_reachability(model.A, model.G, rel_tol)
    rch_d, m_rch_d = gramian_reachability(dm.G_d, rel_tol)
    spec_a = eig_sorted(model.A)
    spec_ad = eig_sorted(dm.A_d)
    r_prime = spec_a.hurwitz_unstable_count
    if spec_ad.schur_unstable_count != r_prime:
        raise NumericalError(
            "unstable-mode counts disagree between A and A_d "
            f"({r_prime} vs {spec_ad.schur_unstable_count}); eigenvalues are "
            "too close to the stability boundary to classify reliably"
        )
    return SystemDiagnostics(
        observable=obs_c and obs_d,
        observability_margin=min(m_obs_c, m_obs_d),
        reachable=rch_c and rch_d,
        reachability_margin=min(m_rch_c, m_rch_d),
        hurwitz_unstable_count=r_prime,
        schur_unstable_count=spec_ad.schur_unstable_count,
        min_admissible_rank=r_prime,
    )
