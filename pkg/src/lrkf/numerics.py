"""Dense numerical kernels shared by the filtering modules.

Everything here is a pure function of its inputs: matrix exponential,
sampled process-noise Gramian, positive semidefinite square root, ordered
eigendecomposition, principal angles between frames, dominant invariant
subspaces via ordered real Schur form, and a generic fixed-point driver.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, NumericalError

#: eigenvalues with |Re| below this are flagged as borderline for stability counts
BORDERLINE_REAL_PART = 1e-9


def as_matrix(m, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Validate and return ``m`` as a finite 2-D float (or complex) array."""
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.complexfloating):
        a = a.astype(float, copy=False)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part (m + m^T)/2."""
    return 0.5 * (m + m.T)


def spectral_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def spectral_radius(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(as_matrix(m, square=True))).max())


def expm(m) -> np.ndarray:
    """Matrix exponential e^M for a square matrix.

    Backed by the scaling-and-squaring Pade implementation in
    :func:`scipy.linalg.expm`.
    """
    a = as_matrix(m, "expm input", square=True)
    return sla.expm(a)


def noise_gramian(a, g, h: float) -> np.ndarray:
    """Sampled process-noise covariance ``int_0^h e^{A t} G G^T e^{A^T t} dt``.

    Computed with the Van Loan block-exponential method: exponentiate the
    2n x 2n matrix ``[[-A, G G^T], [0, A^T]] * h`` and combine blocks, so the
    result is exact up to the accuracy of one matrix exponential.

    Parameters
    ----------
    a : (n, n) array_like
        Continuous-time state matrix.
    g : (n, q) array_like
        Noise input matrix.
    h : float
        Sampling period, must be positive.

    Returns
    -------
    (n, n) ndarray, symmetric positive semidefinite.
    """
    a = as_matrix(a, "state matrix", square=True)
    g = as_matrix(g, "noise input matrix")
    n = a.shape[0]
    if g.shape[0] != n:
        raise ValueError(f"noise input matrix has {g.shape[0]} rows, expected {n}")
    if not h > 0:
        raise ValueError(f"sampling period must be positive, got {h}")
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = -a
    blk[:n, n:] = g @ g.T
    blk[n:, n:] = a.T
    f = sla.expm(blk * h)
    # upper-right block is e^{-A h} * integral; multiply back by e^{A h} = F22^T
    q = f[n:, n:].T @ f[:n, n:]
    return symmetrize(q)


def psd_sqrt(q, rel_tol: float = 1e-10) -> np.ndarray:
    """Symmetric positive semidefinite square root of a PSD matrix.

    Eigenvalues below ``-rel_tol * ||Q||`` raise; small negatives inside the
    tolerance band are clamped to zero before the square root.
    """
    q = as_matrix(q, "psd_sqrt input", square=True)
    scale = float(np.abs(q).max())
    if np.linalg.norm(q - q.T) > rel_tol * max(scale, 1e-300):
        raise ValueError("psd_sqrt input is not symmetric within tolerance")
    w, v = np.linalg.eigh(symmetrize(q))
    bound = rel_tol * max(abs(w).max(), 1e-300)
    if w.min() < -bound:
        raise ValueError(
            f"psd_sqrt input is indefinite: min eigenvalue {w.min():.3e} "
            f"below -{bound:.3e}"
        )
    w = np.clip(w, 0.0, None)
    b = (v * np.sqrt(w)) @ v.T
    return symmetrize(b)


@dataclass(frozen=True)
class Spectrum:
    """Full eigendecomposition ordered by descending real part.

    Ties are broken by descending imaginary part, then by original index,
    so the ordering is deterministic.  ``hurwitz_unstable_count`` counts
    eigenvalues with nonnegative real part (closed right half-plane);
    ``schur_unstable_count`` counts those with modulus >= 1.  ``gap_at`` is
    the 1-based index of the widest descending real-part gap, or None when
    the spectrum has fewer than two distinct real parts.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    hurwitz_unstable_count: int
    schur_unstable_count: int
    gap_at: Optional[int]

    def gap(self, r: int) -> float:
        """Real-part gap Re(lambda_r) - Re(lambda_{r+1}) (1-based r)."""
        n = self.eigenvalues.size
        if not 1 <= r < n:
            raise ValueError(f"gap index must be in [1, {n - 1}], got {r}")
        return float(self.eigenvalues[r - 1].real - self.eigenvalues[r].real)


def eig_sorted(m) -> Spectrum:
    """Eigendecomposition sorted by descending real part with stability counts."""
    a = as_matrix(m, "eig_sorted input", square=True)
    try:
        lam, vec = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    order = np.lexsort((np.arange(lam.size), -lam.imag, -lam.real))
    lam = lam[order]
    vec = vec[:, order]
    re = lam.real
    if np.any(np.abs(re) < BORDERLINE_REAL_PART):
        warnings.warn(
            "eigenvalue real part within 1e-9 of zero; Hurwitz-unstable count "
            "may be sensitive to rounding",
            RuntimeWarning,
            stacklevel=2,
        )
    gaps = re[:-1] - re[1:]
    gap_at = int(np.argmax(gaps)) + 1 if gaps.size and gaps.max() > 0 else None
    return Spectrum(
        eigenvalues=lam,
        eigenvectors=vec,
        hurwitz_unstable_count=int(np.sum(re >= 0)),
        schur_unstable_count=int(np.sum(np.abs(lam) >= 1)),
        gap_at=gap_at,
    )


def _check_orthonormal(u: np.ndarray, name: str, tol: float) -> None:
    r = u.shape[1]
    defect = np.linalg.norm(u.T @ u - np.eye(r))
    if defect > tol:
        raise ValueError(f"{name} is not orthonormal: ||U^T U - I|| = {defect:.3e}")


def principal_angles(u, v, orth_tol: float = 1e-8) -> np.ndarray:
    """Principal angles between two orthonormal frames, descending, in [0, pi/2].

    The angles are the arccosines of the singular values of U^T V, with the
    cosines clamped to [-1, 1] before arccos.
    """
    u = as_matrix(u, "first frame")
    v = as_matrix(v, "second frame")
    if u.shape != v.shape:
        raise ValueError(f"frame shapes differ: {u.shape} vs {v.shape}")
    _check_orthonormal(u, "first frame", orth_tol)
    _check_orthonormal(v, "second frame", orth_tol)
    s = np.linalg.svd(u.T @ v, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))[::-1]


def dominant_invariant_subspace(a, r: int, min_gap: float = 0.0) -> np.ndarray:
    """Real orthonormal basis of the invariant subspace of the r dominant eigenvalues.

    Dominance is by real part.  The basis is extracted from an ordered real
    Schur decomposition, so complex-conjugate pairs stay together; asking for
    an ``r`` that would split a conjugate pair raises.

    Parameters
    ----------
    a : (n, n) array_like
    r : int
        Target subspace dimension, 1 <= r <= n.
    min_gap : float
        Minimum admissible real-part gap Re(lambda_r) - Re(lambda_{r+1});
        smaller gaps raise a ValueError.
    """
    a = as_matrix(a, "matrix", square=True)
    n = a.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"rank must be in [1, {n}], got {r}")
    if r == n:
        return np.eye(n)
    lam = eig_sorted(a).eigenvalues
    lo, hi = lam[r], lam[r - 1]
    if hi.imag != 0 and abs(hi - np.conj(lo)) <= 1e-12 * max(1.0, abs(hi)):
        raise ValueError(
            f"rank {r} splits the complex-conjugate pair "
            f"{hi:.6g} / {lo:.6g}; choose r-1 or r+1"
        )
    gap = hi.real - lo.real
    scale = max(1.0, float(np.abs(lam.real).max()))
    if gap <= max(min_gap, 1e-12 * scale):
        raise ValueError(
            f"no real-part gap at rank {r}: Re(lambda_{r}) - Re(lambda_{r + 1}) "
            f"= {gap:.3e}"
        )
    cut = 0.5 * (hi.real + lo.real)
    _, z, sdim = sla.schur(a, output="real", sort=lambda x, y: x > cut)
    if sdim != r:
        raise NumericalError(
            f"ordered Schur selected {sdim} eigenvalues, expected {r}"
        )
    return z[:, :r].copy()


def iterate_to_fixed_point(
    step: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float,
    max_iter: int,
    label: str = "fixed-point iteration",
) -> tuple[np.ndarray, int]:
    """Iterate ``x <- step(x)`` until the relative Frobenius update is below tol.

    Returns the fixed point and the number of iterations used; raises
    :class:`ConvergenceError` when the budget is exhausted.
    """
    x = np.asarray(x0, dtype=float)
    for k in range(1, max_iter + 1):
        x_next = step(x)
        if np.linalg.norm(x_next - x) <= tol * max(np.linalg.norm(x), 1e-300):
            return x_next, k
        x = x_next
    raise ConvergenceError(f"{label} did not converge within {max_iter} iterations")
