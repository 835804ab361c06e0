"""Seeded stochastic simulation and the experiment drivers.

Randomness contract
-------------------
All noise comes from one documented generator: Philox4x64-10 counter-based
uniforms mapped through the Box-Muller transform (cosine block first, then
the sine block, truncated to the requested count).  Every driver draws its
blocks in a fixed, documented order, so a fixed configuration reproduces
byte-identical artifacts on every run and platform.

Test systems are built by eigenvalue placement: a block-diagonal matrix with
chosen eigenvalues (2 x 2 blocks for complex-conjugate pairs) conjugated by
a seeded random rotation.  This guarantees a known Hurwitz-unstable count
and spectral gaps, which the experiments need.

Drivers
-------
- :func:`simulate_trajectory`: exact sampled recursion with seeded noise.
- :func:`run_boundedness_experiment`: low-rank filter with a time-varying
  frame, exact error-covariance trace per step, divergence guard.
- :func:`empirical_mse_curve`: vectorized Monte Carlo replication of the
  one-step-ahead squared error against the exact covariance trace.
- :func:`run_rank_sweep`: steady error trace versus rank, normalized by the
  full filter.

Rank-sweep entries and Monte Carlo replications are independent of each
other (replications are propagated as one vectorized batch); results are
keyed by rank / replication index so ordering is schedule-independent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DivergenceError
from .kalman import kf_init, kf_step, kf_steady
from .lowrank import (
    closed_loop_spectrum,
    error_cov_step,
    lkf_init,
    lkf_step,
    lkf_steady,
)
from .model import ContinuousModel, DiscreteModel, diagnose, lift
from .numerics import (
    as_matrix,
    eig_sorted,
    iterate_to_fixed_point,
    psd_sqrt,
    symmetrize,
)
from .oja import StiefelPoint, dominant_frame, equilibrium_residual, reduce_model

RNG_ALGORITHM = "philox4x64-10/box-muller"

#: abort threshold for intentionally unstable runs
DIVERGENCE_THRESHOLD = 1e12


class GaussianStream:
    """Deterministic standard-normal stream (see module docstring)."""

    def __init__(self, seed: int):
        self._gen = np.random.Generator(np.random.Philox(int(seed)))

    def normals(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u1 = 1.0 - self._gen.random(pairs)  # (0, 1]: keeps log finite
        u2 = self._gen.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]
        return z.reshape(shape)


def place_spectrum(eigenvalues: Sequence[complex], rng: np.random.Generator) -> np.ndarray:
    """Real matrix with the given spectrum under a seeded random rotation.

    Complex eigenvalues must appear as adjacent conjugate pairs (positive
    imaginary part first); each pair becomes a 2 x 2 rotation-scaling block.
    With only real eigenvalues the result is symmetric.
    """
    blocks = []
    i = 0
    vals = [complex(v) for v in eigenvalues]
    while i < len(vals):
        lam = vals[i]
        if lam.imag != 0:
            if i + 1 >= len(vals) or abs(vals[i + 1] - lam.conjugate()) > 1e-12 * max(1.0, abs(lam)):
                raise ValueError(
                    "complex eigenvalues must come as adjacent conjugate pairs"
                )
            blocks.append(np.array([[lam.real, lam.imag], [-lam.imag, lam.real]]))
            i += 2
        else:
            blocks.append(np.array([[lam.real]]))
            i += 1
    n = sum(b.shape[0] for b in blocks)
    b_full = np.zeros((n, n))
    at = 0
    for b in blocks:
        k = b.shape[0]
        b_full[at : at + k, at : at + k] = b
        at += k
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ b_full @ q.T


def _spread_descending(
    rng: np.random.Generator, count: int, lo: float, hi: float, min_sep: float
) -> np.ndarray:
    """Descending random values spanning [lo, hi] with a minimum separation."""
    if count == 1:
        return np.array([hi])
    v = np.sort(rng.uniform(lo, hi, count))
    for i in range(1, count):
        if v[i] - v[i - 1] < min_sep:
            v[i] = v[i - 1] + min_sep
    v = lo + (v - v[0]) * (hi - lo) / max(v[-1] - v[0], 1e-12)
    return v[::-1]


def random_system(
    seed: int,
    n: Optional[int] = None,
    n_unstable: Optional[int] = None,
    p: Optional[int] = None,
    h: float = 0.1,
    min_sep: float = 0.12,
    max_tries: int = 20,
) -> tuple[ContinuousModel, int]:
    """Seeded random model with a prescribed Hurwitz-unstable mode count.

    Unstable real parts are spread over [0.3, 3], stable over [-3, -0.3],
    all distinct, so every rank has a usable spectral gap and the sampled
    unstable modes sit a safe margin outside the unit circle.  The output is
    re-drawn (deterministically) until the structural checks pass.

    Returns the model and its unstable count.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        nn = int(rng.integers(8, 21)) if n is None else n
        rp = int(rng.integers(2, nn - 1)) if n_unstable is None else n_unstable
        pp = max(2, nn // 2) if p is None else p
        unstable = _spread_descending(rng, rp, 0.3, 3.0, min_sep)
        stable = _spread_descending(rng, nn - rp, -3.0, -0.3, min_sep)
        a = place_spectrum(list(unstable) + list(stable), rng)
        c = rng.standard_normal((pp, nn))
        model = ContinuousModel(A=a, G=np.eye(nn), C=c, H=np.eye(pp), h=h)
        diag = diagnose(model)
        if diag.observable and diag.reachable and diag.hurwitz_unstable_count == rp:
            return model, rp
    raise RuntimeError(f"could not build a valid random system from seed {seed}")


def builtin_model(name: str) -> ContinuousModel:
    """Bundled demonstration models.

    ``unstable10``: n = 10 with 6 unstable modes (one complex pair), the
    first four states observed, identity noise loadings, h = 0.01.
    ``symmetric20``: n = 20 symmetric with 10 unstable modes, the first
    eight states observed, identity noise loadings, h = 0.01.
    """
    if name == "unstable10":
        rng = np.random.default_rng(41)
        eigs = [1.8 + 0.4j, 1.8 - 0.4j, 2.0, 1.6, 1.4, 1.0, -1.0, -1.5, -2.0, -2.5]
        a = place_spectrum(eigs, rng)
        c = np.hstack([np.eye(4), np.zeros((4, 6))])
        return ContinuousModel(A=a, G=np.eye(10), C=c, H=np.eye(4), h=0.01)
    if name == "symmetric20":
        rng = np.random.default_rng(0)
        vals = np.concatenate([np.linspace(3.0, 0.5, 10), np.linspace(-0.5, -3.0, 10)])
        a = place_spectrum(list(vals), rng)
        c = np.hstack([np.eye(8), np.zeros((8, 12))])
        return ContinuousModel(A=a, G=np.eye(20), C=c, H=np.eye(8), h=0.01)
    raise ValueError(f"unknown builtin model {name!r}; use 'unstable10' or 'symmetric20'")


@dataclass(frozen=True)
class SimulationConfig:
    """Everything that determines a run: model, horizon, seed, filter settings.

    The same configuration always produces bit-identical artifacts.
    """

    model: ContinuousModel
    steps: int
    seed: int
    rank: Optional[int] = None
    epsilon: float = 1.0
    substeps: int = 1
    mode: str = "both"  # kf | lkf | both
    rng_algorithm: str = RNG_ALGORITHM
    x0_true: Optional[np.ndarray] = None
    x0_mean: Optional[np.ndarray] = None
    sigma0: Optional[np.ndarray] = None
    sigma0_r: Optional[np.ndarray] = None
    u0: Optional[np.ndarray] = None
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.mode not in ("kf", "lkf", "both"):
            raise ValueError(f"mode must be kf, lkf, or both, got {self.mode!r}")
        if self.rng_algorithm != RNG_ALGORITHM:
            raise ValueError(f"unsupported rng algorithm {self.rng_algorithm!r}")
        n = self.model.n
        if self.mode in ("lkf", "both"):
            if self.rank is None or not 1 <= self.rank <= n:
                raise ValueError(f"low-rank mode needs a rank in [1, {n}], got {self.rank}")
        object.__setattr__(
            self,
            "x0_true",
            np.zeros(n) if self.x0_true is None else np.asarray(self.x0_true, float).reshape(n),
        )
        object.__setattr__(
            self,
            "x0_mean",
            np.zeros(n) if self.x0_mean is None else np.asarray(self.x0_mean, float).reshape(n),
        )
        object.__setattr__(
            self,
            "sigma0",
            np.eye(n) if self.sigma0 is None else symmetrize(np.asarray(self.sigma0, float)),
        )
        if self.rank is not None:
            r = self.rank
            object.__setattr__(
                self,
                "sigma0_r",
                np.eye(r) if self.sigma0_r is None else symmetrize(np.asarray(self.sigma0_r, float)),
            )
            if self.u0 is None:
                object.__setattr__(self, "u0", np.eye(n, r))
            else:
                object.__setattr__(self, "u0", as_matrix(self.u0, "u0"))

    def initial_point(self) -> StiefelPoint:
        return StiefelPoint(U=self.u0, epsilon=self.epsilon, substeps=self.substeps)


@dataclass(frozen=True)
class StepRecord:
    """One per-step line: exact trace, empirical squared error, frame residual."""

    k: int
    trace: float
    emp_sq_err: float
    residual: float = float("nan")


@dataclass(frozen=True)
class RunArtifacts:
    """Per-step records plus run summary."""

    records: list[StepRecord]
    steady_trace: Optional[float] = None
    ratio_to_kf: Optional[float] = None
    convergence_step: Optional[int] = None
    diverged: bool = False

    def __post_init__(self):
        for rec in self.records:
            if rec.trace < 0:
                raise ValueError(f"negative trace {rec.trace} at step {rec.k}")


@dataclass(frozen=True)
class RankSweepEntry:
    rank: int
    trace_ratio: Optional[float]
    stable: bool
    trace_v_inf: Optional[float] = None
    skipped_reason: Optional[str] = None


@dataclass(frozen=True)
class RankSweepResult:
    entries: list[RankSweepEntry]
    trace_p_steady: float


def simulate_trajectory(cfg: SimulationConfig) -> tuple[np.ndarray, np.ndarray]:
    """Exact sampled run with seeded standard-normal noise.

    Draw order: the process-noise block W (steps x n) first, then the
    measurement-noise block V (steps x p).  The initial state is the
    configured deterministic ``x0_true``.

    Returns
    -------
    states : (steps + 1, n) ndarray, x[0..steps]
    observations : (steps, p) ndarray, y[0..steps-1]
    """
    dm = lift(cfg.model)
    stream = GaussianStream(cfg.seed)
    w = stream.normals((cfg.steps, dm.n))
    v = stream.normals((cfg.steps, dm.p))
    states = np.empty((cfg.steps + 1, dm.n))
    obs = np.empty((cfg.steps, dm.p))
    x = cfg.x0_true.copy()
    for k in range(cfg.steps):
        states[k] = x
        obs[k] = dm.C @ x + cfg.model.H @ v[k]
        x = dm.A_d @ x + dm.G_d @ w[k]
    states[cfg.steps] = x
    return states, obs


def _summary(traces: np.ndarray, trace_p: Optional[float]) -> dict:
    final = float(traces[-1])
    settled = np.abs(traces - final) <= 1e-6 * final
    conv = None
    idx = np.where(~settled)[0]
    if settled[-1]:
        conv = int(idx[-1] + 1) if idx.size else 0
    return {
        "steady_trace": final,
        "ratio_to_kf": (final / trace_p) if trace_p else None,
        "convergence_step": conv,
    }


def run_boundedness_experiment(cfg: SimulationConfig) -> RunArtifacts:
    """Low-rank filter with a time-varying frame and exact error trace per step.

    Runs the filter recursion on a simulated observation sequence while
    propagating the exact error covariance; the empirical column is the
    squared one-step-ahead error computed through the error recursion

        e[k+1] = (A_d - A_d U F C) e[k] + G_d w[k] - A_d U F H v[k],

    which equals x[k+1] - x_pred[k+1] exactly but stays numerically accurate
    on unstable plants where the state and its estimate both grow huge.
    Aborts with :class:`DivergenceError` when the trace passes the
    configured threshold.
    """
    if cfg.mode not in ("lkf", "both"):
        raise ValueError("boundedness experiment needs mode 'lkf' or 'both'")
    dm = lift(cfg.model)
    a = cfg.model.A
    stream = GaussianStream(cfg.seed)
    w = stream.normals((cfg.steps, dm.n))
    v = stream.normals((cfg.steps, dm.p))

    state = lkf_init(cfg.x0_mean, cfg.sigma0_r, cfg.initial_point())
    v_cov = cfg.sigma0.copy()
    err = cfg.x0_true - cfg.x0_mean
    x_true = cfg.x0_true.copy()
    records: list[StepRecord] = []
    traces = np.empty(cfg.steps)
    for k in range(cfg.steps):
        y = dm.C @ x_true + cfg.model.H @ v[k]
        state = lkf_step(state, y, dm, a)
        u, f = state.point.U, state.gain
        v_cov = error_cov_step(v_cov, state.point, f, dm)
        lifted_gain = dm.A_d @ (u @ f)
        err = (dm.A_d - lifted_gain @ dm.C) @ err + dm.G_d @ w[k] - lifted_gain @ (cfg.model.H @ v[k])
        x_true = dm.A_d @ x_true + dm.G_d @ w[k]
        trace = float(np.trace(v_cov))
        traces[k] = trace
        records.append(
            StepRecord(
                k=k,
                trace=trace,
                emp_sq_err=float(err @ err),
                residual=equilibrium_residual(state.point, a),
            )
        )
        if trace > cfg.divergence_threshold:
            raise DivergenceError(
                f"error covariance trace {trace:.3e} passed the divergence "
                f"threshold at step {k} (rank {cfg.rank} likely below the "
                "minimum admissible rank)",
                artifacts=RunArtifacts(records=records, diverged=True),
            )
    trace_p = float(np.trace(kf_steady(dm).P))
    return RunArtifacts(records=records, **_summary(traces, trace_p))


def empirical_mse_curve(
    cfg: SimulationConfig, replications: int
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo check of the exact error-covariance law.

    The gain and frame schedule of the low-rank filter does not depend on the
    data, so it is computed once by running the filter recursion; the
    replications are then propagated as one vectorized batch through the
    plant, observation, and mean-update equations.  Initial states are drawn
    from N(x0_mean, sigma0) so the error covariance matches the configured
    initial covariance at every step, not just in steady state.

    Draw order: the initial-state block (n x replications) first, then per
    step the measurement block (p x replications) followed by the process
    block (n x replications).

    Returns
    -------
    emp : (steps,) empirical mean squared one-step-ahead error
    traces : (steps,) exact covariance trace, same indexing
    """
    if cfg.mode not in ("lkf", "both"):
        raise ValueError("the Monte Carlo driver targets the low-rank filter")
    if replications < 2:
        raise ValueError("need at least 2 replications")
    dm = lift(cfg.model)
    a = cfg.model.A

    state = lkf_init(cfg.x0_mean, cfg.sigma0_r, cfg.initial_point())
    v_cov = cfg.sigma0.copy()
    schedule: list[tuple[np.ndarray, np.ndarray]] = []
    traces = np.empty(cfg.steps)
    zero_y = np.zeros(dm.p)
    for k in range(cfg.steps):
        state = lkf_step(state, zero_y, dm, a)
        schedule.append((state.point.U, state.gain))
        v_cov = error_cov_step(v_cov, state.point, state.gain, dm)
        traces[k] = float(np.trace(v_cov))

    stream = GaussianStream(cfg.seed)
    s0 = psd_sqrt(cfg.sigma0)
    x = cfg.x0_mean[:, None] + s0 @ stream.normals((dm.n, replications))
    x_pred = np.repeat(cfg.x0_mean[:, None], replications, axis=1)
    emp = np.empty(cfg.steps)
    for k in range(cfg.steps):
        y = dm.C @ x + cfg.model.H @ stream.normals((dm.p, replications))
        u, f = schedule[k]
        x_filt = x_pred + u @ (f @ (y - dm.C @ x_pred))
        x_pred = dm.A_d @ x_filt
        x = dm.A_d @ x + dm.G_d @ stream.normals((dm.n, replications))
        err = x - x_pred
        emp[k] = float(np.mean(np.einsum("ij,ij->j", err, err)))
    return emp, traces


def steady_error_covariance(
    dm: DiscreteModel,
    point: StiefelPoint,
    gain: np.ndarray,
    v0: Optional[np.ndarray] = None,
    tol: float = 1e-12,
    max_iter: int = 500_000,
) -> tuple[np.ndarray, int]:
    """Fixed point of the exact error-covariance propagation."""
    start = np.eye(dm.n) if v0 is None else symmetrize(np.asarray(v0, float))
    return iterate_to_fixed_point(
        lambda v: error_cov_step(v, point, gain, dm),
        start,
        tol,
        max_iter,
        "error-covariance propagation",
    )


def run_rank_sweep(cfg: SimulationConfig, ranks: Sequence[int]) -> RankSweepResult:
    """Steady error trace versus filter rank, normalized by the full filter.

    For each rank: converge the frame once (frozen-frame mode), solve the
    reduced steady state, iterate the exact error covariance to its fixed
    point, and record the trace ratio against the steady full-filter
    covariance.  Ranks whose spectral gap vanishes are skipped with a reason;
    ranks below the minimum admissible rank are rejected outright.
    """
    if not ranks:
        raise ValueError("rank list must be nonempty")
    dm = lift(cfg.model)
    a = cfg.model.A
    diag = diagnose(cfg.model)
    bad = [r for r in ranks if r < diag.min_admissible_rank]
    if bad:
        raise ValueError(
            f"ranks {bad} are below the minimum admissible rank "
            f"{diag.min_admissible_rank}"
        )
    spec_a = eig_sorted(a)
    trace_p = float(np.trace(kf_steady(dm).P))
    entries: list[RankSweepEntry] = []
    for r in sorted(set(int(r) for r in ranks)):
        if r < dm.n:
            gap = spec_a.gap(r)
            scale = max(1.0, float(np.abs(spec_a.eigenvalues.real).max()))
            if gap <= 1e-8 * scale:
                entries.append(
                    RankSweepEntry(
                        rank=r,
                        trace_ratio=None,
                        stable=False,
                        skipped_reason=f"no spectral gap at rank {r} (gap {gap:.3e})",
                    )
                )
                continue
        point = dominant_frame(a, r, epsilon=cfg.epsilon, seed=cfg.seed)
        steady = lkf_steady(reduce_model(point, dm), dm.M)
        spectrum = closed_loop_spectrum(dm, point, steady.F, a)
        stable = bool(np.abs(spectrum.eigenvalues).max() < 1.0)
        v_inf, _ = steady_error_covariance(dm, point, steady.F, v0=cfg.sigma0)
        entries.append(
            RankSweepEntry(
                rank=r,
                trace_ratio=float(np.trace(v_inf)) / trace_p,
                stable=stable,
                trace_v_inf=float(np.trace(v_inf)),
            )
        )
    return RankSweepResult(entries=entries, trace_p_steady=trace_p)


@dataclass(frozen=True)
class FilterRun:
    """One filter pass over an observation sequence."""

    mode: str
    records: list[StepRecord]
    filtered_means: np.ndarray  # (steps, n)


def run_filter(
    cfg: SimulationConfig,
    observations: Optional[np.ndarray] = None,
) -> dict[str, FilterRun]:
    """Run the full and/or low-rank filter over observations.

    With ``observations=None`` a trajectory is simulated from the seed and
    the empirical column holds the squared one-step-ahead error against the
    simulated truth; with supplied observations that column is NaN.  The
    trace column is the exact predicted-covariance trace (full filter) or
    the exact error-covariance trace under the low-rank gain.
    """
    dm = lift(cfg.model)
    a = cfg.model.A
    states = None
    if observations is None:
        states, observations = simulate_trajectory(cfg)
    observations = np.asarray(observations, dtype=float)
    if observations.ndim != 2 or observations.shape[1] != dm.p:
        raise ValueError(f"observations must be (steps, {dm.p}), got {observations.shape}")
    steps = observations.shape[0]
    if steps != cfg.steps:
        raise ValueError(f"config says {cfg.steps} steps but {steps} observations given")

    out: dict[str, FilterRun] = {}
    if cfg.mode in ("kf", "both"):
        state = kf_init(cfg.x0_mean, cfg.sigma0)
        recs = []
        means = np.empty((steps, dm.n))
        for k in range(steps):
            state = kf_step(state, observations[k], dm)
            means[k] = state.x_filt
            emp = float("nan")
            if states is not None:
                diff = states[k + 1] - state.x_pred
                emp = float(diff @ diff)
            recs.append(StepRecord(k=k, trace=float(np.trace(state.P_pred)), emp_sq_err=emp))
        out["kf"] = FilterRun(mode="kf", records=recs, filtered_means=means)
    if cfg.mode in ("lkf", "both"):
        state = lkf_init(cfg.x0_mean, cfg.sigma0_r, cfg.initial_point())
        v_cov = cfg.sigma0.copy()
        recs = []
        means = np.empty((steps, dm.n))
        for k in range(steps):
            state = lkf_step(state, observations[k], dm, a)
            means[k] = state.x_filt
            v_cov = error_cov_step(v_cov, state.point, state.gain, dm)
            emp = float("nan")
            if states is not None:
                diff = states[k + 1] - state.x_pred
                emp = float(diff @ diff)
            recs.append(
                StepRecord(
                    k=k,
                    trace=float(np.trace(v_cov)),
                    emp_sq_err=emp,
                    residual=equilibrium_residual(state.point, a),
                )
            )
            if recs[-1].trace > cfg.divergence_threshold:
                raise DivergenceError(
                    f"error covariance trace passed the divergence threshold at step {k}",
                    artifacts=RunArtifacts(records=recs, diverged=True),
                )
        out["lkf"] = FilterRun(mode="lkf", records=recs, filtered_means=means)
    return out


def default_boundedness_config(
    seed: int = 123,
    steps: int = 10_000,
    rank: int = 6,
) -> SimulationConfig:
    """The bundled n = 10 demonstration: 6 unstable modes, time-varying frame."""
    model = builtin_model("unstable10")
    return SimulationConfig(
        model=model,
        steps=steps,
        seed=seed,
        rank=rank,
        epsilon=0.01,
        substeps=8,
        mode="lkf",
    )


def default_rank_sweep_config(seed: int = 123, steps: int = 1) -> SimulationConfig:
    """The bundled symmetric n = 20 sweep system (steps unused by the sweep)."""
    model = builtin_model("symmetric20")
    return SimulationConfig(
        model=model,
        steps=steps,
        seed=seed,
        rank=10,
        epsilon=1.0,
        substeps=8,
        mode="lkf",
    )
