"""Low-rank Kalman filtering for sampled continuous-time linear systems.

The package splits into dense kernels (:mod:`lrkf.numerics`), system
containers and lifting (:mod:`lrkf.model`), subspace tracking on the Stiefel
manifold (:mod:`lrkf.oja`), the reference full-order filter
(:mod:`lrkf.kalman`), the low-rank filter with its stability analysis
(:mod:`lrkf.lowrank`), per-step cost models (:mod:`lrkf.complexity`), and a
seeded experiment harness with CSV and figure output (:mod:`lrkf.harness`,
:mod:`lrkf.io`, :mod:`lrkf.plotting`, :mod:`lrkf.cli`).
"""
from .errors import ConvergenceError, DivergenceError, NumericalError
from .model import ContinuousModel, DiscreteModel, SystemDiagnostics, diagnose, lift
from .kalman import KFState, SteadyKF, kf_init, kf_step, kf_steady
from .lowrank import (
    LKFState,
    StabilityReport,
    SteadyLKF,
    closed_loop_spectrum,
    error_cov_step,
    lkf_gain,
    lkf_gain_direct,
    lkf_init,
    lkf_step,
    lkf_steady,
    stability_verdict,
)
from .oja import (
    ReducedMatrices,
    StiefelPoint,
    converge,
    dominant_frame,
    equilibrium_residual,
    oja_integrate,
    oja_step,
    reduce_model,
    reduction_consistency,
)
from .numerics import (
    Spectrum,
    dominant_invariant_subspace,
    eig_sorted,
    expm,
    noise_gramian,
    principal_angles,
    psd_sqrt,
)
from .harness import (
    GaussianStream,
    RankSweepResult,
    RunArtifacts,
    SimulationConfig,
    StepRecord,
    builtin_model,
    empirical_mse_curve,
    place_spectrum,
    random_system,
    run_boundedness_experiment,
    run_filter,
    run_rank_sweep,
    simulate_trajectory,
    steady_error_covariance,
)
from .complexity import (
    BoundaryPoint,
    CostQuery,
    boundary_curve,
    crossover_rank,
    flops_if,
    flops_kf,
    flops_lkf,
)

__version__ = "0.1.0"
