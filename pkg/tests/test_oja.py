"""Subspace flow: manifold preservation, convergence, and reduced matrices."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from lrkf.errors import NumericalError
from lrkf.harness import place_spectrum
from lrkf.model import ContinuousModel, lift
from lrkf.numerics import dominant_invariant_subspace, eig_sorted, principal_angles
from lrkf.oja import (
    StiefelPoint,
    converge,
    dominant_frame,
    equilibrium_residual,
    oja_integrate,
    oja_step,
    reduce_model,
    reduction_consistency,
    _qr_retract,
)


def angle_to(u, reference):
    return float(principal_angles(u, reference).max())


class TestStiefelPoint:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError, match="orthonormal"):
            StiefelPoint(U=np.ones((4, 2)))

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError, match="epsilon"):
            StiefelPoint(U=np.eye(4, 2), epsilon=0.0)

    def test_rejects_wide_frame(self):
        with pytest.raises(ValueError, match="rows"):
            StiefelPoint(U=np.eye(2, 3))


class TestOjaStep:
    def test_equilibrium_is_fixed(self):
        pt = StiefelPoint(U=np.array([[1.0], [0.0]]))
        a = np.diag([2.0, 1.0])
        stepped = oja_step(pt, a, dt=0.1)
        assert_allclose(stepped.U, pt.U, atol=1e-15)
        assert equilibrium_residual(pt, a) == 0.0

    def test_angle_contracts_toward_dominant_direction(self):
        # for A = diag(1,-1) the angle theta to e1 follows dtheta/dt = -sin(2 theta)/eps
        a = np.diag([1.0, -1.0])
        theta = np.pi / 4
        dt = 1e-4
        pt = StiefelPoint(U=np.array([[np.cos(theta)], [np.sin(theta)]]))
        stepped = oja_step(pt, a, dt)
        new_theta = np.arctan2(abs(stepped.U[1, 0]), stepped.U[0, 0])
        assert new_theta < theta
        predicted = theta - dt * np.sin(2 * theta)
        assert new_theta == pytest.approx(predicted, abs=5 * dt**2)

    def test_rayleigh_quotient_nondecreasing_for_symmetric(self, rng):
        b = rng.standard_normal((6, 6))
        a = 0.5 * (b + b.T)
        u = rng.standard_normal((6, 1))
        pt = StiefelPoint(U=u / np.linalg.norm(u))
        dt = 0.4 / np.linalg.norm(a, 2)
        values = []
        for _ in range(50):
            values.append(float(pt.U[:, 0] @ a @ pt.U[:, 0]))
            pt = oja_step(pt, a, dt)
        assert np.all(np.diff(values) >= -1e-12)

    def test_step_size_guard(self):
        pt = StiefelPoint(U=np.eye(4, 2))
        with pytest.raises(ValueError, match="Euler step too large"):
            oja_step(pt, 10.0 * np.eye(4), dt=0.5)

    def test_qr_retraction_detects_rank_loss(self):
        with pytest.raises(NumericalError, match="rank-deficient"):
            _qr_retract(np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]))


class TestIntegration:
    def test_equilibrium_unchanged(self):
        pt = StiefelPoint(U=np.eye(3, 2), substeps=8)
        out = oja_integrate(pt, np.diag([3.0, 2.0, 1.0]), interval=1.0)
        assert_allclose(out.U, pt.U, atol=1e-15)

    def test_deterministic(self, rng):
        a = rng.standard_normal((8, 8))
        a /= np.linalg.norm(a, 2)
        u0, _ = np.linalg.qr(rng.standard_normal((8, 3)))
        pt = StiefelPoint(U=u0, substeps=4)
        out1 = oja_integrate(pt, a, 0.8)
        out2 = oja_integrate(pt, a, 0.8)
        assert np.array_equal(out1.U, out2.U)

    def test_stiefel_preserved_over_many_steps(self, rng):
        a = rng.standard_normal((10, 10))
        a /= np.linalg.norm(a, 2)
        u0, _ = np.linalg.qr(rng.standard_normal((10, 4)))
        pt = StiefelPoint(U=u0, substeps=8)
        for _ in range(100):
            pt = oja_integrate(pt, a, 2.0)
        assert np.linalg.norm(pt.U.T @ pt.U - np.eye(4)) <= 1e-8


class TestConvergence:
    def test_converges_to_dominant_subspace(self, rng):
        # eigenvalues with a clear relative gap at rank 3
        a = place_spectrum([3.0, 2.4, 1.8, 0.7, -0.5, -1.2, -2.0, -3.0], rng)
        pt = dominant_frame(a, 3, tol=1e-10)
        reference = dominant_invariant_subspace(a, 3)
        assert angle_to(pt.U, reference) < 1e-6
        assert equilibrium_residual(pt, a) < 1e-8

    def test_escapes_unstable_equilibrium(self):
        a = np.diag([2.0, 1.0, -1.0])
        # e2 spans an invariant but non-dominant subspace: an unstable equilibrium
        u0 = np.array([[0.0], [1.0], [0.0]])
        assert equilibrium_residual(u0, a) == 0.0
        rng = np.random.default_rng(7)
        u0 = _qr_retract(u0 + 1e-6 * rng.standard_normal((3, 1)))
        pt = StiefelPoint(U=u0, substeps=8)
        pt, _ = converge(pt, a, interval=1.6, tol=1e-10, max_intervals=5000)
        assert angle_to(pt.U, np.array([[1.0], [0.0], [0.0]])) < 1e-6

    def test_gauge_freedom_of_residual(self, rng):
        # residual is invariant under right-multiplication by an orthogonal matrix
        a = place_spectrum([2.0, 1.0, -1.0, -2.0, -3.0, -4.0, -5.0], rng)
        pt = dominant_frame(a, 2)
        w, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        r1 = equilibrium_residual(pt.U, a)
        r2 = equilibrium_residual(pt.U @ w, a)
        assert abs(r1 - r2) <= 1e-10

    def test_demo_settings_converge(self, unstable10):
        # the bundled demo's frame settings: identity-block start, eps = 0.01
        pt = StiefelPoint(U=np.eye(10, 6), epsilon=0.01, substeps=8)
        pt, intervals = converge(pt, unstable10.A, interval=unstable10.h, tol=1e-8)
        assert equilibrium_residual(pt, unstable10.A) < 1e-6
        assert intervals < 5000


class TestReducedMatrices:
    def test_identity_block_projection(self):
        model = ContinuousModel(
            A=np.diag([1.0, 0.5, -0.5, -1.0]), G=np.eye(4), C=np.eye(4), H=np.eye(4), h=0.2
        )
        dm = lift(model)
        rm = reduce_model(np.eye(4, 2), dm)
        assert_allclose(rm.A_U, dm.A_d[:2, :2])
        assert_allclose(rm.C_U, dm.C[:, :2])
        assert_allclose(rm.G_U, dm.G_d[:2, :])

    def test_scalar_reduction_of_diagonal_model(self):
        model = ContinuousModel(
            A=np.diag([1.0, -2.0]), G=np.eye(2), C=np.array([[1.0, 1.0]]),
            H=np.array([[1.0]]), h=0.1,
        )
        dm = lift(model)
        pt = dominant_frame(model.A, 1, tol=1e-12)
        rm = reduce_model(pt, dm)
        assert_allclose(rm.A_U, [[np.exp(0.1)]], rtol=1e-10)

    def test_reduced_spectrum_matches_dominant_modes(self, rng):
        a = place_spectrum([2.5 + 0.5j, 2.5 - 0.5j, 1.5, 0.5, -1.0, -2.0, -3.0, -4.0], rng)
        model = ContinuousModel(A=a, G=np.eye(8), C=np.eye(8), H=np.eye(8), h=0.05)
        dm = lift(model)
        pt = dominant_frame(a, 4, tol=1e-11)
        lam_a = eig_sorted(a).eigenvalues[:4]
        # continuous projection keeps the dominant eigenvalues
        sub = np.linalg.eigvals(pt.U.T @ a @ pt.U)
        assert_allclose(np.sort_complex(sub), np.sort_complex(lam_a), rtol=1e-6, atol=1e-6)
        # sampled projection keeps their exponentials
        rm = reduce_model(pt, dm)
        sub_d = np.linalg.eigvals(rm.A_U)
        assert_allclose(
            np.sort_complex(sub_d), np.sort_complex(np.exp(lam_a * model.h)),
            rtol=1e-6, atol=1e-6,
        )

    def test_reduction_consistency_at_equilibrium(self, rng):
        a = place_spectrum([2.0, 1.2, 0.6, -0.8, -1.5, -2.5], rng)
        model = ContinuousModel(A=a, G=np.eye(6), C=np.eye(6), H=np.eye(6), h=0.1)
        dm = lift(model)
        pt = dominant_frame(a, 3, tol=1e-11)
        assert reduction_consistency(pt, a, model.h, dm) < 1e-6

    def test_full_rank_frame(self):
        a = np.diag([1.0, -1.0])
        pt = dominant_frame(a, 2)
        assert pt.U.shape == (2, 2)
        assert equilibrium_residual(pt, a) < 1e-12
