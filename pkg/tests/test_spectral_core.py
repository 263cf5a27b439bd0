import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradlab import (
    DenseProblem,
    DomainError,
    GradientVector,
    SpectralProblem,
    StructuralError,
    error_vector,
    fgap,
    gradient_step,
    run_method,
    sd_rule,
    spectralize,
)
from conftest import assert_ulp


class TestSpectralProblem:
    def test_basic_properties(self):
        p = SpectralProblem(np.array([1.0, 8.0, 16.0]))
        assert p.n == 3
        assert p.lam1 == 1.0
        assert p.lamn == 16.0
        assert p.kappa == 16.0
        assert not p.has_duplicate_eigenvalues

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            SpectralProblem(np.array([0.0, 1.0]))
        with pytest.raises(DomainError):
            SpectralProblem(np.array([-1.0, 1.0]))

    def test_rejects_unsorted(self):
        with pytest.raises(StructuralError):
            SpectralProblem(np.array([2.0, 1.0]))

    def test_duplicates_flagged_not_rejected(self):
        p = SpectralProblem(np.array([1.0, 2.0, 2.0]))
        assert p.has_duplicate_eigenvalues

    def test_immutable(self):
        p = SpectralProblem(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            p.eigenvalues[0] = 5.0


class TestGradientStep:
    def test_annihilates_component(self):
        # alpha = 1/lambda_1 zeroes the first component exactly.
        p = SpectralProblem(np.array([1.0, 2.0]))
        g = GradientVector(np.array([1.0, 1.0]), 0)
        out = gradient_step(g, 1.0, p)
        assert out.k == 1
        assert out.components[0] == 0.0
        assert out.components[1] == -1.0

    def test_counterexample_first_step(self):
        # Reference values quoted to four decimals; 5e-5 absolute covers that rounding.
        p = SpectralProblem(np.array([1.0, 8.0, 16.0]))
        g = GradientVector(np.array([1.0, math.sqrt(40.0), math.sqrt(40.0)]), 0)
        out = gradient_step(g, 81.0 / 961.0, p)
        expected = np.array([0.9157, 2.0599, -2.2047])
        assert np.max(np.abs(out.components - expected)) < 5e-5

    def test_plain_arithmetic(self):
        p = SpectralProblem(np.array([1.0, 2.0]))
        g = GradientVector(np.array([3.0, 0.0]), 0)
        out = gradient_step(g, 0.25, p)
        assert out.components[0] == 2.25
        assert out.components[1] == 0.0

    def test_dimension_mismatch(self):
        p = SpectralProblem(np.array([1.0, 2.0]))
        with pytest.raises(StructuralError):
            gradient_step(GradientVector(np.array([1.0]), 0), 0.5, p)

    def test_nonpositive_alpha(self):
        p = SpectralProblem(np.array([1.0, 2.0]))
        g = GradientVector(np.array([1.0, 1.0]), 0)
        with pytest.raises(DomainError):
            gradient_step(g, 0.0, p)
        with pytest.raises(DomainError):
            gradient_step(g, -0.1, p)


class TestFgap:
    def test_zero_gradient(self):
        p = SpectralProblem(np.array([1.0, 2.0]))
        assert fgap(GradientVector(np.zeros(2), 0), p) == 0.0

    def test_hand_values(self):
        # 1/2 (4/1 + 4/2) = 3 and 1/2 * 16/8 = 1, both exact in binary.
        p = SpectralProblem(np.array([1.0, 2.0]))
        assert fgap(GradientVector(np.array([2.0, 2.0]), 0), p) == 3.0
        p2 = SpectralProblem(np.array([1.0, 8.0]))
        assert fgap(GradientVector(np.array([0.0, 4.0]), 0), p2) == 1.0

    def test_dimension_mismatch(self):
        p = SpectralProblem(np.array([1.0, 2.0]))
        with pytest.raises(StructuralError):
            fgap(GradientVector(np.array([1.0, 1.0, 1.0]), 0), p)


class TestErrorVector:
    def test_values(self):
        p = SpectralProblem(np.array([1.0, 8.0]))
        assert np.array_equal(
            error_vector(GradientVector(np.array([0.0, 0.0]), 0), p), np.zeros(2)
        )
        assert np.array_equal(
            error_vector(GradientVector(np.array([2.0, 8.0]), 0), p), np.array([2.0, 1.0])
        )
        p3 = SpectralProblem(np.array([1.0, 8.0, 16.0]))
        out = error_vector(GradientVector(np.array([1.0, 1.0, 1.0]), 0), p3)
        assert np.array_equal(out, np.array([1.0, 0.125, 0.0625]))


class TestTrajectoryInvariants:
    def test_recurrence_is_exact(self):
        p = SpectralProblem(np.logspace(0, 2, 8))
        rng = np.random.default_rng(5)
        res = run_method(p, rng.standard_normal(8), sd_rule(), 60)
        assert res.trajectory.max_recurrence_ulp() == 0.0

    def test_recurrence_recomputed_in_python(self):
        # Same formula evaluated with scalar arithmetic must agree to 4 ulp.
        p = SpectralProblem(np.array([1.0, 3.0, 9.0]))
        res = run_method(p, np.array([1.0, -0.5, 2.0]), sd_rule(), 30)
        traj = res.trajectory
        for k, alpha in enumerate(traj.stepsizes):
            for i, lam in enumerate(p.eigenvalues):
                expected = (1.0 - alpha * float(lam)) * float(traj.gradients[k].components[i])
                assert_ulp(expected, float(traj.gradients[k + 1].components[i]), 4.0)

    def test_fgap_monotone_under_sd(self):
        p = SpectralProblem(np.logspace(0, 3, 10))
        rng = np.random.default_rng(11)
        res = run_method(p, rng.standard_normal(10), sd_rule(), 200)
        gaps = np.array(res.trajectory.fgaps)
        assert np.all(np.diff(gaps) <= 0.0)

    @given(
        inv_frac=st.floats(min_value=0.0, max_value=1.0),
        comp=st.floats(min_value=-1e6, max_value=1e6),
    )
    @settings(max_examples=300, deadline=None)
    def test_contraction_factor_bound(self, inv_frac, comp):
        # |1 - alpha*lambda_i| <= sigma_i whenever lambda_1 <= 1/alpha <= M1.
        lam = np.array([1.0, 3.0, 20.0])
        m1 = 40.0
        inv_alpha = 1.0 + inv_frac * (m1 - 1.0)
        alpha = 1.0 / inv_alpha
        sigma = np.maximum(lam / lam[0] - 1.0, 1.0 - lam / m1)
        for lam_i, sig_i in zip(lam, sigma):
            after = abs((1.0 - alpha * lam_i) * comp)
            assert after <= sig_i * abs(comp) * (1.0 + 1e-12) + 1e-300


class TestDenseProblem:
    def test_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            DenseProblem(np.array([[1.0, 0.5], [0.2, 1.0]]), np.zeros(2))

    def test_rejects_bad_shapes(self):
        with pytest.raises(StructuralError):
            DenseProblem(np.ones((2, 3)), np.zeros(2))
        with pytest.raises(StructuralError):
            DenseProblem(np.eye(2), np.zeros(3))


class TestSpectralize:
    def test_identity_matrix(self):
        res = spectralize(DenseProblem(np.eye(4), np.zeros(4)))
        assert np.array_equal(res.problem.eigenvalues, np.ones(4))
        recon = (res.basis * res.problem.eigenvalues) @ res.basis.T
        assert np.array_equal(recon, np.eye(4))

    def test_sorts_diagonal(self):
        res = spectralize(DenseProblem(np.diag([2.0, 1.0]), np.zeros(2)))
        assert np.array_equal(res.problem.eigenvalues, np.array([1.0, 2.0]))
        # Q must be the swap permutation up to sign.
        assert np.allclose(np.abs(res.basis), np.array([[0.0, 1.0], [1.0, 0.0]]))

    @pytest.mark.parametrize("n,seed", [(3, 0), (5, 1), (12, 2), (25, 3), (50, 4)])
    def test_random_spd_reconstruction(self, n, seed):
        rng = np.random.default_rng(seed)
        basis = np.linalg.qr(rng.standard_normal((n, n)))[0]
        lam = np.sort(rng.uniform(0.5, 50.0, n))
        a = (basis * lam) @ basis.T
        a = 0.5 * (a + a.T)
        res = spectralize(DenseProblem(a, rng.standard_normal(n)))
        recon = (res.basis * res.problem.eigenvalues) @ res.basis.T
        scale = np.linalg.norm(a, "fro")
        assert np.linalg.norm(recon - a, "fro") <= 1e-10 * scale
        # Columns orthonormal.
        assert np.linalg.norm(res.basis.T @ res.basis - np.eye(n)) <= 1e-12 * n

    def test_eigenvalues_match_numpy(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((8, 8))
        a = a @ a.T + 8 * np.eye(8)
        res = spectralize(DenseProblem(a, np.zeros(8)))
        expected = np.sort(np.linalg.eigvalsh(a))
        assert np.max(np.abs(res.problem.eigenvalues - expected)) <= 1e-10 * expected[-1]

    def test_rejects_indefinite(self):
        with pytest.raises(DomainError, match="eigenvalue"):
            spectralize(DenseProblem(np.diag([1.0, -2.0]), np.zeros(2)))

    def test_gradient_transform(self):
        rng = np.random.default_rng(21)
        a = rng.standard_normal((4, 4))
        a = a @ a.T + 4 * np.eye(4)
        b = rng.standard_normal(4)
        res = spectralize(DenseProblem(a, b))
        x0 = rng.standard_normal(4)
        g_spec = res.initial_gradient(x0)
        assert g_spec.k == 0
        # Norm is invariant under the orthogonal change of basis.
        assert math.isclose(g_spec.norm(), float(np.linalg.norm(a @ x0 - b)), rel_tol=1e-12)
