import numpy as np
import pytest
import scipy.linalg

from modelkit.data_model import ols_fit, sample_moments
from modelkit.envelope import (
    EnvelopeError, build_envelope, check_envelope_conditions, envelope_from_krylov,
    random_envelope, reconstruction_error, sample_from_envelope,
)
from modelkit.errors import DataError
from modelkit.pls_population import (
    PopulationRegression, check_equivalence, random_model, random_orthogonal,
)


class TestBuild:
    def test_axis_aligned(self):
        spec = build_envelope([[1.0], [0.0]], [[2.0]], [[3.0]], [5.0])
        np.testing.assert_allclose(spec.sigma_x, np.diag([2.0, 3.0]), atol=1e-14)
        np.testing.assert_allclose(spec.b[:, 0], [5.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(np.abs(spec.phi0[:, 0]), [0.0, 1.0], atol=1e-14)

    def test_full_envelope(self):
        Q = random_orthogonal(np.random.default_rng(0), 3)
        delta = np.diag([1.0, 2.0, 3.0])
        spec = build_envelope(Q, delta, np.zeros((0, 0)), [1.0, 0.0, 0.0])
        assert spec.phi0.shape == (3, 0)
        np.testing.assert_allclose(spec.sigma_x, Q @ delta @ Q.T, atol=1e-14)

    @pytest.mark.parametrize("deg", [0.0, 30.0, 77.0])
    def test_rotation_keeps_eigenvalues(self, deg):
        t = np.deg2rad(deg)
        R = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        spec = build_envelope(R[:, :1], [[2.0]], [[3.0]], [1.0])
        np.testing.assert_allclose(np.linalg.eigvalsh(spec.sigma_x), [2.0, 3.0], rtol=1e-12)

    def test_orthogonality_invariant(self):
        spec = random_envelope(np.random.default_rng(1), 6, 2)
        F = np.hstack([spec.phi, spec.phi0])
        assert np.max(np.abs(F.T @ F - np.eye(6))) <= 1e-10

    def test_non_orthonormal_phi(self):
        with pytest.raises(EnvelopeError, match="orthonormal"):
            build_envelope([[1.0], [0.1]], [[2.0]], [[3.0]], [1.0])

    @pytest.mark.parametrize("delta,delta0", [([[-1.0]], [[3.0]]), ([[2.0]], [[0.0]])])
    def test_non_spd_blocks(self, delta, delta0):
        with pytest.raises(EnvelopeError, match="positive definite"):
            build_envelope([[1.0], [0.0]], delta, delta0, [1.0])

    def test_eta_shape(self):
        with pytest.raises(DataError):
            build_envelope([[1.0], [0.0]], [[2.0]], [[3.0]], [[1.0], [2.0]])


class TestFromKrylov:
    def test_diag_421(self):
        model = PopulationRegression(np.diag([4.0, 2.0, 1.0]), [1.0, 0.0, 1.0])
        spec = envelope_from_krylov(model)
        assert spec.m == 2
        assert reconstruction_error(spec, model.sigma_x) <= 1e-10
        # the envelope is span(e1, e3)
        np.testing.assert_allclose(np.abs(spec.phi0[:, 0]), [0.0, 1.0, 0.0], atol=1e-12)

    def test_identity(self):
        model = PopulationRegression(np.eye(4), [1.0, 2.0, 0.0, 0.0])
        spec = envelope_from_krylov(model)
        assert spec.m == 1
        np.testing.assert_allclose(spec.delta, [[1.0]], atol=1e-14)
        np.testing.assert_allclose(spec.delta0, np.eye(3), atol=1e-14)

    def test_zero_beta(self):
        with pytest.raises(EnvelopeError, match="empty envelope"):
            envelope_from_krylov(PopulationRegression(np.eye(3), [0.0, 0.0, 0.0]))

    def test_eta_reproduces_beta(self):
        model = random_model(np.random.default_rng(3), 6, 3)
        spec = envelope_from_krylov(model)
        np.testing.assert_allclose(spec.b[:, 0], model.beta, atol=1e-10)


class TestConditions:
    def test_non_reducing(self):
        S = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]])
        r = check_envelope_conditions(S, [1.0, 0.0, 0.0], [[1.0], [0.0], [0.0]])
        assert r == {"contains_b": True, "reducing": False}

    def test_b_outside(self):
        r = check_envelope_conditions(np.eye(2), [0.0, 1.0], [[1.0], [0.0]])
        assert not r["contains_b"] and r["reducing"]

    def test_whole_space(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((4, 4))
        r = check_envelope_conditions(A @ A.T + np.eye(4), rng.standard_normal(4),
                                      random_orthogonal(rng, 4))
        assert r == {"contains_b": True, "reducing": True}


@pytest.mark.parametrize("seed", range(60))
def test_round_trip_and_dimension(seed):
    rng = np.random.default_rng(seed)
    p = 1 + seed % 8
    model = random_model(rng, p, 1 + int(rng.integers(0, p)))
    spec = envelope_from_krylov(model)
    assert check_envelope_conditions(model.sigma_x, model.beta, spec.phi, tol=1e-8) == {
        "contains_b": True, "reducing": True}
    assert spec.m == check_equivalence(model).krylov_dim


@pytest.mark.parametrize("seed", range(20))
def test_rotation_equivariance(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, 5, 2 + seed % 3)
    R = random_orthogonal(rng, 5)
    rotated = PopulationRegression(R @ model.sigma_x @ R.T, R @ model.beta)
    a = envelope_from_krylov(model).phi
    b = envelope_from_krylov(rotated).phi
    assert np.max(scipy.linalg.subspace_angles(R @ a, b)) <= 1e-8


class TestSampling:
    def test_deterministic(self):
        spec = random_envelope(np.random.default_rng(5), 4, 2)
        a = sample_from_envelope(spec, 50, 1.0, seed=9)
        b = sample_from_envelope(spec, 50, 1.0, seed=9)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)

    def test_covariance_large_n(self):
        spec = random_envelope(np.random.default_rng(6), 3, 1)
        d = sample_from_envelope(spec, 100_000, 1.0, seed=1)
        S = sample_moments(d).cov_xx
        assert np.linalg.norm(S - spec.sigma_x) <= 0.05 * np.linalg.norm(spec.sigma_x)

    def test_near_noiseless_ols(self):
        spec = random_envelope(np.random.default_rng(7), 5, 2)
        beta, _ = ols_fit(sample_from_envelope(spec, 40, 1e-8, seed=2))
        assert np.max(np.abs(beta - spec.b[:, 0])) <= 1e-3

    @pytest.mark.parametrize("n,noise", [(1, 1.0), (10, 0.0)])
    def test_bad_arguments(self, n, noise):
        spec = random_envelope(np.random.default_rng(8), 3, 1)
        with pytest.raises(DataError):
            sample_from_envelope(spec, n, noise, seed=0)
