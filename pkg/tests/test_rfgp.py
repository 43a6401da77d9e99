import numpy as np
import pytest
from scipy.linalg import cho_solve

from batchscreen.errors import IllConditionedKernelError
from batchscreen.rfgp import (
    GpPosterior,
    RandomFeatureModel,
    SqExpKernel,
    build_random_feature_basis,
    chol_with_jitter,
    fit_sqexp_hyperparams,
    gp_fit,
    rf_eval,
    rf_fit,
    rf_posterior_sample,
)


def test_kernel_matrix_matches_closed_form():
    k = SqExpKernel(lengthscale=0.5, signal_variance=2.0)
    got = k.matrix(np.array([[0.1, 0.2]]), np.array([[0.4, 0.6]]))[0, 0]
    # sv * exp(-0.5 * 0.25 / 0.25), computed independently
    assert got == pytest.approx(1.2130613194252668, rel=1e-12)
    same = SqExpKernel(signal_variance=1.7).matrix(np.array([[3.0]]), np.array([[3.0]]))
    assert same[0, 0] == pytest.approx(1.7)


def test_kernel_rejects_bad_hyperparameters():
    for bad in (dict(lengthscale=0.0), dict(signal_variance=-1.0), dict(noise_variance=-0.1)):
        with pytest.raises(ValueError):
            SqExpKernel(**bad)


def test_chol_jitter_ladder():
    spd = np.array([[2.0, 0.3], [0.3, 1.0]])
    _, jitter = chol_with_jitter(spd)
    assert jitter == 0.0

    singular = np.ones((4, 4))
    chol, jitter = chol_with_jitter(singular)
    assert jitter > 0.0
    np.testing.assert_allclose(chol @ chol.T, singular + jitter * np.eye(4), atol=1e-12)

    with pytest.raises(IllConditionedKernelError):
        chol_with_jitter(-np.eye(3))


def test_empty_gp_is_the_prior():
    gp = GpPosterior(SqExpKernel(0.4, 1.3, 0.0), np.empty((0, 2)), np.empty(0))
    xq = np.array([[0.2, 0.2], [0.9, 0.1]])
    mean, var = gp.predict(xq)
    np.testing.assert_array_equal(mean, 0.0)
    np.testing.assert_array_equal(var, 1.3)
    jmean, jcov = gp.joint_predictive(xq)
    np.testing.assert_array_equal(jmean, 0.0)
    np.testing.assert_allclose(jcov, gp.kernel.matrix(xq, xq))
    assert gp.log_marginal_likelihood() == 0.0


def test_gp_posterior_matches_direct_inversion_oracle():
    gp = gp_fit(
        SqExpKernel(0.35, 1.2, 0.05),
        np.array([[0.1], [0.4], [0.9]]),
        np.array([0.3, -0.2, 0.7]),
    )
    mean, var = gp.predict(np.array([[0.5]]))
    assert mean[0] == pytest.approx(-0.11333170990693645, rel=1e-10)
    assert var[0] == pytest.approx(0.07667129037916176, rel=1e-10)
    assert gp.log_marginal_likelihood() == pytest.approx(-3.242045401275395, rel=1e-10)


def test_gp_interpolates_with_small_noise():
    x = np.array([[0.0], [0.3], [0.8]])
    y = np.array([1.0, -0.5, 0.25])
    gp = gp_fit(SqExpKernel(0.4, 1.0, 1e-8), x, y)
    mean, var = gp.predict(x)
    np.testing.assert_allclose(mean, y, atol=1e-4)
    assert np.all(var >= 0.0)


def test_joint_predictive_diagonal_is_pointwise_variance():
    rng = np.random.default_rng(0)
    x = rng.uniform(size=(6, 2))
    y = rng.standard_normal(6)
    gp = gp_fit(SqExpKernel(0.5, 1.0, 0.01), x, y)
    xq = rng.uniform(size=(4, 2))
    mean, var = gp.predict(xq)
    jmean, jcov = gp.joint_predictive(xq)
    np.testing.assert_allclose(jmean, mean, rtol=1e-12)
    np.testing.assert_allclose(np.diag(jcov), var, atol=1e-10)
    np.testing.assert_allclose(jcov, jcov.T, atol=1e-12)


def test_hyperfit_improves_on_a_mismatched_kernel():
    rng = np.random.default_rng(7)
    x = rng.uniform(size=(25, 1))
    truth = SqExpKernel(0.2, 1.0, 1e-6)
    chol, _ = chol_with_jitter(truth.matrix(x, x))
    y = chol @ rng.standard_normal(25)

    fitted = fit_sqexp_hyperparams(x, y, seed=3)
    bad = SqExpKernel(5.0, 0.01, fitted.noise_variance)
    assert (
        GpPosterior(fitted, x, y).log_marginal_likelihood()
        > GpPosterior(bad, x, y).log_marginal_likelihood()
    )
    again = fit_sqexp_hyperparams(x, y, seed=3)
    assert fitted == again
    assert fitted.noise_variance == pytest.approx(1e-6)


def test_basis_is_seed_deterministic():
    k = SqExpKernel(0.3, 1.0, 0.0)
    a = build_random_feature_basis(k, 2, 64, seed=11)
    b = build_random_feature_basis(k, 2, 64, seed=11)
    c = build_random_feature_basis(k, 2, 64, seed=12)
    np.testing.assert_array_equal(a.w, b.w)
    np.testing.assert_array_equal(a.b, b.b)
    assert not np.array_equal(a.w, c.w)
    assert a.m == 64 and a.dim == 2
    with pytest.raises(ValueError):
        build_random_feature_basis(k, 0, 64, seed=0)


def test_feature_map_scale_and_bound():
    k = SqExpKernel(0.25, 1.6, 0.0)
    basis = build_random_feature_basis(k, 3, 20000, seed=1)
    # frequencies scale inversely with the lengthscale
    assert basis.w.std() == pytest.approx(1.0 / 0.25, rel=0.05)
    p = basis.phi(np.random.default_rng(0).uniform(size=(10, 3)))
    assert np.all(np.abs(p) <= np.sqrt(2 * 1.6 / 20000) + 1e-12)


def test_feature_inner_products_approximate_the_kernel():
    k = SqExpKernel(0.3, 1.0, 0.0)
    basis = build_random_feature_basis(k, 2, 4000, seed=2)
    rng = np.random.default_rng(5)
    x1, x2 = rng.uniform(size=(2, 40, 2))
    approx = np.einsum("ij,ij->i", basis.phi(x1), basis.phi(x2))
    exact = np.array([k.matrix(a, b)[0, 0] for a, b in zip(x1, x2)])
    assert np.abs(approx - exact).max() < 0.08


class _StubBasis:
    """Fixed design matrix in place of the cosine map, for linear-algebra checks."""

    def __init__(self, phi_matrix: np.ndarray, noise_variance: float):
        self._phi = phi_matrix
        self.m = phi_matrix.shape[1]
        self.kernel = SqExpKernel(1.0, 1.0, noise_variance)

    def phi(self, x):
        return self._phi


def test_weight_posterior_matches_direct_inversion_oracle():
    rng = np.random.default_rng(42)
    phi = rng.standard_normal((5, 3))
    y = rng.standard_normal(5)
    # total observation noise 0.1 = kernel noise + the internal floor
    from batchscreen.rfgp import NOISE_FLOOR

    model = rf_fit(_StubBasis(phi, 0.1 - NOISE_FLOOR), np.zeros((5, 1)), y)
    np.testing.assert_allclose(
        model.mean,
        [-0.9071153521549957, 0.0909274057206455, -0.6909478828975664],
        rtol=1e-9,
    )
    cov = cho_solve((model.precision_chol, True), np.eye(3))
    np.testing.assert_allclose(
        np.diag(cov),
        [0.17377135340574582, 0.039569054232847845, 0.06022208287069054],
        rtol=1e-9,
    )


def test_rf_fit_with_no_data_returns_prior():
    basis = build_random_feature_basis(SqExpKernel(0.3, 1.0, 0.0), 2, 16, seed=0)
    model = rf_fit(basis, np.empty((0, 2)), np.empty(0))
    np.testing.assert_array_equal(model.mean, 0.0)
    np.testing.assert_array_equal(model.precision_chol, np.eye(16))
    mean, var = model.predict(np.array([[0.5, 0.5]]))
    assert mean[0] == pytest.approx(0.0)
    p = basis.phi(np.array([[0.5, 0.5]]))
    assert var[0] == pytest.approx((p @ p.T).item(), rel=1e-10)


def test_posterior_draw_moments_match_the_posterior():
    rng = np.random.default_rng(3)
    phi = rng.standard_normal((8, 3))
    y = rng.standard_normal(8)
    model = rf_fit(_StubBasis(phi, 0.05), np.zeros((8, 1)), y)
    draws = np.array([model.posterior_sample(seed=s) for s in range(3000)])
    cov = cho_solve((model.precision_chol, True), np.eye(3))
    np.testing.assert_allclose(draws.mean(axis=0), model.mean, atol=0.05)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.05)

    np.testing.assert_array_equal(model.posterior_sample(9), model.posterior_sample(9))
    assert not np.array_equal(model.posterior_sample(9), model.posterior_sample(10))


def test_payload_round_trip_is_exact():
    basis = build_random_feature_basis(SqExpKernel(0.4, 1.5, 0.01), 2, 12, seed=6)
    rng = np.random.default_rng(1)
    model = rf_fit(basis, rng.uniform(size=(5, 2)), rng.standard_normal(5))
    back = RandomFeatureModel.from_payload(model.to_payload())
    np.testing.assert_array_equal(back.mean, model.mean)
    np.testing.assert_array_equal(back.precision_chol, model.precision_chol)
    np.testing.assert_array_equal(back.basis.w, basis.w)
    np.testing.assert_array_equal(back.basis.b, basis.b)
    assert back.basis.kernel == basis.kernel
    np.testing.assert_array_equal(back.posterior_sample(4), model.posterior_sample(4))


def test_rf_eval_and_sampling_wrapper():
    basis = build_random_feature_basis(SqExpKernel(0.3, 1.0, 0.0), 1, 10, seed=0)
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(4, 1))
    y = rng.standard_normal(4)
    theta = rf_posterior_sample(basis, x, y, seed=5)
    np.testing.assert_array_equal(theta, rf_fit(basis, x, y).posterior_sample(5))
    xq = rng.uniform(size=(6, 1))
    np.testing.assert_allclose(rf_eval(theta, basis, xq), basis.phi(xq) @ theta)


def test_rf_predictions_track_the_exact_gp():
    # with many features the linear model's predictive moments approach the GP's
    kernel = SqExpKernel(0.3, 1.0, 1e-6)
    rng = np.random.default_rng(8)
    x = rng.uniform(size=(12, 1))
    gp = gp_fit(kernel, x, np.sin(6 * x[:, 0]))
    basis = build_random_feature_basis(kernel, 1, 4000, seed=3)
    rf = rf_fit(basis, x, np.sin(6 * x[:, 0]))
    xq = rng.uniform(size=(15, 1))
    gp_mean, gp_var = gp.predict(xq)
    rf_mean, rf_var = rf.predict(xq)
    np.testing.assert_allclose(rf_mean, gp_mean, atol=0.05)
    np.testing.assert_allclose(rf_var, gp_var, atol=0.05)
