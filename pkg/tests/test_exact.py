import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cgpkit.exact import (
    DataSegment,
    GaussianBelief,
    fisher_information,
    gp_posterior,
    log_marginal_likelihood,
    ml_estimate,
    pack_params,
    param_names,
    prior_belief,
    unpack_params,
)
from cgpkit.errors import DimensionMismatch, InvalidInput
from cgpkit.kernels import Hyperparams, KernelSpec, MeanSpec, cov_matrix, mean_vector
from cgpkit.rng import make_rng

from conftest import FAMILIES, make_spec, random_inputs


def joint_conditioning_oracle(spec, mean, segment, test_X):
    """Dense conditioning on the full (test + train) joint with explicit inverses."""
    xt = np.asarray(test_X, dtype=float).reshape(-1, spec.input_dim)
    m = xt.shape[0]
    stacked = np.vstack([xt, segment.X])
    k = cov_matrix(spec, stacked)
    k[m:, m:] += spec.params.noise_var * np.eye(segment.n)
    mu = np.concatenate([mean_vector(mean, xt), mean_vector(mean, segment.X)])
    syy_inv = np.linalg.inv(k[m:, m:])
    post_mean = mu[:m] + k[:m, m:] @ syy_inv @ (segment.y - mu[m:])
    post_cov = k[:m, :m] - k[:m, m:] @ syy_inv @ k[m:, :m]
    return post_mean, post_cov


def dense_lml_oracle(spec, mean, segment):
    sigma = cov_matrix(spec, segment.X) + spec.params.noise_var * np.eye(segment.n)
    resid = segment.y - mean_vector(mean, segment.X)
    sign, logdet = np.linalg.slogdet(sigma)
    assert sign > 0
    return (
        -0.5 * resid @ np.linalg.inv(sigma) @ resid
        - 0.5 * logdet
        - 0.5 * segment.n * math.log(2 * math.pi)
    )


class TestGpPosterior:
    def test_no_data_returns_prior(self, rng):
        spec = make_spec("SquaredExponential", rng)
        xt = random_inputs(rng, spec.family, 4)
        prior = prior_belief(spec, MeanSpec(), xt)
        post = gp_posterior(prior, spec, MeanSpec(), None, xt)
        assert post is prior

    def test_interpolates_noise_free_point(self):
        spec = KernelSpec.from_natural(
            "SquaredExponential", {"amplitude": 1.0, "lengthscale": 2.0}, 1e-12
        )
        seg = DataSegment(np.array([1.0, 4.0]), np.array([0.7, -0.2]))
        post = gp_posterior(None, spec, MeanSpec(), seg, np.array([1.0]))
        assert post.mean[0] == pytest.approx(0.7, abs=1e-5)
        assert post.variances()[0] <= 1e-7

    @pytest.mark.parametrize("family", FAMILIES)
    def test_matches_joint_conditioning_oracle(self, family):
        rng = np.random.default_rng(11)
        for _ in range(5):
            spec = make_spec(family, rng)
            mean = MeanSpec("Linear", 0.01, 0.5) if family != "SE2D-ARD" else MeanSpec()
            x = random_inputs(rng, family, 10)
            y = rng.standard_normal(10)
            seg = DataSegment(x, y)
            xt = random_inputs(rng, family, 3)
            post = gp_posterior(None, spec, mean, seg, xt)
            om, oc = joint_conditioning_oracle(spec, mean, seg, xt)
            scale = 1.0 + np.abs(om).max()
            assert np.abs(post.mean - om).max() <= 1e-8 * scale
            assert np.abs(post.cov - oc).max() <= 1e-8 * (1.0 + np.abs(oc).max())

    def test_posterior_variance_never_exceeds_prior(self, rng):
        for family in FAMILIES:
            spec = make_spec(family, rng)
            x = random_inputs(rng, family, 20)
            seg = DataSegment(x, rng.standard_normal(20))
            xt = random_inputs(rng, family, 5)
            prior = prior_belief(spec, MeanSpec(), xt)
            post = gp_posterior(None, spec, MeanSpec(), seg, xt)
            assert np.all(post.variances() <= prior.variances() + 1e-8)

    def test_exchangeable_in_training_order(self, rng):
        spec = make_spec("SquaredExponential", rng)
        x = random_inputs(rng, spec.family, 15)
        y = rng.standard_normal(15)
        xt = random_inputs(rng, spec.family, 4)
        perm = rng.permutation(15)
        a = gp_posterior(None, spec, MeanSpec(), DataSegment(x, y), xt)
        b = gp_posterior(None, spec, MeanSpec(), DataSegment(x[perm], y[perm]), xt)
        assert np.abs(a.mean - b.mean).max() <= 1e-10
        assert np.abs(a.cov - b.cov).max() <= 1e-10

    def test_dimension_mismatch(self, rng):
        spec = make_spec("SquaredExponential", rng)
        prior = GaussianBelief(np.zeros(2), np.eye(2))
        with pytest.raises(DimensionMismatch):
            gp_posterior(prior, spec, MeanSpec(), None, np.zeros((3, 1)))


class TestLogMarginalLikelihood:
    def test_standard_normal_single_point(self):
        # amplitude^2 + noise = 1 makes the marginal a standard normal
        spec = KernelSpec.from_natural(
            "SquaredExponential", {"amplitude": math.sqrt(0.5), "lengthscale": 1.0}, 0.5
        )
        value, _ = log_marginal_likelihood(spec, MeanSpec(), DataSegment([0.0], [0.0]))
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-12)

    def test_matches_dense_oracle(self, rng):
        spec = make_spec("SquaredExponential", rng)
        x = random_inputs(rng, spec.family, 8)
        seg = DataSegment(x, rng.standard_normal(8))
        value, _ = log_marginal_likelihood(spec, MeanSpec(), seg)
        assert value == pytest.approx(dense_lml_oracle(spec, MeanSpec(), seg), rel=1e-9)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_gradient_matches_finite_differences(self, family):
        rng = np.random.default_rng(23)
        mean = MeanSpec("Linear", 0.05, 0.2) if family != "SE2D-ARD" else MeanSpec()
        for _ in range(10):
            spec = make_spec(family, rng)
            x = random_inputs(rng, family, 9, spread=8.0)
            seg = DataSegment(x, rng.standard_normal(9))
            _, grad = log_marginal_likelihood(spec, mean, seg)
            vec = pack_params(spec.params, mean)
            h = 1e-5
            fd = np.empty_like(vec)
            for i in range(vec.size):
                up, dn = vec.copy(), vec.copy()
                up[i] += h
                dn[i] -= h
                sp_u, mn_u = unpack_params(up, spec, mean)
                sp_d, mn_d = unpack_params(dn, spec, mean)
                fd[i] = (
                    log_marginal_likelihood(sp_u, mn_u, seg)[0]
                    - log_marginal_likelihood(sp_d, mn_d, seg)[0]
                ) / (2 * h)
            assert np.linalg.norm(grad - fd) <= 1e-5 * (1.0 + np.linalg.norm(grad))


class TestMlEstimate:
    def test_recovers_generating_parameters(self):
        truth = KernelSpec.from_natural(
            "SquaredExponential", {"amplitude": 1.0, "lengthscale": 2.0}, 0.04
        )
        rng = make_rng(101)
        x = np.arange(200.0).reshape(-1, 1)
        k = cov_matrix(truth, x) + truth.params.noise_var * np.eye(200)
        y = np.linalg.cholesky(k) @ rng.standard_normal(200)
        seg = DataSegment(x, y)
        init = Hyperparams(np.zeros(2), truth.params.names, math.log(0.1))
        fit = ml_estimate(truth, MeanSpec(), seg, init)
        assert fit.converged
        # within the 3-sigma ellipse of the inverse FIM at the truth
        fim = fisher_information(truth, MeanSpec(), seg)
        delta = pack_params(fit.theta, fit.mean) - pack_params(truth.params, MeanSpec())
        quad = float(delta @ fim.matrix @ delta)
        assert quad <= 9.0

    def test_init_at_truth_never_degrades(self, rng):
        spec = make_spec("SquaredExponential", rng)
        seg = DataSegment(np.array([0.0, 1.0, 2.0]), np.array([0.1, -0.2, 0.3]))
        value0, _ = log_marginal_likelihood(spec, MeanSpec(), seg)
        fit = ml_estimate(spec, MeanSpec(), seg, spec.params)
        assert fit.objective >= value0 - 1e-12

    def test_basin_agreement_across_inits(self):
        truth = KernelSpec.from_natural(
            "SquaredExponential", {"amplitude": 1.2, "lengthscale": 3.0}, 0.09
        )
        rng = make_rng(7)
        x = (np.arange(500.0) * 0.5).reshape(-1, 1)
        k = cov_matrix(truth, x) + truth.params.noise_var * np.eye(500)
        y = np.linalg.cholesky(k) @ rng.standard_normal(500)
        seg = DataSegment(x, y)
        names = truth.params.names
        fit1 = ml_estimate(truth, MeanSpec(), seg, Hyperparams(np.zeros(2), names, 0.0))
        fit2 = ml_estimate(
            truth, MeanSpec(), seg, Hyperparams(np.array([0.4, 0.9]), names, -1.5)
        )
        assert fit1.objective == pytest.approx(fit2.objective, abs=1e-4)

    def test_deterministic(self, rng):
        spec = make_spec("SquaredExponential", rng)
        x = random_inputs(rng, spec.family, 40)
        seg = DataSegment(x, rng.standard_normal(40))
        init = Hyperparams(np.array([0.1, 0.1]), spec.params.names, -1.0)
        fit1 = ml_estimate(spec, MeanSpec(), seg, init)
        fit2 = ml_estimate(spec, MeanSpec(), seg, init)
        assert_allclose(
            pack_params(fit1.theta, fit1.mean), pack_params(fit2.theta, fit2.mean),
            rtol=0, atol=0,
        )


class TestFisherInformation:
    def test_pure_noise_log_variance_entry(self):
        # With a vanishing signal the model is y ~ N(0, sigma^2 I); the
        # classical information for log sigma^2 from N observations is N/2.
        n = 50
        spec = KernelSpec.from_natural(
            "SquaredExponential", {"amplitude": 1e-8, "lengthscale": 2.0}, 0.3
        )
        seg = DataSegment(np.arange(float(n)), np.zeros(n))
        fim = fisher_information(spec, MeanSpec(), seg)
        noise_idx = fim.names.index("log_noise_var")
        assert fim.matrix[noise_idx, noise_idx] == pytest.approx(n / 2, rel=1e-4)

    def test_matches_score_covariance(self):
        # Monte-Carlo oracle: the FIM equals the covariance of the score
        # at the true parameters.
        spec = KernelSpec.from_natural(
            "SquaredExponential", {"amplitude": 1.0, "lengthscale": 2.0}, 0.1
        )
        x = np.arange(40.0).reshape(-1, 1)
        sigma = cov_matrix(spec, x) + spec.params.noise_var * np.eye(40)
        lower = np.linalg.cholesky(sigma)
        rng = make_rng(5)
        n_sims = 3000
        draws = lower @ rng.standard_normal((40, n_sims))
        scores = np.empty((n_sims, 3))
        from cgpkit.kernels import kernel_grad

        grads = kernel_grad(spec, x)
        sinv = np.linalg.inv(sigma)
        alpha = sinv @ draws
        for i, g in enumerate(grads):
            trace_term = 0.5 * float(np.sum(sinv * g))
            scores[:, i] = 0.5 * np.sum(alpha * (g @ alpha), axis=0) - trace_term
        mc_fim = np.cov(scores.T)
        fim = fisher_information(spec, MeanSpec(), DataSegment(x, draws[:, 0]))
        assert_allclose(np.diag(fim.matrix), np.diag(mc_fim), rtol=0.10)

    def test_zero_mean_kernel_rows_lack_mean_term(self, rng):
        # Mean coefficients only enter their own block; kernel-parameter
        # entries are unchanged by switching Zero -> Linear(0, 0).
        spec = make_spec("SquaredExponential", rng)
        x = random_inputs(rng, spec.family, 12)
        seg = DataSegment(x, rng.standard_normal(12))
        f_zero = fisher_information(spec, MeanSpec(), seg)
        f_lin = fisher_information(spec, MeanSpec("Linear", 0.0, 0.0), seg)
        assert f_lin.dim == f_zero.dim + 2
        assert_allclose(f_lin.matrix[:3, :3], f_zero.matrix, rtol=0, atol=0)
        assert_allclose(f_lin.matrix[:3, 3:], 0.0, atol=0)

    def test_psd(self, rng):
        for family in FAMILIES:
            spec = make_spec(family, rng)
            x = random_inputs(rng, family, 15)
            seg = DataSegment(x, rng.standard_normal(15))
            fim = fisher_information(spec, MeanSpec(), seg)
            eigs = np.linalg.eigvalsh(fim.matrix)
            assert eigs.min() >= -1e-8 * np.trace(fim.matrix) / fim.dim


class TestParamPacking:
    def test_round_trip_with_linear_mean(self, rng):
        spec = make_spec("SquaredExponential", rng)
        mean = MeanSpec("Linear", 0.3, -0.7)
        vec = pack_params(spec.params, mean)
        assert vec.size == 3 + 2
        sp, mn = unpack_params(vec, spec, mean)
        assert_allclose(sp.params.values, spec.params.values, rtol=0, atol=0)
        assert mn == mean
        assert param_names(spec, mean)[-2:] == ("mean_a", "mean_b")

    def test_wrong_size_rejected(self, rng):
        spec = make_spec("SquaredExponential", rng)
        with pytest.raises(DimensionMismatch):
            unpack_params(np.zeros(7), spec, MeanSpec())

    def test_invalid_segment(self):
        with pytest.raises(InvalidInput):
            DataSegment(np.zeros((0, 1)), np.zeros(0))
        with pytest.raises(DimensionMismatch):
            DataSegment(np.zeros((3, 1)), np.zeros(2))
