"""Performance analysis of the composite posterior.

Tools for quantifying what segmentation costs: the information-theoretic
MSE lower bound, the closed-form excess MSE of the two-segment composite
predictor, Monte-Carlo oracles for both, Gaussian mutual information, the
information-gain gap with its redundancy/synergy verdict, and the
data-averaged-KLD identity checks.

Monte-Carlo draws use a counter-based generator (Philox) keyed by
``(seed, stream)`` so shards are deterministic and independent of
execution order.

Two sampling models appear below and must not be confused:

- expectations about the *exact* posterior and the excess MSE average over
  the true joint model of (z, y), i.e. the full data covariance with its
  cross-segment blocks;
- the data-averaged KLD of the *composite* posterior (``cgp_kld_...``)
  averages over the composite joint, where segments are conditionally
  independent given the test latents. That is the distribution under which
  the information-gain identity holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInput
from .exact import prior_belief
from .kernels import KernelSpec, MeanSpec, as_points, cov_matrix, mean_vector
from .psd import block_inverse_2x2, cholesky_jittered, logdet_psd, solve_psd, symmetrize
from .rng import make_rng

VERDICT_TOL = 1e-9  # nats


@dataclass(frozen=True)
class ExcessMseReport:
    """Closed-form and Monte-Carlo views of the two-segment excess MSE."""

    closed_form: float
    alpha1: np.ndarray
    alpha2: np.ndarray
    gp_coeffs: tuple
    cgp_coeffs: tuple
    monte_carlo: float | None = None
    monte_carlo_se: float | None = None

    def to_json(self) -> dict:
        return {
            "closed_form": self.closed_form,
            "monte_carlo": self.monte_carlo,
            "monte_carlo_se": self.monte_carlo_se,
            "alpha1": self.alpha1.tolist(),
            "alpha2": self.alpha2.tolist(),
            "gp_coeffs": [b.tolist() for b in self.gp_coeffs],
            "cgp_coeffs": [b.tolist() for b in self.cgp_coeffs],
        }


@dataclass(frozen=True)
class InfoReport:
    """Joint vs summed per-segment information about the test latents."""

    mi_full: float
    mi_segments: list
    gap: float
    verdict: str

    def to_json(self) -> dict:
        return {
            "mi_full": self.mi_full,
            "mi_segments": list(self.mi_segments),
            "gap": self.gap,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class KldCheckReport:
    """Sampled data-averaged KLD next to its analytic counterpart."""

    sampled_mean: float
    sampled_se: float
    analytic: float

    def to_json(self) -> dict:
        return {
            "sampled_mean": self.sampled_mean,
            "sampled_se": self.sampled_se,
            "analytic": self.analytic,
        }


@dataclass(frozen=True)
class MseDecompositionReport:
    """Three-way Monte-Carlo view of the composite predictor's total MSE."""

    total_mean: float
    total_se: float
    posterior_var: float
    excess_mean: float
    excess_se: float
    diff_mean: float   # mean of (z - cgp)^2 - (gp - cgp)^2, should equal posterior_var
    diff_se: float


# ---------------------------------------------------------------------------
# Mutual information and the MSE bound.

def mutual_information(spec: KernelSpec, mean: MeanSpec, train_X, test_X) -> float:
    """I(z; y) in nats: half the prior-to-posterior log-determinant ratio."""
    xt = as_points(test_X, spec.input_dim)
    prior_cov = cov_matrix(spec, xt)
    if train_X is None or np.size(train_X) == 0:
        return 0.0
    xi = as_points(train_X, spec.input_dim)
    k_zy = cov_matrix(spec, xt, xi)
    k_yy = cov_matrix(spec, xi) + spec.params.noise_var * np.eye(xi.shape[0])
    post_cov = prior_cov - k_zy @ solve_psd(k_yy, k_zy.T)
    value = 0.5 * (logdet_psd(prior_cov) - logdet_psd(post_cov))
    if -1e-10 < value < 0.0:
        return 0.0
    return value


def mse_lower_bound(prior_var: float, mi: float) -> float:
    """Gaussian-case data-averaged MSE floor: prior_var * exp(-2 * mi)."""
    if prior_var <= 0:
        raise InvalidInput(f"prior variance must be positive, got {prior_var}")
    if mi < 0:
        raise InvalidInput(f"mutual information must be nonnegative, got {mi}")
    return prior_var * np.exp(-2.0 * mi)


# ---------------------------------------------------------------------------
# Excess MSE of the two-segment composite predictor (scalar test point).

def _two_segment_blocks(spec: KernelSpec, mean: MeanSpec, seg1_X, seg2_X, test_x):
    if mean.family != "Zero":
        raise InvalidInput("the closed-form excess MSE requires a zero mean")
    xt = as_points(test_x, spec.input_dim)
    if xt.shape[0] != 1:
        raise InvalidInput("the closed form is defined for a single test point")
    x1 = as_points(seg1_X, spec.input_dim)
    x2 = as_points(seg2_X, spec.input_dim)
    noise = spec.params.noise_var
    s11 = cov_matrix(spec, x1) + noise * np.eye(x1.shape[0])
    s22 = cov_matrix(spec, x2) + noise * np.eye(x2.shape[0])
    s12 = cov_matrix(spec, x1, x2)
    var_z = float(cov_matrix(spec, xt)[0, 0])
    c_zy1 = cov_matrix(spec, xt, x1)[0]   # covariances test-to-segment-1
    c_zy2 = cov_matrix(spec, xt, x2)[0]
    return s11, s22, s12, var_z, c_zy1, c_zy2


def excess_mse_closed_form(spec: KernelSpec, mean: MeanSpec, seg1_X, seg2_X,
                           test_x) -> ExcessMseReport:
    """Closed-form data-averaged (gp_mean - composite_mean)^2 for K = 2.

    The full-GP coefficient block is the block inverse of the joint data
    covariance; the composite block replaces the cross-covariance by its
    through-the-test-point approximation and is lower block triangular.
    The excess MSE is the quadratic form of the coefficient difference
    applied to the true joint covariance.
    """
    s11, s22, s12, var_z, c_zy1, c_zy2 = _two_segment_blocks(
        spec, mean, seg1_X, seg2_X, test_x
    )
    n1, n2 = s11.shape[0], s22.shape[0]
    a, b, c, d = block_inverse_2x2(s11, s12, s12.T, s22)

    inv11 = solve_psd(s11, np.eye(n1))
    var_z_given_1 = var_z - float(c_zy1 @ (inv11 @ c_zy1))
    approx_21 = np.outer(c_zy2, c_zy1) / var_z          # (n2, n1)
    approx_2g1 = s22 - approx_21 @ inv11 @ approx_21.T
    ratio = var_z_given_1 / var_z
    d_p = ratio * solve_psd(approx_2g1, np.eye(n2))
    c_p = -d_p @ approx_21 @ inv11
    a_p = inv11
    b_p = np.zeros((n1, n2))

    alpha1 = (a - a_p).T @ c_zy1 + (c - c_p).T @ c_zy2
    alpha2 = (b - b_p).T @ c_zy1 + (d - d_p).T @ c_zy2
    alpha = np.concatenate([alpha1, alpha2])
    joint = np.block([[s11, s12], [s12.T, s22]])
    value = float(alpha @ (joint @ alpha))
    return ExcessMseReport(
        closed_form=max(value, 0.0),
        alpha1=alpha1,
        alpha2=alpha2,
        gp_coeffs=(a, b, c, d),
        cgp_coeffs=(a_p, b_p, c_p, d_p),
    )


# ---------------------------------------------------------------------------
# Affine maps of the two predictors (used by the Monte-Carlo oracles).

def gp_affine_map(spec: KernelSpec, mean: MeanSpec, train_X, test_X):
    """(offset, weights) with exact-GP mean = offset + weights @ y."""
    xt = as_points(test_X, spec.input_dim)
    xi = as_points(train_X, spec.input_dim)
    k_zy = cov_matrix(spec, xt, xi)
    k_yy = cov_matrix(spec, xi) + spec.params.noise_var * np.eye(xi.shape[0])
    w = solve_psd(k_yy, k_zy.T).T                       # (M, N)
    mu_z = mean_vector(mean, xt)
    mu_y = mean_vector(mean, xi)
    return mu_z - w @ mu_y, w


def cgp_affine_map(spec: KernelSpec, mean: MeanSpec, segments_X, test_X):
    """Composite posterior as an affine function of the stacked data.

    Returns ``(offset, weights, cov, slices)`` where the composite mean for
    stacked observations y is ``offset + weights @ y`` and ``cov`` is the
    (y-independent) composite posterior covariance. Implements the gain
    recursion segment by segment; the per-segment conditionals reference
    the original latent prior.
    """
    xt = as_points(test_X, spec.input_dim)
    prior = prior_belief(spec, mean, xt)
    sizes = []
    xs = [as_points(x, spec.input_dim) for x in segments_X]
    for x in xs:
        sizes.append(x.shape[0])
    n_total = int(np.sum(sizes))
    m = prior.dim
    offset = prior.mean.copy()
    weights = np.zeros((m, n_total))
    cov = prior.cov.copy()
    slices = []
    start = 0
    for x in xs:
        n_k = x.shape[0]
        sl = slice(start, start + n_k)
        slices.append(sl)
        start += n_k
        k_zy = cov_matrix(spec, xt, x)
        h = solve_psd(prior.cov, k_zy).T                # (N_k, M)
        cond_cov = (
            cov_matrix(spec, x)
            + spec.params.noise_var * np.eye(n_k)
            - h @ k_zy
        )
        g = symmetrize(cond_cov + h @ cov @ h.T)
        gain = solve_psd(g, h @ cov).T                  # (M, N_k)
        mu_yk = mean_vector(mean, x)
        weights = weights - gain @ (h @ weights)
        weights[:, sl] += gain
        offset = offset + gain @ (-mu_yk - h @ (offset - prior.mean))
        cov = symmetrize(cov - gain @ (h @ cov))
    return offset, weights, cov, slices


def _joint_data_cov(spec: KernelSpec, xs: list) -> np.ndarray:
    x_all = np.vstack(xs)
    return cov_matrix(spec, x_all) + spec.params.noise_var * np.eye(x_all.shape[0])


def excess_mse_monte_carlo(spec: KernelSpec, mean: MeanSpec, seg1_X, seg2_X, test_x,
                           n_draws: int, seed: int, predictor: str = "cgp"):
    """Monte-Carlo estimate of the data-averaged squared predictor difference.

    Draws stacked observations from the true joint model and averages
    ``(gp_mean - other_mean)^2`` at the (scalar) test point. With
    ``predictor="gp"`` the comparison is against the exact predictor itself
    (a zero-mean self check of the sampling machinery); ``seg2_X=None``
    degenerates to a single segment.
    """
    if n_draws < 1000:
        raise InvalidInput("n_draws must be at least 1000")
    xt = as_points(test_x, spec.input_dim)
    if xt.shape[0] != 1:
        raise InvalidInput("excess MSE is evaluated at a single test point")
    xs = [as_points(seg1_X, spec.input_dim)]
    if seg2_X is not None and np.size(seg2_X) > 0:
        xs.append(as_points(seg2_X, spec.input_dim))
    x_all = np.vstack(xs)
    off_gp, w_gp = gp_affine_map(spec, mean, x_all, xt)
    if predictor == "gp":
        off_other, w_other = off_gp, w_gp
    elif predictor == "cgp":
        off_other, w_other, _, _ = cgp_affine_map(spec, mean, xs, xt)
    else:
        raise InvalidInput(f"unknown predictor {predictor!r}")

    joint = _joint_data_cov(spec, xs)
    lower, _ = cholesky_jittered(joint)
    mu_y = mean_vector(mean, x_all)
    rng = make_rng(seed)
    draws = mu_y[:, None] + lower @ rng.standard_normal((x_all.shape[0], n_draws))
    diff = (off_gp - off_other) + (w_gp - w_other) @ draws   # (1, S)
    sq = diff[0] ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(n_draws))


def mse_decomposition_monte_carlo(spec: KernelSpec, mean: MeanSpec, seg1_X, seg2_X,
                                  test_x, n_draws: int, seed: int) -> MseDecompositionReport:
    """Check total composite MSE = exact posterior variance + excess term.

    Draws (z, y) jointly from the true model; the difference statistic
    ``(z - cgp)^2 - (gp - cgp)^2`` has expectation equal to the exact
    posterior variance when the decomposition holds.
    """
    if n_draws < 1000:
        raise InvalidInput("n_draws must be at least 1000")
    xt = as_points(test_x, spec.input_dim)
    if xt.shape[0] != 1:
        raise InvalidInput("the decomposition is evaluated at a single test point")
    xs = [as_points(seg1_X, spec.input_dim), as_points(seg2_X, spec.input_dim)]
    x_all = np.vstack(xs)
    n = x_all.shape[0]
    var_z = float(cov_matrix(spec, xt)[0, 0])
    c_zy = cov_matrix(spec, xt, x_all)[0]
    joint = np.block([
        [np.array([[var_z]]), c_zy[None, :]],
        [c_zy[:, None], _joint_data_cov(spec, xs)],
    ])
    lower, _ = cholesky_jittered(joint)
    mu = np.concatenate([mean_vector(mean, xt), mean_vector(mean, x_all)])
    rng = make_rng(seed)
    draws = mu[:, None] + lower @ rng.standard_normal((n + 1, n_draws))
    z = draws[0]
    y = draws[1:]
    off_gp, w_gp = gp_affine_map(spec, mean, x_all, xt)
    off_cgp, w_cgp, _, _ = cgp_affine_map(spec, mean, xs, xt)
    mu_gp = (off_gp + w_gp @ y)[0]
    mu_cgp = (off_cgp + w_cgp @ y)[0]
    post_cov = prior_belief(spec, mean, xt).cov - c_zy[None, :] @ solve_psd(
        _joint_data_cov(spec, xs), c_zy[:, None]
    )
    total = (z - mu_cgp) ** 2
    excess = (mu_gp - mu_cgp) ** 2
    diff = total - excess
    root = np.sqrt(n_draws)
    return MseDecompositionReport(
        total_mean=float(total.mean()),
        total_se=float(total.std(ddof=1) / root),
        posterior_var=float(post_cov[0, 0]),
        excess_mean=float(excess.mean()),
        excess_se=float(excess.std(ddof=1) / root),
        diff_mean=float(diff.mean()),
        diff_se=float(diff.std(ddof=1) / root),
    )


# ---------------------------------------------------------------------------
# Information-gain gap and data-averaged KLD checks.

def info_gap(spec: KernelSpec, mean: MeanSpec, segments_X, test_X) -> InfoReport:
    """Joint information minus the per-segment sum, with a verdict.

    Negative gap means the segments carry overlapping (redundant)
    information about the test latents; positive means synergy.
    """
    xs = [as_points(x, spec.input_dim) for x in segments_X]
    if len(xs) < 2:
        raise InvalidInput("info_gap requires at least two segments")
    mi_full = mutual_information(spec, mean, np.vstack(xs), test_X)
    mi_segments = [mutual_information(spec, mean, x, test_X) for x in xs]
    gap = mi_full - float(np.sum(mi_segments))
    if gap < -VERDICT_TOL:
        verdict = "Redundant"
    elif gap > VERDICT_TOL:
        verdict = "Synergistic"
    else:
        verdict = "Balanced"
    return InfoReport(mi_full=mi_full, mi_segments=mi_segments, gap=gap, verdict=verdict)


def gauss_kl(mean1, cov1, mean0, cov0) -> float:
    """KL(N(mean1, cov1) || N(mean0, cov0)) in nats."""
    mean1 = np.atleast_1d(mean1)
    mean0 = np.atleast_1d(mean0)
    m = mean1.size
    sinv_cov1 = solve_psd(cov0, np.asarray(cov1, dtype=float))
    delta = mean1 - mean0
    quad = float(delta @ solve_psd(cov0, delta))
    return 0.5 * (
        float(np.trace(sinv_cov1)) - m + quad + logdet_psd(cov0) - logdet_psd(cov1)
    )


def kld_identity_check(spec: KernelSpec, mean: MeanSpec, train_X, test_X,
                       n_draws: int, seed: int) -> KldCheckReport:
    """Sampled E_y[KL(exact posterior || prior)] next to analytic I(z; y).

    The posterior covariance does not depend on y, so only the quadratic
    mean term is averaged over draws from the true data marginal.
    """
    if train_X is None or np.size(train_X) == 0:
        return KldCheckReport(0.0, 0.0, 0.0)
    if n_draws < 1000:
        raise InvalidInput("n_draws must be at least 1000")
    xt = as_points(test_X, spec.input_dim)
    xi = as_points(train_X, spec.input_dim)
    prior = prior_belief(spec, mean, xt)
    k_zy = cov_matrix(spec, xt, xi)
    k_yy = cov_matrix(spec, xi) + spec.params.noise_var * np.eye(xi.shape[0])
    w = solve_psd(k_yy, k_zy.T).T
    post_cov = symmetrize(prior.cov - k_zy @ solve_psd(k_yy, k_zy.T))

    const = 0.5 * (
        float(np.trace(solve_psd(prior.cov, post_cov)))
        - prior.dim
        + logdet_psd(prior.cov)
        - logdet_psd(post_cov)
    )
    lower, _ = cholesky_jittered(k_yy)
    rng = make_rng(seed)
    centered = lower @ rng.standard_normal((xi.shape[0], n_draws))
    delta = w @ centered                                    # posterior-mean shifts
    quad = 0.5 * np.sum(delta * solve_psd(prior.cov, delta), axis=0)
    kls = const + quad
    analytic = mutual_information(spec, mean, xi, xt)
    return KldCheckReport(
        sampled_mean=float(kls.mean()),
        sampled_se=float(kls.std(ddof=1) / np.sqrt(n_draws)),
        analytic=analytic,
    )


def cgp_kld_monte_carlo(spec: KernelSpec, mean: MeanSpec, segments_X, test_X,
                        n_draws: int, seed: int) -> KldCheckReport:
    """Sampled data-averaged composite information gain vs the sum of MIs.

    Samples (z, y) from the composite joint (latents first, then each
    segment independently from its model conditional) and averages the
    composite log belief-update ratio

        sum_k [ln p(y_k | z) - ln p(y_k)],

    whose expectation is exactly ``sum_k I(z; y_k)``. This is the quantity
    the segment-wise normalization of the composite update averages; for a
    single segment it coincides with the data-averaged KL divergence of
    the exact posterior from the prior. The KLD of the *normalized*
    composite posterior differs from it by the total correlation that the
    shared latents induce between segments.
    """
    if n_draws < 1000:
        raise InvalidInput("n_draws must be at least 1000")
    xt = as_points(test_X, spec.input_dim)
    xs = [as_points(x, spec.input_dim) for x in segments_X]
    prior = prior_belief(spec, mean, xt)

    rng = make_rng(seed)
    lz, _ = cholesky_jittered(prior.cov)
    z_centered = lz @ rng.standard_normal((prior.dim, n_draws))
    totals = np.zeros(n_draws)
    for x in xs:
        n_k = x.shape[0]
        k_zy = cov_matrix(spec, xt, x)
        h = solve_psd(prior.cov, k_zy).T
        cond_cov = (
            cov_matrix(spec, x)
            + spec.params.noise_var * np.eye(n_k)
            - h @ k_zy
        )
        lc, _ = cholesky_jittered(cond_cov)
        noise = lc @ rng.standard_normal((n_k, n_draws))
        # conditional log density: the draw's residual is exactly the noise
        lm, _ = cholesky_jittered(
            cov_matrix(spec, x) + spec.params.noise_var * np.eye(n_k)
        )
        sol_cond = scipy.linalg.solve_triangular(lc, noise, lower=True, check_finite=False)
        marg_resid = h @ z_centered + noise
        sol_marg = scipy.linalg.solve_triangular(lm, marg_resid, lower=True,
                                                 check_finite=False)
        totals += (
            -0.5 * np.sum(sol_cond**2, axis=0)
            - float(np.sum(np.log(np.diag(lc))))
            + 0.5 * np.sum(sol_marg**2, axis=0)
            + float(np.sum(np.log(np.diag(lm))))
        )
    mi_sum = float(np.sum([mutual_information(spec, mean, x, xt) for x in xs]))
    return KldCheckReport(
        sampled_mean=float(totals.mean()),
        sampled_se=float(totals.std(ddof=1) / np.sqrt(n_draws)),
        analytic=mi_sum,
    )
