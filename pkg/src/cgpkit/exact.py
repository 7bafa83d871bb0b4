"""Exact GP inference, marginal likelihood, ML estimation, and Fisher information.

This is the reference implementation: dense Gaussian conditioning on the
joint over (test latents, observations), the log marginal likelihood with
analytic gradients, a quasi-Newton maximizer, and the Slepian-Bangs Fisher
information matrix. All parameter derivatives are taken in the same
coordinates the optimizer works in: kernel log-parameters, the log noise
variance, and (for a linear mean) the raw mean coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DimensionMismatch, FactorizationFailure, InvalidInput, OptimizerDiverged
from .kernels import (
    Hyperparams,
    KernelSpec,
    MeanSpec,
    as_points,
    cov_matrix,
    gram,
    kernel_grad,
    mean_vector,
    noisy_gram,
)
from .psd import cholesky_jittered, solve_psd, symmetrize

LOG_2PI = math.log(2.0 * math.pi)

# Objective value returned to the optimizer when a trial point is
# unfactorizable or non-finite; large enough to reject, small enough to
# keep line searches finite.
_PENALTY = 1e25


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian belief over the latent values at the test points."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (mu.size, mu.size):
            raise DimensionMismatch(f"mean size {mu.size} vs cov shape {c.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(c))):
            raise InvalidInput("belief moments must be finite")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", symmetrize(c))

    @property
    def dim(self) -> int:
        return self.mean.size

    def variances(self) -> np.ndarray:
        return np.diag(self.cov).copy()


@dataclass(frozen=True)
class DataSegment:
    """One block of inputs and observations."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.X, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 2 or x.shape[0] == 0:
            raise InvalidInput("segment must contain at least one point")
        if x.shape[0] != y.size:
            raise DimensionMismatch(f"{x.shape[0]} inputs vs {y.size} observations")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInput("segment values must be finite")
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class FisherInfo:
    """Fisher information matrix over the packed parameter vector."""

    matrix: np.ndarray
    names: tuple
    at: np.ndarray = field(repr=False)
    theta_hat: Hyperparams
    mean: MeanSpec

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FitResult:
    """Outcome of ml_estimate.

    ``converged`` is False when the iteration cap was reached before the
    gradient criterion was met; the best iterate is still returned.
    """

    theta: Hyperparams
    mean: MeanSpec
    objective: float
    grad_norm: float
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# Packed parameter vector: kernel log-params, log noise variance, mean coeffs.

def param_names(spec: KernelSpec, mean: MeanSpec) -> tuple:
    names = tuple(f"log_{n}" for n in spec.params.names) + ("log_noise_var",)
    if mean.family == "Linear":
        names += ("mean_a", "mean_b")
    return names


def pack_params(theta: Hyperparams, mean: MeanSpec) -> np.ndarray:
    vec = np.concatenate([theta.values, [theta.noise_logvar]])
    if mean.family == "Linear":
        vec = np.concatenate([vec, [mean.a, mean.b]])
    return vec


def unpack_params(vec: np.ndarray, spec: KernelSpec, mean: MeanSpec):
    """Rebuild (KernelSpec, MeanSpec) from a packed vector."""
    vec = np.asarray(vec, dtype=float)
    nk = spec.params.values.size
    expected = nk + 1 + mean.n_params
    if vec.size != expected:
        raise DimensionMismatch(f"packed vector has {vec.size} entries, expected {expected}")
    theta = Hyperparams(vec[:nk], spec.params.names, float(vec[nk]))
    new_mean = mean
    if mean.family == "Linear":
        new_mean = MeanSpec("Linear", float(vec[nk + 1]), float(vec[nk + 2]))
    return spec.with_params(theta), new_mean


def _mean_grads(mean: MeanSpec, x: np.ndarray) -> list:
    if mean.family != "Linear":
        return []
    return [x[:, 0], np.ones(x.shape[0])]


# ---------------------------------------------------------------------------
# Posterior and likelihood.

def prior_belief(spec: KernelSpec, mean: MeanSpec, test_X) -> GaussianBelief:
    """The model prior N(mu_z, Sigma_z) over the latents at ``test_X``."""
    xt = as_points(test_X, spec.input_dim)
    mu, _, k = gram(spec, mean, xt)
    return GaussianBelief(mu, k)


def gp_posterior(prior, spec: KernelSpec, mean: MeanSpec, segment, test_X) -> GaussianBelief:
    """Exact GP posterior over the test latents by joint conditioning.

    ``prior`` may be None, in which case the model prior at ``test_X`` is
    used. ``segment`` may be None to denote "no data" (returns the prior).
    """
    xt = as_points(test_X, spec.input_dim)
    if prior is None:
        prior = prior_belief(spec, mean, xt)
    if prior.dim != xt.shape[0]:
        raise DimensionMismatch(f"prior dim {prior.dim} vs {xt.shape[0]} test points")
    if segment is None:
        return prior
    k_zy = cov_matrix(spec, xt, segment.X)
    k_yy = noisy_gram(spec, segment.X)
    mu_y = mean_vector(mean, segment.X)
    w = solve_psd(k_yy, k_zy.T)  # Sigma_yy^{-1} Sigma_yz
    post_mean = prior.mean + w.T @ (segment.y - mu_y)
    post_cov = prior.cov - k_zy @ w
    return GaussianBelief(post_mean, post_cov)


def _lml_terms(spec: KernelSpec, mean: MeanSpec, segment: DataSegment):
    sigma = noisy_gram(spec, segment.X)
    lower, jitter = cholesky_jittered(sigma)
    resid = segment.y - mean_vector(mean, segment.X)
    alpha = scipy.linalg.cho_solve((lower, True), resid, check_finite=False)
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    value = -0.5 * float(resid @ alpha) - 0.5 * logdet - 0.5 * segment.n * LOG_2PI
    return value, lower, alpha, jitter


def log_marginal_likelihood(spec: KernelSpec, mean: MeanSpec, segment: DataSegment):
    """Log marginal likelihood and its gradient over the packed parameters."""
    value, lower, alpha, _ = _lml_terms(spec, mean, segment)
    cov_grads = kernel_grad(spec, segment.X)
    # one factored solve against I serves every trace contraction
    sinv = scipy.linalg.cho_solve((lower, True), np.eye(segment.n), check_finite=False)
    grad = np.empty(len(cov_grads) + len(_mean_grads(mean, segment.X)))
    for i, g in enumerate(cov_grads):
        grad[i] = 0.5 * float(alpha @ (g @ alpha)) - 0.5 * float(np.sum(sinv * g))
    for j, dmu in enumerate(_mean_grads(mean, segment.X)):
        grad[len(cov_grads) + j] = float(dmu @ alpha)
    return value, grad


def ml_estimate(spec: KernelSpec, mean: MeanSpec, segment: DataSegment,
                init: Hyperparams, init_mean: MeanSpec | None = None,
                max_iter: int = 200) -> FitResult:
    """Maximize the log marginal likelihood from ``init``.

    Quasi-Newton (L-BFGS-B) on the negative log marginal likelihood in the
    packed parameter space; deterministic given (segment, init). Points
    where the factorization fails are penalized rather than fatal.
    """
    mean0 = init_mean if init_mean is not None else mean
    x0 = pack_params(init, mean0)

    def objective(vec):
        try:
            sp, mn = unpack_params(vec, spec, mean)
            value, grad = log_marginal_likelihood(sp, mn, segment)
        except (FactorizationFailure, InvalidInput):
            return _PENALTY, np.zeros_like(vec)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            return _PENALTY, np.zeros_like(vec)
        return -value, -grad

    f0, _ = objective(x0)
    if f0 >= _PENALTY:
        raise OptimizerDiverged("objective is non-finite at the initial point")
    result = scipy.optimize.minimize(
        objective, x0, jac=True, method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": 1e-9, "ftol": 1e-14},
    )
    best = result.x if result.fun <= f0 else x0
    fval, grad = objective(best)
    if fval >= _PENALTY:
        raise OptimizerDiverged("optimizer ended at a non-finite objective")
    sp, mn = unpack_params(best, spec, mean)
    grad_norm = float(np.linalg.norm(grad))
    converged = grad_norm <= 1e-6 * (1.0 + abs(fval))
    return FitResult(sp.params, mn, -fval, grad_norm, int(result.nit), converged)


def fisher_information(spec: KernelSpec, mean: MeanSpec, segment: DataSegment,
                       theta: Hyperparams | None = None,
                       theta_mean: MeanSpec | None = None) -> FisherInfo:
    """Slepian-Bangs Fisher information over the packed parameters.

    J_ij = dmu_i^T Sigma^{-1} dmu_j + 1/2 tr(Sigma^{-1} dSigma_i Sigma^{-1} dSigma_j),
    evaluated at ``theta`` (defaults to the spec's own parameters).
    """
    at_spec = spec if theta is None else spec.with_params(theta)
    at_mean = mean if theta_mean is None else theta_mean
    sigma = noisy_gram(at_spec, segment.X)
    lower, _ = cholesky_jittered(sigma)
    cov_grads = kernel_grad(at_spec, segment.X)
    mean_grads = _mean_grads(at_mean, segment.X)
    n_params = len(cov_grads) + len(mean_grads)
    # Sigma^{-1} dSigma_i, reused across all pairs
    sinv_grads = [
        scipy.linalg.cho_solve((lower, True), g, check_finite=False) for g in cov_grads
    ]
    sinv_mu = [
        scipy.linalg.cho_solve((lower, True), dmu, check_finite=False)
        for dmu in mean_grads
    ]
    j = np.zeros((n_params, n_params))
    nc = len(cov_grads)
    for a in range(nc):
        for b in range(a, nc):
            j[a, b] = j[b, a] = 0.5 * float(np.sum(sinv_grads[a] * sinv_grads[b].T))
    for a in range(len(mean_grads)):
        for b in range(a, len(mean_grads)):
            val = float(mean_grads[a] @ sinv_mu[b])
            j[nc + a, nc + b] = j[nc + b, nc + a] = val
    theta_at = at_spec.params
    return FisherInfo(
        matrix=symmetrize(j),
        names=param_names(at_spec, at_mean),
        at=pack_params(theta_at, at_mean),
        theta_hat=theta_at,
        mean=at_mean,
    )
