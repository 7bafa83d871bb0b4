"""FITC sparse-GP baseline with fixed inducing inputs.

Standard fully-independent-training-conditional prediction: the training
covariance is approximated by the Nystrom term plus its diagonal
correction, with observation noise on the diagonal. Inducing locations are
fixed (uniform placement); no selection heuristics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.spatial.distance

from .errors import DegenerateInducing, InvalidRange
from .exact import DataSegment, GaussianBelief
from .kernels import KernelSpec, MeanSpec, as_points, cov_matrix, mean_vector
from .psd import cholesky_jittered, symmetrize


@dataclass(frozen=True)
class InducingSet:
    """Fixed inducing input locations."""

    U_X: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.U_X, dtype=float)
        if u.ndim == 1:
            u = u.reshape(-1, 1)
        if u.shape[0] == 0:
            raise DegenerateInducing("inducing set must be nonempty")
        if u.shape[0] > 1:
            dmin = scipy.spatial.distance.pdist(u).min()
            if dmin <= 1e-9:
                raise DegenerateInducing(
                    f"duplicate inducing locations (min pairwise distance {dmin:g})"
                )
        object.__setattr__(self, "U_X", u)

    @property
    def size(self) -> int:
        return self.U_X.shape[0]


def place_uniform(inputs_range, count: int) -> InducingSet:
    """Evenly spaced inducing locations spanning the range, endpoints included.

    ``inputs_range`` is (lo, hi) for 1-D, or ((lo1, hi1), (lo2, hi2)) for
    2-D, where a near-square grid with exactly ``count`` nodes is used.
    """
    if count < 1:
        raise InvalidRange("count must be >= 1")
    rng = np.asarray(inputs_range, dtype=float)
    if rng.shape == (2,):
        lo, hi = rng
        if not hi > lo:
            raise InvalidRange(f"empty range [{lo}, {hi}]")
        return InducingSet(np.linspace(lo, hi, count).reshape(-1, 1))
    if rng.shape == (2, 2):
        if not (rng[0, 1] > rng[0, 0] and rng[1, 1] > rng[1, 0]):
            raise InvalidRange("empty 2-D range")
        rows = int(np.floor(np.sqrt(count)))
        while count % rows != 0:
            rows -= 1
        cols = count // rows
        g1 = np.linspace(rng[0, 0], rng[0, 1], rows)
        g2 = np.linspace(rng[1, 0], rng[1, 1], cols)
        xx, yy = np.meshgrid(g1, g2, indexing="ij")
        return InducingSet(np.column_stack([xx.ravel(), yy.ravel()]))
    raise InvalidRange(f"range must be (2,) or (2, 2), got shape {rng.shape}")


def fitc_posterior(spec: KernelSpec, mean: MeanSpec, train: DataSegment,
                   inducing: InducingSet, test_X) -> GaussianBelief:
    """FITC predictive mean and covariance at ``test_X``.

    With the inducing set equal to the training inputs this reproduces the
    exact GP posterior (up to jitter).
    """
    xt = as_points(test_X, spec.input_dim)
    u = as_points(inducing.U_X, spec.input_dim)
    k_uu = cov_matrix(spec, u)
    k_uf = cov_matrix(spec, u, train.X)                      # (Mu, N)
    k_us = cov_matrix(spec, u, xt)                           # (Mu, M)
    k_ff_diag = np.array([cov_matrix(spec, x.reshape(1, -1))[0, 0] for x in train.X])

    luu, _ = cholesky_jittered(k_uu)
    # Whitened representation: with A = Luu^{-1} K_uf the Nystrom term is
    # Q_ff = A^T A, and all inverses route through B = I + A Lam^{-1} A^T,
    # whose conditioning is governed by the noise floor rather than K_uu.
    a = scipy.linalg.solve_triangular(luu, k_uf, lower=True, check_finite=False)
    q_ff_diag = np.sum(a * a, axis=0)
    lam = k_ff_diag - q_ff_diag + spec.params.noise_var      # FITC diagonal
    lam = np.maximum(lam, 1e-12)

    a_over_lam = a / lam
    b = np.eye(u.shape[0]) + a_over_lam @ a.T
    lb, _ = cholesky_jittered(b)
    resid = train.y - mean_vector(mean, train.X)
    c = scipy.linalg.solve_triangular(luu, k_us, lower=True, check_finite=False)
    z = scipy.linalg.cho_solve((lb, True), a_over_lam @ resid, check_finite=False)
    post_mean = mean_vector(mean, xt) + c.T @ z

    k_ss = cov_matrix(spec, xt)
    w = scipy.linalg.cho_solve((lb, True), c, check_finite=False)
    post_cov = k_ss - c.T @ c + c.T @ w
    return GaussianBelief(post_mean, symmetrize(post_cov))
