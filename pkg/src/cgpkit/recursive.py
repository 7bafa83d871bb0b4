"""Recursive composite-GP posterior updates and FIM-weighted fusion.

The posterior recursion treats each data segment's conditional given the
test latents as the measurement model of a linear-Gaussian update: the
running belief is folded with one segment at a time at O(N_k^3) per step.
The conditional is always built against the ORIGINAL latent prior, not the
running posterior, so that each segment contributes the model conditional
p(y_k | z) exactly once.

Hyperparameter fusion accumulates per-segment ML estimates weighted by
their Fisher information; the accumulators form a commutative monoid, so
segments may be folded in any order or merged pairwise.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, FactorizationFailure, InvalidInput
from .exact import DataSegment, FisherInfo, GaussianBelief, prior_belief
from .kernels import Hyperparams, KernelSpec, MeanSpec, as_points, cov_matrix, mean_vector
from .psd import PsdFactor, factorize_psd, solve_psd, symmetrize


@dataclass(frozen=True)
class CgpState:
    """Running composite-GP belief over a fixed set of test latents.

    The prior factorization is carried along so every update reuses it;
    it is derivable from the model, so snapshots do not persist it.
    """

    prior: GaussianBelief
    current: GaussianBelief
    segments_seen: int
    test_X: np.ndarray = field(repr=False)
    prior_factor: PsdFactor = field(repr=False)

    def to_snapshot(self) -> dict:
        """JSON-serializable checkpoint (prior is rebuilt from the model)."""
        return {
            "test_X": self.test_X.tolist(),
            "mean": self.current.mean.tolist(),
            "covariance": self.current.cov.ravel().tolist(),
            "k": self.segments_seen,
        }


def cgp_init(spec: KernelSpec, mean: MeanSpec, test_X) -> CgpState:
    """Fresh state: current belief equals the model prior, k = 0."""
    xt = as_points(test_X, spec.input_dim)
    prior = prior_belief(spec, mean, xt)
    return CgpState(prior=prior, current=prior, segments_seen=0, test_X=xt,
                    prior_factor=factorize_psd(prior.cov))


def cgp_from_snapshot(spec: KernelSpec, mean: MeanSpec, snapshot: dict) -> CgpState:
    xt = as_points(np.asarray(snapshot["test_X"], dtype=float), spec.input_dim)
    m = np.asarray(snapshot["mean"], dtype=float)
    cov = np.asarray(snapshot["covariance"], dtype=float).reshape(m.size, m.size)
    prior = prior_belief(spec, mean, xt)
    return CgpState(
        prior=prior,
        current=GaussianBelief(m, cov),
        segments_seen=int(snapshot["k"]),
        test_X=xt,
        prior_factor=factorize_psd(prior.cov),
    )


def _prepare_segment(state: CgpState, spec: KernelSpec, segment: DataSegment):
    """State-independent per-segment quantities: cross block, Gram, gain basis."""
    if segment.X.shape[1] != spec.input_dim:
        raise DimensionMismatch(
            f"segment input dim {segment.X.shape[1]} vs model dim {spec.input_dim}"
        )
    k_zy = cov_matrix(spec, state.test_X, segment.X)        # (M, N_k)
    k_yy = cov_matrix(spec, segment.X)                       # (N_k, N_k)
    # H_k = Sigma_{y_k,z} Sigma_z^{-1}, against the original prior
    h = state.prior_factor.solve(k_zy).T                     # (N_k, M)
    return k_zy, k_yy, h


def _fold_segment(state: CgpState, spec: KernelSpec, mean: MeanSpec,
                  segment: DataSegment, prep) -> CgpState:
    k_zy, k_yy, h = prep
    hc = h @ state.current.cov                               # (N_k, M)
    cond_cov = k_yy - h @ k_zy
    cond_cov[np.diag_indices_from(cond_cov)] += spec.params.noise_var
    g = symmetrize(cond_cov + hc @ h.T)
    innovation = (
        segment.y
        - mean_vector(mean, segment.X)
        - h @ (state.current.mean - state.prior.mean)
    )
    gain = solve_psd(g, hc).T                                # (M, N_k)
    new_mean = state.current.mean + gain @ innovation
    new_cov = state.current.cov - gain @ hc
    return CgpState(
        prior=state.prior,
        current=GaussianBelief(new_mean, new_cov),
        segments_seen=state.segments_seen + 1,
        test_X=state.test_X,
        prior_factor=state.prior_factor,
    )


def cgp_update(state: CgpState, spec: KernelSpec, mean: MeanSpec,
               segment: DataSegment) -> CgpState:
    """Fold one data segment into the running belief."""
    return _fold_segment(state, spec, mean, segment,
                         _prepare_segment(state, spec, segment))


def cgp_run(segments, spec: KernelSpec, mean: MeanSpec, test_X):
    """Fold all segments in order; returns the final state and per-step times.

    The cross-covariance gain basis H_k is state-independent, so the solves
    against the prior are batched across segments; each step's wall time
    covers its own fold plus its share of that shared preparation.
    """
    segments = list(segments)
    if not segments:
        raise InvalidInput("cgp_run requires at least one segment")
    state = cgp_init(spec, mean, test_X)

    t0 = time.perf_counter()
    blocks = []
    for idx, segment in enumerate(segments):
        if segment.X.shape[1] != spec.input_dim:
            raise DimensionMismatch(
                f"segment {idx}: input dim {segment.X.shape[1]} vs model dim {spec.input_dim}"
            )
        blocks.append((cov_matrix(spec, state.test_X, segment.X),
                       cov_matrix(spec, segment.X)))
    h_all = state.prior_factor.solve(
        np.concatenate([b[0] for b in blocks], axis=1)
    ).T
    preps = []
    start = 0
    for (k_zy, k_yy), segment in zip(blocks, segments):
        preps.append((k_zy, k_yy, h_all[start:start + segment.n]))
        start += segment.n
    prep_share = (time.perf_counter() - t0) / len(segments)

    step_times = []
    for idx, (segment, prep) in enumerate(zip(segments, preps)):
        t0 = time.perf_counter()
        try:
            state = _fold_segment(state, spec, mean, segment, prep)
        except (FactorizationFailure, DimensionMismatch) as exc:
            raise type(exc)(f"segment {idx}: {exc}") from exc
        step_times.append(time.perf_counter() - t0 + prep_share)
    return state, step_times


# ---------------------------------------------------------------------------
# FIM-weighted fusion of per-segment ML estimates.

@dataclass(frozen=True)
class FusionState:
    """Accumulators for information-weighted averaging of ML estimates."""

    lam: np.ndarray
    s: np.ndarray
    k: int
    names: tuple

    @property
    def dim(self) -> int:
        return self.s.size


def fusion_init(names) -> FusionState:
    names = tuple(names)
    d = len(names)
    return FusionState(lam=np.zeros((d, d)), s=np.zeros(d), k=0, names=names)


def fusion_update(fs: FusionState, theta_hat, fim: FisherInfo) -> FusionState:
    """Accumulate one segment's estimate weighted by its Fisher information.

    ``theta_hat`` may be a packed vector or a Hyperparams (packed together
    with the mean recorded in ``fim``).
    """
    if fs.names and fim.names != fs.names:
        raise DimensionMismatch(f"parameter names {fim.names} vs state {fs.names}")
    if isinstance(theta_hat, Hyperparams):
        from .exact import pack_params

        vec = pack_params(theta_hat, fim.mean)
    else:
        vec = np.asarray(theta_hat, dtype=float)
    if vec.size != fs.dim or fim.matrix.shape != (fs.dim, fs.dim):
        raise DimensionMismatch(
            f"estimate dim {vec.size}, FIM shape {fim.matrix.shape}, state dim {fs.dim}"
        )
    return FusionState(
        lam=fs.lam + fim.matrix,
        s=fs.s + fim.matrix @ vec,
        k=fs.k + 1,
        names=fs.names,
    )


def fusion_merge(a: FusionState, b: FusionState) -> FusionState:
    """Combine two partial accumulations (parallel reduction)."""
    if a.names != b.names:
        raise DimensionMismatch(f"parameter names {a.names} vs {b.names}")
    return FusionState(lam=a.lam + b.lam, s=a.s + b.s, k=a.k + b.k, names=a.names)


def fused_vector(fs: FusionState) -> np.ndarray:
    """The information-weighted estimate as a packed vector."""
    if fs.k == 0 or np.trace(fs.lam) <= 0:
        raise FactorizationFailure("no informative segments accumulated")
    return solve_psd(fs.lam, fs.s)


def fused_theta(fs: FusionState):
    """The fused estimate unpacked into (Hyperparams, MeanSpec).

    The packing convention is read back from the accumulated names:
    ``log_*`` kernel entries, ``log_noise_var``, then optional mean
    coefficients ``mean_a``/``mean_b``.
    """
    vec = fused_vector(fs)
    kernel_vals, kernel_names = [], []
    noise_logvar = None
    mean_a = mean_b = None
    for name, value in zip(fs.names, vec):
        if name == "log_noise_var":
            noise_logvar = value
        elif name == "mean_a":
            mean_a = value
        elif name == "mean_b":
            mean_b = value
        elif name.startswith("log_"):
            kernel_names.append(name[4:])
            kernel_vals.append(value)
        else:
            raise InvalidInput(f"unrecognized fused parameter name {name!r}")
    if noise_logvar is None:
        raise InvalidInput("fusion state lacks a log_noise_var entry")
    theta = Hyperparams(np.asarray(kernel_vals), tuple(kernel_names), float(noise_logvar))
    if mean_a is None:
        return theta, MeanSpec()
    return theta, MeanSpec("Linear", float(mean_a), float(mean_b))
