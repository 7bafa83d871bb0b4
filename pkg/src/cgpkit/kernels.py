"""Mean and covariance functions with analytic log-parameter derivatives.

Three stationary kernel families are supported:

- ``SquaredExponential`` (1-D): amp^2 * exp(-(t-t')^2 / ls^2)
- ``PeriodicPlusSE`` (1-D):
  amp_p^2 * exp(-2 sin^2(pi|t-t'|/period) / ls_p^2)
  + amp_se^2 * exp(-(t-t')^2 / ls_se^2)
- ``SE2D-ARD`` (2-D):
  amp^2 * exp(-(x1-x1')^2/ls1^2 - (x2-x2')^2/ls2^2)

Note the squared-exponential convention has no factor 2 in the denominator.
Observation noise is not part of any family; it lives in
``Hyperparams.noise_logvar`` and is added only to training-Gram diagonals.

All positive parameters are stored in log space so that unconstrained
optimization is valid; every derivative below is with respect to the log
parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidInput
from .psd import symmetrize

FAMILY_PARAM_NAMES = {
    "SquaredExponential": ("amplitude", "lengthscale"),
    "PeriodicPlusSE": (
        "periodic_amplitude",
        "period",
        "periodic_lengthscale",
        "se_amplitude",
        "se_lengthscale",
    ),
    "SE2D-ARD": ("amplitude", "lengthscale_x1", "lengthscale_x2"),
}

FAMILY_INPUT_DIM = {
    "SquaredExponential": 1,
    "PeriodicPlusSE": 1,
    "SE2D-ARD": 2,
}


@dataclass(frozen=True)
class Hyperparams:
    """Positive kernel parameters in log space plus the log noise variance."""

    values: np.ndarray
    names: tuple
    noise_logvar: float

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if len(self.names) != v.size:
            raise InvalidInput(
                f"{v.size} values for {len(self.names)} names {self.names}"
            )
        if not (np.all(np.isfinite(np.exp(v))) and np.all(np.exp(v) > 0)):
            raise InvalidInput("exp of every log-parameter must be finite and positive")
        if not math.isfinite(math.exp(self.noise_logvar)):
            raise InvalidInput("exp(noise_logvar) must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def noise_var(self) -> float:
        return math.exp(self.noise_logvar)

    def natural(self) -> dict:
        """Parameter values in natural (positive) space, keyed by name."""
        return dict(zip(self.names, np.exp(self.values)))

    def replace_values(self, values, noise_logvar=None) -> "Hyperparams":
        nl = self.noise_logvar if noise_logvar is None else float(noise_logvar)
        return Hyperparams(np.asarray(values, dtype=float), self.names, nl)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its hyperparameters."""

    family: str
    params: Hyperparams

    def __post_init__(self):
        if self.family not in FAMILY_PARAM_NAMES:
            raise InvalidInput(f"unknown kernel family {self.family!r}")
        expected = FAMILY_PARAM_NAMES[self.family]
        if self.params.names != expected:
            raise InvalidInput(
                f"{self.family} expects parameters {expected}, got {self.params.names}"
            )

    @property
    def input_dim(self) -> int:
        return FAMILY_INPUT_DIM[self.family]

    @classmethod
    def from_natural(cls, family: str, params: dict, noise_var: float) -> "KernelSpec":
        names = FAMILY_PARAM_NAMES.get(family)
        if names is None:
            raise InvalidInput(f"unknown kernel family {family!r}")
        missing = set(names) - set(params)
        extra = set(params) - set(names)
        if missing or extra:
            raise InvalidInput(
                f"{family} parameters must be exactly {names} "
                f"(missing {sorted(missing)}, unexpected {sorted(extra)})"
            )
        vals = np.array([params[n] for n in names], dtype=float)
        if np.any(vals <= 0) or noise_var <= 0:
            raise InvalidInput("kernel parameters and noise variance must be positive")
        hp = Hyperparams(np.log(vals), names, math.log(noise_var))
        return cls(family, hp)

    def with_params(self, params: Hyperparams) -> "KernelSpec":
        return KernelSpec(self.family, params)

    def to_config(self) -> dict:
        """JSON config block with values in natural (not log) space."""
        return {
            "family": self.family,
            "params": {k: float(v) for k, v in self.params.natural().items()},
            "noise_var": self.params.noise_var,
        }

    @classmethod
    def from_config(cls, block: dict) -> "KernelSpec":
        try:
            return cls.from_natural(block["family"], block["params"], block["noise_var"])
        except KeyError as exc:
            raise InvalidInput(f"kernel config missing key {exc}") from exc


@dataclass(frozen=True)
class MeanSpec:
    """Zero mean, or the linear mean a*t + b on scalar inputs."""

    family: str = "Zero"
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.family not in ("Zero", "Linear"):
            raise InvalidInput(f"unknown mean family {self.family!r}")

    @property
    def n_params(self) -> int:
        return 2 if self.family == "Linear" else 0

    def to_config(self) -> dict:
        if self.family == "Zero":
            return {"family": "Zero"}
        return {"family": "Linear", "a": self.a, "b": self.b}

    @classmethod
    def from_config(cls, block: dict) -> "MeanSpec":
        family = block.get("family", "Zero")
        if family == "Zero":
            return cls()
        return cls("Linear", float(block.get("a", 0.0)), float(block.get("b", 0.0)))


def as_points(x, input_dim: int) -> np.ndarray:
    """Coerce points to an (n, input_dim) array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != input_dim:
        raise DimensionMismatch(
            f"expected points of dimension {input_dim}, got shape {np.shape(x)}"
        )
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch("input points must be finite")
    return arr


def mean_vector(mean: MeanSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate the mean function at points ``x`` of shape (n, d)."""
    if mean.family == "Zero":
        return np.zeros(x.shape[0])
    if x.shape[1] != 1:
        raise DimensionMismatch("Linear mean is defined for 1-D inputs only")
    return mean.a * x[:, 0] + mean.b


def _diff_1d(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    # (n, m) pairwise differences of scalar inputs
    return x1[:, 0:1] - x2[:, 0].reshape(1, -1)


def _se_parts(amp, ls, sq):
    return amp**2 * np.exp(-sq / ls**2)


def cov_matrix(spec: KernelSpec, x1, x2=None) -> np.ndarray:
    """Noise-free covariance matrix between point sets.

    With ``x2=None`` the result is the symmetric Gram of ``x1``.
    """
    p1 = as_points(x1, spec.input_dim)
    p2 = p1 if x2 is None else as_points(x2, spec.input_dim)
    nat = spec.params.natural()
    if spec.family == "SquaredExponential":
        k = _se_parts(nat["amplitude"], nat["lengthscale"], _diff_1d(p1, p2) ** 2)
    elif spec.family == "PeriodicPlusSE":
        d = _diff_1d(p1, p2)
        u = np.pi * np.abs(d) / nat["period"]
        per = nat["periodic_amplitude"] ** 2 * np.exp(
            -2.0 * np.sin(u) ** 2 / nat["periodic_lengthscale"] ** 2
        )
        k = per + _se_parts(nat["se_amplitude"], nat["se_lengthscale"], d**2)
    else:  # SE2D-ARD
        sq = (
            (p1[:, 0:1] - p2[:, 0].reshape(1, -1)) ** 2 / nat["lengthscale_x1"] ** 2
            + (p1[:, 1:2] - p2[:, 1].reshape(1, -1)) ** 2 / nat["lengthscale_x2"] ** 2
        )
        k = nat["amplitude"] ** 2 * np.exp(-sq)
    if x2 is None:
        k = symmetrize(k)
    return k


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    """Covariance between two single points."""
    return float(cov_matrix(spec, [x] if np.ndim(x) == 0 else [x],
                            [xp] if np.ndim(xp) == 0 else [xp])[0, 0])


def gram(spec: KernelSpec, mean: MeanSpec, x1, x2=None):
    """Mean vectors and cross-covariance matrix for two point sets.

    Returns ``(mu1, mu2, K)``; with ``x2=None``, ``K`` is the symmetric
    Gram matrix of ``x1`` and ``mu2 is mu1``.
    """
    p1 = as_points(x1, spec.input_dim)
    mu1 = mean_vector(mean, p1)
    if x2 is None:
        return mu1, mu1, cov_matrix(spec, p1)
    p2 = as_points(x2, spec.input_dim)
    return mu1, mean_vector(mean, p2), cov_matrix(spec, p1, p2)


def noisy_gram(spec: KernelSpec, x) -> np.ndarray:
    """Training covariance: Gram of ``x`` plus the noise-variance diagonal."""
    k = cov_matrix(spec, x)
    k[np.diag_indices_from(k)] += spec.params.noise_var
    return k


def kernel_grad(spec: KernelSpec, x1, x2=None) -> list:
    """Analytic derivative matrices, one per log-parameter plus noise last.

    Derivatives are taken with respect to the log of each parameter. The
    noise entry is ``noise_var * I`` for the symmetric (training) case and
    a zero matrix for cross-covariances, matching ``noisy_gram``.
    """
    p1 = as_points(x1, spec.input_dim)
    p2 = p1 if x2 is None else as_points(x2, spec.input_dim)
    nat = spec.params.natural()
    grads = []
    if spec.family == "SquaredExponential":
        sq = _diff_1d(p1, p2) ** 2
        k = _se_parts(nat["amplitude"], nat["lengthscale"], sq)
        grads.append(2.0 * k)
        grads.append(k * 2.0 * sq / nat["lengthscale"] ** 2)
    elif spec.family == "PeriodicPlusSE":
        ls_p = nat["periodic_lengthscale"]
        d = _diff_1d(p1, p2)
        u = np.pi * np.abs(d) / nat["period"]
        per = nat["periodic_amplitude"] ** 2 * np.exp(-2.0 * np.sin(u) ** 2 / ls_p**2)
        sq = d**2
        se = _se_parts(nat["se_amplitude"], nat["se_lengthscale"], sq)
        grads.append(2.0 * per)                                   # log periodic_amplitude
        grads.append(per * 2.0 * u * np.sin(2.0 * u) / ls_p**2)   # log period
        grads.append(per * 4.0 * np.sin(u) ** 2 / ls_p**2)        # log periodic_lengthscale
        grads.append(2.0 * se)                                    # log se_amplitude
        grads.append(se * 2.0 * sq / nat["se_lengthscale"] ** 2)  # log se_lengthscale
    else:  # SE2D-ARD
        s1 = (p1[:, 0:1] - p2[:, 0].reshape(1, -1)) ** 2 / nat["lengthscale_x1"] ** 2
        s2 = (p1[:, 1:2] - p2[:, 1].reshape(1, -1)) ** 2 / nat["lengthscale_x2"] ** 2
        k = nat["amplitude"] ** 2 * np.exp(-(s1 + s2))
        grads.append(2.0 * k)
        grads.append(k * 2.0 * s1)
        grads.append(k * 2.0 * s2)
    n1 = p1.shape[0]
    if x2 is None:
        grads.append(spec.params.noise_var * np.eye(n1))
    else:
        grads.append(np.zeros((n1, p2.shape[0])))
    return grads
