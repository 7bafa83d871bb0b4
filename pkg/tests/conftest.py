import numpy as np
import pytest

from cgpkit.kernels import KernelSpec, MeanSpec


def random_spd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def make_spec(family, rng=None, noise_var=0.05):
    """A kernel spec with mildly randomized natural parameters."""
    if rng is None:
        params = {
            "SquaredExponential": {"amplitude": 1.0, "lengthscale": 2.0},
            "PeriodicPlusSE": {
                "periodic_amplitude": 1.0, "period": 8.0,
                "periodic_lengthscale": 1.0, "se_amplitude": 1.0,
                "se_lengthscale": 2.0,
            },
            "SE2D-ARD": {"amplitude": 1.0, "lengthscale_x1": 2.0, "lengthscale_x2": 3.0},
        }[family]
    else:
        jitter = lambda base: float(base * np.exp(rng.uniform(-0.4, 0.4)))
        params = {
            "SquaredExponential": lambda: {
                "amplitude": jitter(1.0), "lengthscale": jitter(2.0)},
            "PeriodicPlusSE": lambda: {
                "periodic_amplitude": jitter(1.0), "period": jitter(8.0),
                "periodic_lengthscale": jitter(1.0), "se_amplitude": jitter(1.0),
                "se_lengthscale": jitter(2.0)},
            "SE2D-ARD": lambda: {
                "amplitude": jitter(1.0), "lengthscale_x1": jitter(2.0),
                "lengthscale_x2": jitter(3.0)},
        }[family]()
    return KernelSpec.from_natural(family, params, noise_var)


def random_inputs(rng, family, n, spread=20.0):
    if family == "SE2D-ARD":
        return rng.uniform(0, spread, size=(n, 2))
    return rng.uniform(0, spread, size=(n, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


FAMILIES = ("SquaredExponential", "PeriodicPlusSE", "SE2D-ARD")


@pytest.fixture(params=FAMILIES)
def family(request):
    return request.param


@pytest.fixture
def zero_mean():
    return MeanSpec()
