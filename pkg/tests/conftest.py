import numpy as np
import pytest

from matmed.model import ModelParams, paper_truth_params
from matmed.tensor import sample_uniform_stiefel


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def low_truth():
    return paper_truth_params("low", np.random.default_rng(11))


def random_params(rng, p=5, q=4, p0=2, q0=2, K=0, phi=4.0) -> ModelParams:
    d = p0 * q0
    return ModelParams(
        A=sample_uniform_stiefel(p, p0, rng),
        B=sample_uniform_stiefel(q, q0, rng),
        mu=rng.standard_normal((p, q)) * 0.3,
        beta_ET=rng.standard_normal(d) * 0.5,
        Omega_ZT=rng.standard_normal((d, K)) * 0.3,
        alpha_Y=float(rng.standard_normal()) * 0.3,
        beta_EY=float(rng.standard_normal()) * 0.3,
        beta_TY=rng.standard_normal(d) * 0.5,
        beta_ZY=rng.standard_normal(K) * 0.3,
        phi=phi,
    )


def random_orthogonal(rng, k):
    return sample_uniform_stiefel(k, k, rng)
