import numpy as np
import pytest

from conftest import random_params
from matmed import gibbs
from matmed.errors import ConfigError, NonFiniteChainError
from matmed.gibbs import SamplerConfig, run_chain
from matmed.model import Priors, simulate_dataset
from matmed.tensor import stiefel_violation


@pytest.fixture(scope="module")
def small_run():
    rng = np.random.default_rng(31)
    theta = random_params(rng, p=5, q=4, p0=2, q0=2, phi=16.0)
    data, _ = simulate_dataset(theta, 60, rng)
    cfg = SamplerConfig(iterations=300, burn_in=90, thin=7, seed=5)
    return data, cfg, run_chain(data, data.dims(2, 2), cfg)


def test_retained_count_arithmetic(small_run):
    data, cfg, draws = small_run
    assert cfg.retained == (300 - 90) // 7 == 30
    assert draws.R == 30
    # the schedule reported in the experiments: note (10000-3000)/5 = 1400
    assert SamplerConfig(iterations=10_000, burn_in=3_000, thin=5).retained == 1400


def test_retained_frames_on_manifold(small_run):
    _, _, draws = small_run
    for r in range(draws.R):
        assert stiefel_violation(draws.A[r]) <= 1e-8
        assert stiefel_violation(draws.B[r]) <= 1e-8
    assert np.all(draws.phi > 0)


def test_chain_deterministic(small_run):
    data, cfg, draws = small_run
    again = run_chain(data, data.dims(2, 2), cfg)
    for name in ("A", "B", "beta_ET", "beta_TY", "alpha_Y", "beta_EY", "phi",
                 "quantities", "deviance", "latent_mean", "mu_mean"):
        assert np.array_equal(getattr(draws, name), getattr(again, name)), name


def test_backend_stated(small_run):
    from matmed import kernels

    assert kernels.active_backend() in ("numba", "numpy")


def test_quantities_match_stored_params(small_run):
    from matmed.mediation_map import mediation_quantities_from

    _, _, draws = small_run
    r = draws.R // 2
    q = mediation_quantities_from(draws.A[r], draws.B[r], draws.beta_ET[r],
                                  draws.beta_TY[r])
    assert np.allclose(q, draws.quantities[r], atol=1e-12)


def test_config_validation():
    with pytest.raises(ConfigError):
        SamplerConfig(iterations=100, burn_in=100, thin=5)
    with pytest.raises(ConfigError):
        SamplerConfig(iterations=100, burn_in=10, thin=0)


def test_dims_mismatch_rejected(small_run):
    data, cfg, _ = small_run
    from matmed.tensor import Dims

    with pytest.raises(ConfigError):
        run_chain(data, Dims(p=5, q=4, p0=2, q0=2, K=0, n=61), cfg)


def test_nonfinite_state_aborts_with_iteration(monkeypatch, small_run):
    data, _, _ = small_run

    def bad_phi(theta, state, data, rng, priors=None):
        return float("nan")

    monkeypatch.setattr(gibbs, "update_phi", bad_phi)
    with pytest.raises(NonFiniteChainError) as err:
        run_chain(data, data.dims(2, 2), SamplerConfig(iterations=10, burn_in=2,
                                                       thin=1, seed=0))
    assert err.value.iteration == 1


def test_retain_full_stores_mu(small_run):
    data, _, _ = small_run
    cfg = SamplerConfig(iterations=40, burn_in=10, thin=3, seed=2, retain_full=True)
    draws = run_chain(data, data.dims(2, 2), cfg)
    assert draws.mu is not None and draws.mu.shape == (10, 5, 4)
    assert np.allclose(draws.mu.mean(axis=0), draws.mu_mean)


def test_fixed_mu_mode_keeps_sample_mean(small_run):
    data, _, _ = small_run
    cfg = SamplerConfig(iterations=40, burn_in=10, thin=3, seed=2, retain_full=True,
                        priors=Priors(mu_mode="fixed-at-sample-mean"))
    draws = run_chain(data, data.dims(2, 2), cfg)
    xbar = data.X.mean(axis=0)
    assert np.allclose(draws.mu_mean, xbar)
    assert np.allclose(draws.mu[0], xbar)


def test_mean_params_on_manifold(small_run):
    _, _, draws = small_run
    theta = draws.mean_params()
    assert stiefel_violation(theta.A) <= 1e-10
    assert stiefel_violation(theta.B) <= 1e-10
