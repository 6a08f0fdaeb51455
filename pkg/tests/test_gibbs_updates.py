import math
from dataclasses import replace

import numpy as np


from conftest import random_params
from matmed import gibbs
from matmed.gibbs import (SamplerConfig, update_latent_T, update_loading_columns,
                          update_mediator_regression, update_mu, update_outcome_regression,
                          update_phi, update_probit_auxiliary, varimax_rotate_and_propagate)
from matmed.model import (LatentState, MatrixDataset, ModelParams, Priors, complete_loglik,
                          simulate_dataset)
from matmed.rotation import varimax_criterion
from matmed.tensor import stiefel_violation, vec_batch


def _flat_instance(rng, n=4, p=5, q=4, p0=2, q0=2, K=0):
    theta = random_params(rng, p=p, q=q, p0=p0, q0=q0, K=K)
    data, state = simulate_dataset(theta, n, rng)
    return theta, state, data


# ---------------------------------------------------------------------------
# probit auxiliary

def test_auxiliary_half_normal_mean(rng):
    n = 100_000
    theta = random_params(rng, p=3, q=3, p0=1, q0=1)
    theta = replace(theta, alpha_Y=0.0, beta_EY=0.0, beta_TY=np.zeros(1),
                    beta_ZY=np.zeros(0))
    data = MatrixDataset(X=np.zeros((n, 3, 3)), E=np.zeros(n), Z=np.zeros((n, 0)),
                         Y=np.ones(n))
    state = LatentState(T=np.zeros((n, 1, 1)), ystar=np.zeros(n))
    ys = update_probit_auxiliary(theta, state, data, rng)
    assert np.all(ys >= 0)
    assert abs(ys.mean() - math.sqrt(2 / math.pi)) < 0.01


def test_auxiliary_inactive_truncation(rng):
    n = 10_000
    theta = random_params(rng, p=3, q=3, p0=1, q0=1)
    theta = replace(theta, alpha_Y=10.0, beta_EY=0.0, beta_TY=np.zeros(1),
                    beta_ZY=np.zeros(0))
    data = MatrixDataset(X=np.zeros((n, 3, 3)), E=np.zeros(n), Z=np.zeros((n, 0)),
                         Y=np.ones(n))
    state = LatentState(T=np.zeros((n, 1, 1)), ystar=np.zeros(n))
    ys = update_probit_auxiliary(theta, state, data, rng)
    assert abs(ys.mean() - 10.0) < 0.05


def test_auxiliary_sign_matches_outcome(rng):
    theta, state, data = _flat_instance(rng, n=500)
    ys = update_probit_auxiliary(theta, state, data, rng)
    assert np.all(ys[data.Y == 1.0] >= 0)
    assert np.all(ys[data.Y == 0.0] < 0)


# ---------------------------------------------------------------------------
# latent features

def test_latent_equal_weight_posterior_mean(rng):
    # beta_TY = 0, phi = 1, E = 0, K = 0: two unit-precision Gaussian sources
    theta = random_params(rng, p=5, q=4, p0=2, q0=2, phi=1.0)
    theta = replace(theta, beta_TY=np.zeros(4), beta_ET=np.zeros(4))
    n = 50_000
    X = np.broadcast_to(rng.standard_normal((1, 5, 4)), (n, 5, 4)).copy()
    data = MatrixDataset(X=X, E=np.zeros(n), Z=np.zeros((n, 0)), Y=np.ones(n))
    state = LatentState(T=np.zeros((n, 2, 2)), ystar=np.zeros(n))
    T = update_latent_T(theta, state, data, rng)
    want = (theta.A.T @ (X[0] - theta.mu) @ theta.B) / 2.0
    got = T.mean(axis=0)
    assert np.max(np.abs(got - want)) < 0.02


def test_latent_grid_conditional_matches_loglik(rng):
    # scalar latent: N(Sigma^-1 m, Sigma^-1) must equal exp(complete_loglik)
    theta = random_params(rng, p=3, q=2, p0=1, q0=1, phi=3.0)
    data, state = simulate_dataset(theta, 1, rng)
    mean, L = gibbs._latent_moments(theta, data, state.ystar)
    sd = 1.0 / L[0, 0]
    grid = np.linspace(mean[0, 0] - 8 * sd, mean[0, 0] + 8 * sd, 2001)

    log_cond = np.empty(grid.size)
    for i, t in enumerate(grid):
        st = LatentState(T=np.array([[[t]]]), ystar=state.ystar)
        log_cond[i] = complete_loglik(theta, st, data)
    # the conditional ignores the outcome-model term only through ystar;
    # complete_loglik uses Y directly, so add the auxiliary term by hand
    eta_term = -0.5 * (state.ystar[0] - (theta.alpha_Y + theta.beta_EY * data.E[0]
                                         + theta.beta_TY[0] * grid)) ** 2
    y_eta = (theta.alpha_Y + theta.beta_EY * data.E[0] + theta.beta_TY[0] * grid)
    from scipy.special import log_ndtr

    probit_term = np.where(data.Y[0] == 1.0, log_ndtr(y_eta), log_ndtr(-y_eta))
    log_cond = log_cond - probit_term + eta_term

    dens = np.exp(log_cond - log_cond.max())
    dens /= dens.sum()
    gauss = np.exp(-0.5 * ((grid - mean[0, 0]) / sd) ** 2)
    gauss /= gauss.sum()
    tv = 0.5 * np.sum(np.abs(dens - gauss))
    assert tv <= 1e-6


def test_latent_sampling_covariance(rng):
    theta = random_params(rng, p=5, q=4, p0=2, q0=2, phi=2.5)
    n = 100_000
    X = np.broadcast_to(rng.standard_normal((1, 5, 4)), (n, 5, 4)).copy()
    data = MatrixDataset(X=X, E=np.ones(n), Z=np.zeros((n, 0)), Y=np.ones(n))
    state = LatentState(T=np.zeros((n, 2, 2)), ystar=np.full(n, 0.7))
    T = vec_batch(update_latent_T(theta, state, data, rng))
    emp = np.cov(T.T)
    Sigma = (1 + theta.phi) * np.eye(4) + np.outer(theta.beta_TY, theta.beta_TY)
    want = np.linalg.inv(Sigma)
    assert np.linalg.norm(emp - want) / np.linalg.norm(want) < 0.02


# ---------------------------------------------------------------------------
# loading columns

def test_loading_update_uniform_when_no_signal(rng):
    theta = random_params(rng, p=5, q=4, p0=2, q0=2)
    n = 3
    data = MatrixDataset(X=np.broadcast_to(theta.mu, (n, 5, 4)).copy(),
                         E=np.zeros(n), Z=np.zeros((n, 0)), Y=np.ones(n))
    state = LatentState(T=np.zeros((n, 2, 2)), ystar=np.zeros(n))
    for _ in range(10):
        A = update_loading_columns("A", theta, state, data, rng)
        theta = replace(theta, A=A)
        assert stiefel_violation(A) <= 1e-8


def test_loading_update_concentration_limit(rng):
    # enormous phi: the drawn column aligns with the projected direction
    theta = random_params(rng, p=6, q=3, p0=1, q0=1, phi=1e6)
    c = rng.standard_normal(6)
    X = np.zeros((1, 6, 3))
    X[0, :, 0] = c
    B = np.zeros((3, 1))
    B[0, 0] = 1.0
    theta = replace(theta, B=B, mu=np.zeros((6, 3)))
    state = LatentState(T=np.ones((1, 1, 1)), ystar=np.zeros(1))
    data = MatrixDataset(X=X, E=np.zeros(1), Z=np.zeros((1, 0)), Y=np.ones(1))
    A = update_loading_columns("A", theta, state, data, rng)
    cos = float(A[:, 0] @ (c / np.linalg.norm(c)))
    assert cos > 0.999


def test_loading_update_preserves_orthonormality(rng):
    theta, state, data = _flat_instance(rng, n=20, p=6, q=5, p0=3, q0=2)
    for _ in range(25):
        theta = replace(theta, A=update_loading_columns("A", theta, state, data, rng))
        theta = replace(theta, B=update_loading_columns("B", theta, state, data, rng))
    assert stiefel_violation(theta.A) <= 1e-8
    assert stiefel_violation(theta.B) <= 1e-8


def test_loading_update_stationary_density_on_sphere(rng):
    # p0 = 1: each call is an independent draw from exp(phi * c'a) on S^2
    phi = 2.0
    theta = random_params(rng, p=3, q=2, p0=1, q0=1, phi=phi)
    X = np.zeros((1, 3, 2))
    X[0, 2, 0] = 1.0                     # c = e_z
    B = np.array([[1.0], [0.0]])
    theta = replace(theta, B=B, mu=np.zeros((3, 2)))
    state = LatentState(T=np.ones((1, 1, 1)), ystar=np.zeros(1))
    data = MatrixDataset(X=X, E=np.zeros(1), Z=np.zeros((1, 0)), Y=np.ones(1))

    n_draws = 100_000
    draws = np.empty((n_draws, 3))
    for s in range(n_draws):
        draws[s] = update_loading_columns("A", theta, state, data, rng)[:, 0]

    # exact bin masses for the cosine marginal of the vMF density
    kappa = phi * 1.0
    edges = np.linspace(-1.0, 1.0, 41)
    exact = np.diff(np.exp(kappa * edges))
    exact /= exact.sum()
    emp = np.histogram(draws[:, 2], bins=edges)[0] / n_draws
    assert 0.5 * np.sum(np.abs(emp - exact)) <= 0.02

    # azimuth is uniform
    az = np.arctan2(draws[:, 1], draws[:, 0])
    emp_az = np.histogram(az, bins=np.linspace(-np.pi, np.pi, 37))[0] / n_draws
    assert 0.5 * np.sum(np.abs(emp_az - 1.0 / 36)) <= 0.02


# ---------------------------------------------------------------------------
# precision, mu, regressions

def test_phi_zero_residual_rate(rng):
    theta, state, data = _flat_instance(rng)
    X = theta.mu + theta.A @ state.T @ theta.B.T
    data = MatrixDataset(X=X, E=data.E, Z=data.Z, Y=data.Y)
    n, p, q = X.shape
    draws = np.array([update_phi(theta, state, data, np.random.default_rng(s))
                      for s in range(40_000)])
    shape = 0.1 + n * p * q / 2
    assert abs(draws.mean() - shape / 0.1) / (shape / 0.1) < 0.01


def test_phi_hand_rate():
    # single scalar observation X=2 with zero reconstruction: rate = 0.1 + 2
    theta = ModelParams(A=np.ones((1, 1)), B=np.ones((1, 1)), mu=np.zeros((1, 1)),
                        beta_ET=np.zeros(1), Omega_ZT=np.zeros((1, 0)), alpha_Y=0.0,
                        beta_EY=0.0, beta_TY=np.zeros(1), beta_ZY=np.zeros(0), phi=1.0)
    state = LatentState(T=np.zeros((1, 1, 1)), ystar=np.zeros(1))
    data = MatrixDataset(X=np.full((1, 1, 1), 2.0), E=np.zeros(1), Z=np.zeros((1, 0)),
                         Y=np.ones(1))
    rng = np.random.default_rng(0)
    draws = np.array([update_phi(theta, state, data, rng) for _ in range(200_000)])
    shape, rate = 0.1 + 0.5, 0.1 + 2.0
    assert abs(draws.mean() - shape / rate) / (shape / rate) < 0.01
    assert abs(draws.var() - shape / rate ** 2) / (shape / rate ** 2) < 0.03


def test_phi_gamma_moments(rng):
    theta, state, data = _flat_instance(rng, n=10)
    rngs = np.random.default_rng(1)
    draws = np.array([update_phi(theta, state, data, rngs) for _ in range(100_000)])
    from matmed import kernels

    rss = kernels.residual_sumsq(data.X - theta.mu, theta.A, state.T, theta.B)
    shape = 0.1 + data.n * data.p * data.q / 2
    rate = 0.1 + rss / 2
    assert abs(draws.mean() - shape / rate) / (shape / rate) < 0.01


def test_mu_conditional_mean(rng):
    theta, state, data = _flat_instance(rng, n=40)
    priors = Priors()
    rngs = np.random.default_rng(2)
    draws = np.stack([update_mu(theta, state, data, rngs, priors) for _ in range(20_000)])
    prec = data.n * theta.phi + priors.mu_prec
    want = theta.phi * np.sum(data.X - theta.A @ state.T @ theta.B.T, axis=0) / prec
    assert np.max(np.abs(draws.mean(axis=0) - want)) < 4.5 / math.sqrt(20_000 * prec)


def test_mediator_regression_prior_when_uninformative(rng):
    # K = 0 and E identically zero: the posterior is the N(0, 1) prior
    theta, state, data = _flat_instance(rng, n=30)
    data = MatrixDataset(X=data.X, E=np.zeros(data.n), Z=data.Z, Y=data.Y)
    rngs = np.random.default_rng(3)
    draws = np.stack([update_mediator_regression(theta, state, data, rngs)[0]
                      for _ in range(20_000)])
    assert np.max(np.abs(draws.mean(axis=0))) < 0.03
    assert np.max(np.abs(draws.std(axis=0) - 1.0)) < 0.03


def test_mediator_regression_ridge_shrinkage(rng):
    # single subject with E = 1: posterior mean is t / (1 + reg_prec)
    theta = random_params(rng, p=4, q=3, p0=1, q0=2)
    t = np.array([[0.8, -1.4]])
    state = LatentState(T=t[None, :, :].reshape(1, 1, 2), ystar=np.zeros(1))
    data = MatrixDataset(X=np.zeros((1, 4, 3)), E=np.ones(1), Z=np.zeros((1, 0)),
                         Y=np.ones(1))
    rngs = np.random.default_rng(4)
    draws = np.stack([update_mediator_regression(theta, state, data, rngs)[0]
                      for _ in range(20_000)])
    want = vec_batch(state.T)[0] / 2.0
    assert np.max(np.abs(draws.mean(axis=0) - want)) < 0.02


def test_mediator_regression_consistency(rng):
    theta = random_params(rng, p=4, q=3, p0=2, q0=2, K=1)
    n = 5000
    data, state = simulate_dataset(theta, n, rng)
    bet, om = update_mediator_regression(theta, state, data, rng)
    D = np.column_stack([data.E, data.Z])
    V = np.linalg.inv(D.T @ D + np.eye(2))
    sd = math.sqrt(V[0, 0])
    assert np.max(np.abs(bet - theta.beta_ET)) < 4 * sd + 0.05


def test_outcome_regression_single_row_covariance(rng):
    theta = random_params(rng, p=4, q=3, p0=1, q0=1)
    state = LatentState(T=np.full((1, 1, 1), 0.4), ystar=np.array([0.9]))
    data = MatrixDataset(X=np.zeros((1, 4, 3)), E=np.ones(1), Z=np.zeros((1, 0)),
                         Y=np.ones(1))
    rngs = np.random.default_rng(5)
    draws = np.stack([np.concatenate([[a], [b], c, d]) for a, b, c, d in
                      (update_outcome_regression(theta, state, data, rngs)
                       for _ in range(60_000))])
    d_row = np.array([1.0, 1.0, 0.4])
    want = np.linalg.inv(np.outer(d_row, d_row) + np.eye(3))
    emp = np.cov(draws.T)
    assert np.linalg.norm(emp - want) / np.linalg.norm(want) < 0.03


def test_outcome_regression_shrinkage_limit(rng):
    theta, state, data = _flat_instance(rng, n=25)
    state = LatentState(T=state.T, ystar=np.zeros(data.n))
    priors = Priors(reg_prec=1e10)
    a, bey, bty, bzy = update_outcome_regression(theta, state, data,
                                                 np.random.default_rng(6), priors)
    assert max(abs(a), abs(bey), float(np.max(np.abs(bty)))) < 1e-3


def test_outcome_regression_consistency(rng):
    theta = random_params(rng, p=4, q=3, p0=2, q0=2)
    n = 5000
    data, state = simulate_dataset(theta, n, rng)
    # condition on the exact generating auxiliaries
    rows = [update_outcome_regression(theta, state, data, rng) for _ in range(200)]
    bets = np.stack([np.concatenate([[a], [b], c]) for a, b, c, _ in rows])
    truthv = np.concatenate([[theta.alpha_Y], [theta.beta_EY], theta.beta_TY])
    sd = bets.std(axis=0)
    assert np.all(np.abs(bets.mean(axis=0) - truthv) < 4 * sd + 0.03)


# ---------------------------------------------------------------------------
# varimax propagation

def test_varimax_propagation_preserves_loglik(rng):
    theta, state, data = _flat_instance(rng, n=8)
    base = complete_loglik(theta, state, data)
    theta2, state2 = varimax_rotate_and_propagate(theta, state)
    assert abs(complete_loglik(theta2, state2, data) - base) <= 1e-10 * max(1, abs(base))


def test_varimax_propagation_identifiable_biproducts(rng):
    theta, state, data = _flat_instance(rng, n=8)
    theta2, _ = varimax_rotate_and_propagate(theta, state)
    W1, W2 = theta.W(), theta2.W()
    assert np.max(np.abs(W1 @ W1.T - W2 @ W2.T)) <= 1e-10
    assert abs(theta.beta_TY @ theta.beta_TY - theta2.beta_TY @ theta2.beta_TY) <= 1e-10
    assert np.max(np.abs(W1 @ theta.beta_ET - W2 @ theta2.beta_ET)) <= 1e-10
    assert abs(theta.beta_ET @ theta.beta_TY - theta2.beta_ET @ theta2.beta_TY) <= 1e-10


def test_varimax_propagation_improves_criterion(rng):
    theta, state, data = _flat_instance(rng, n=8)
    theta2, _ = varimax_rotate_and_propagate(theta, state)
    assert varimax_criterion(theta2.A) >= varimax_criterion(theta.A) - 1e-12
    assert varimax_criterion(theta2.B) >= varimax_criterion(theta.B) - 1e-12


def test_varimax_single_column_sign_normalization(rng):
    theta = random_params(rng, p=4, q=3, p0=1, q0=1)
    theta = replace(theta, A=-np.abs(theta.A))
    state = LatentState(T=np.ones((1, 1, 1)), ystar=np.zeros(1))
    theta2, _ = varimax_rotate_and_propagate(theta, state)
    j = np.argmax(np.abs(theta2.A[:, 0]))
    assert theta2.A[j, 0] > 0


# ---------------------------------------------------------------------------
# joint-distribution (Geweke-style) check

def test_successive_conditional_preserves_prior():
    from matmed.tensor import sample_uniform_stiefel

    rng = np.random.default_rng(77)
    p, q, p0, q0, n = 3, 3, 1, 2, 2
    d = p0 * q0
    priors = Priors()
    cfg = SamplerConfig(iterations=10, burn_in=1, thin=1, seed=0, priors=priors)

    def prior_theta():
        return ModelParams(
            A=sample_uniform_stiefel(p, p0, rng),
            B=sample_uniform_stiefel(q, q0, rng),
            mu=rng.standard_normal((p, q)) / math.sqrt(priors.mu_prec),
            beta_ET=rng.standard_normal(d),
            Omega_ZT=np.zeros((d, 0)),
            alpha_Y=float(rng.standard_normal()),
            beta_EY=float(rng.standard_normal()),
            beta_TY=rng.standard_normal(d),
            beta_ZY=np.zeros(0),
            phi=float(rng.gamma(priors.phi_shape, 1.0 / priors.phi_rate)),
        )

    theta = prior_theta()
    cycles = 6000
    phis = np.empty(cycles)
    beys = np.empty(cycles)
    for c in range(cycles):
        data, state = simulate_dataset(theta, n, rng)
        theta, state = gibbs.gibbs_sweep(theta, state, data, rng, cfg)
        phis[c] = theta.phi
        beys[c] = theta.beta_EY

    from matmed.diagnostics import effective_sample_size

    ess_phi = effective_sample_size(phis)
    ess_bey = effective_sample_size(beys)
    se_phi = math.sqrt(10.0 / ess_phi)          # prior var of phi is shape/rate^2 = 10
    se_bey = math.sqrt(1.0 / ess_bey)
    assert abs(phis.mean() - 1.0) < 5 * se_phi
    assert abs(beys.mean() - 0.0) < 5 * se_bey
