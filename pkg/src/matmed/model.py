"""The joint model: parameters, priors, complete-data log-likelihood, and the
synthetic data-generating mechanism.

The model has three pieces, all sharing the latent features T_i (p0 x q0):

* observation:  vec(X_i) = vec(mu) + (B kron A) vec(T_i) + noise(1/phi)
* mediator:     vec(T_i) = beta_ET * E_i + Omega_ZT Z_i + noise(1)
* outcome:      P(Y_i = 1) = Phi(alpha_Y + beta_EY E_i + beta_TY'vec(T_i)
                             + beta_ZY'Z_i)
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import log_ndtr

from . import kernels
from .errors import DimensionError, EvaluationError
from .rotation import varimax_rotation
from .tensor import (Dims, kron, require_stiefel, sample_uniform_stiefel, unvec_batch,
                     vec, vec_batch)

MU_FIXED = "fixed-at-sample-mean"
MU_SAMPLED = "sampled"


@dataclass(frozen=True)
class Priors:
    """Weakly informative conjugate priors.

    phi ~ Gamma(phi_shape, phi_rate) on the noise *precision*; all regression
    coefficients are N(0, 1/reg_prec); mu is either fixed at the sample mean
    or sampled with per-element prior precision mu_prec.
    """

    phi_shape: float = 0.1
    phi_rate: float = 0.1
    reg_prec: float = 1.0
    mu_mode: str = MU_SAMPLED
    mu_prec: float = 0.01

    def __post_init__(self):
        for name in ("phi_shape", "phi_rate", "reg_prec", "mu_prec"):
            if getattr(self, name) <= 0:
                raise EvaluationError(f"prior {name} must be > 0")
        if self.mu_mode not in (MU_FIXED, MU_SAMPLED):
            raise EvaluationError(f"unknown mu_mode {self.mu_mode!r}")


@dataclass(frozen=True)
class ModelParams:
    """Full parameter vector of the joint model."""

    A: np.ndarray          # p x p0, orthonormal columns
    B: np.ndarray          # q x q0, orthonormal columns
    mu: np.ndarray         # p x q
    beta_ET: np.ndarray    # p0*q0
    Omega_ZT: np.ndarray   # p0*q0 x K
    alpha_Y: float
    beta_EY: float
    beta_TY: np.ndarray    # p0*q0
    beta_ZY: np.ndarray    # K
    phi: float

    @property
    def p(self):
        return self.A.shape[0]

    @property
    def q(self):
        return self.B.shape[0]

    @property
    def p0(self):
        return self.A.shape[1]

    @property
    def q0(self):
        return self.B.shape[1]

    @property
    def d(self):
        return self.p0 * self.q0

    @property
    def K(self):
        return self.Omega_ZT.shape[1]

    def W(self) -> np.ndarray:
        return kron(self.B, self.A)

    def validate(self, stiefel_tol: float = 1e-8) -> "ModelParams":
        require_stiefel(self.A, stiefel_tol, "A")
        require_stiefel(self.B, stiefel_tol, "B")
        if self.phi <= 0:
            raise EvaluationError(f"phi must be > 0, got {self.phi}")
        d = self.d
        if self.beta_ET.shape != (d,) or self.beta_TY.shape != (d,):
            raise DimensionError("beta_ET/beta_TY length must equal p0*q0")
        if self.Omega_ZT.shape[0] != d or self.beta_ZY.shape != (self.K,):
            raise DimensionError("covariate coefficient shapes inconsistent")
        if self.mu.shape != (self.p, self.q):
            raise DimensionError("mu must be p x q")
        return self

    def rotated(self, P: np.ndarray, Q: np.ndarray) -> "ModelParams":
        """Apply the orthogonal reparameterization (A P, B Q, (Q kron P)' betas)."""
        QP = kron(Q, P)
        return replace(
            self,
            A=self.A @ P,
            B=self.B @ Q,
            beta_ET=QP.T @ self.beta_ET,
            beta_TY=QP.T @ self.beta_TY,
            Omega_ZT=QP.T @ self.Omega_ZT,
        )


@dataclass(frozen=True)
class LatentState:
    """Latent features plus probit auxiliaries."""

    T: np.ndarray       # n x p0 x q0
    ystar: np.ndarray   # n

    def rotated(self, P: np.ndarray, Q: np.ndarray) -> "LatentState":
        return LatentState(T=np.matmul(P.T, self.T) @ Q, ystar=self.ystar)


@dataclass(frozen=True)
class MatrixDataset:
    """Per-subject matrix observations with treatment, covariates and outcome."""

    X: np.ndarray   # n x p x q
    E: np.ndarray   # n, stored as float (binary in the experiments)
    Z: np.ndarray   # n x K
    Y: np.ndarray   # n, values in {0, 1}

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=np.float64))
        object.__setattr__(self, "E", np.asarray(self.E, dtype=np.float64))
        object.__setattr__(self, "Z", np.asarray(self.Z, dtype=np.float64))
        object.__setattr__(self, "Y", np.asarray(self.Y, dtype=np.float64))
        if self.X.ndim != 3:
            raise DimensionError("X must have shape (n, p, q)")
        n = self.X.shape[0]
        if self.Z.ndim != 2 or self.Z.shape[0] != n:
            raise DimensionError("Z must have shape (n, K)")
        if self.E.shape != (n,) or self.Y.shape != (n,):
            raise DimensionError("E and Y must have shape (n,)")
        if not np.all(np.isfinite(self.X)):
            raise EvaluationError("X contains non-finite entries")
        if not np.all(np.isin(self.Y, (0.0, 1.0))):
            raise EvaluationError("Y must be binary 0/1")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.X.shape[2]

    @property
    def K(self):
        return self.Z.shape[1]

    def dims(self, p0: int, q0: int) -> Dims:
        return Dims(p=self.p, q=self.q, p0=p0, q0=q0, K=self.K, n=self.n)


def linear_predictor(theta: ModelParams, T: np.ndarray, E: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Probit linear predictor eta_i for every subject."""
    Tvec = vec_batch(T)
    return theta.alpha_Y + theta.beta_EY * E + Tvec @ theta.beta_TY + Z @ theta.beta_ZY


def complete_loglik(theta: ModelParams, state: LatentState, data: MatrixDataset) -> float:
    """Complete-data log-likelihood of (X, T, Y) under the joint model.

    The probit auxiliaries do not enter; the outcome contributes through
    the Bernoulli(Phi(eta)) likelihood directly.
    """
    scalars = [theta.alpha_Y, theta.beta_EY, theta.phi]
    if not (np.all(np.isfinite(scalars))
            and np.all(np.isfinite(theta.beta_ET)) and np.all(np.isfinite(theta.beta_TY))
            and np.all(np.isfinite(theta.A)) and np.all(np.isfinite(theta.B))
            and np.all(np.isfinite(theta.mu)) and np.all(np.isfinite(theta.Omega_ZT))
            and np.all(np.isfinite(theta.beta_ZY)) and theta.phi > 0):
        raise EvaluationError("non-finite or invalid parameters in complete_loglik")

    n, p, q = data.X.shape
    d = theta.d
    Xc = data.X - theta.mu
    rss_x = kernels.residual_sumsq(Xc, theta.A, state.T, theta.B)
    ll_x = -0.5 * n * p * q * math.log(2.0 * math.pi) \
        + 0.5 * n * p * q * math.log(theta.phi) - 0.5 * theta.phi * rss_x

    Tvec = vec_batch(state.T)
    mean_T = np.outer(data.E, theta.beta_ET) + data.Z @ theta.Omega_ZT.T
    rt = Tvec - mean_T
    ll_t = -0.5 * n * d * math.log(2.0 * math.pi) - 0.5 * float(np.vdot(rt, rt))

    eta = linear_predictor(theta, state.T, data.E, data.Z)
    ll_y = float(np.sum(np.where(data.Y == 1.0, log_ndtr(eta), log_ndtr(-eta))))
    return ll_x + ll_t + ll_y


def simulate_dataset(theta: ModelParams, n: int, rng: np.random.Generator,
                     Z: np.ndarray | None = None):
    """Draw a synthetic dataset of n subjects from the joint model.

    E_i ~ Bernoulli(1/2); covariates, when the model has any and none are
    supplied, are standard normal.  Returns ``(MatrixDataset, LatentState)``
    where the latent state carries the exact T_i and probit auxiliaries that
    generated the outcomes.
    """
    p, q, d, K = theta.p, theta.q, theta.d, theta.K
    E = (rng.random(n) < 0.5).astype(np.float64)
    if Z is None:
        Z = rng.standard_normal((n, K)) if K > 0 else np.zeros((n, 0))
    Z = np.asarray(Z, dtype=np.float64).reshape(n, K)

    mean_T = np.outer(E, theta.beta_ET) + Z @ theta.Omega_ZT.T
    Tvec = mean_T + rng.standard_normal((n, d))
    T = unvec_batch(Tvec, theta.p0, theta.q0)

    W = theta.W()
    Xvec = (vec(theta.mu)[None, :] + Tvec @ W.T
            + rng.standard_normal((n, p * q)) / math.sqrt(theta.phi))
    X = unvec_batch(Xvec, p, q)

    eta = theta.alpha_Y + theta.beta_EY * E + Tvec @ theta.beta_TY + Z @ theta.beta_ZY
    ystar = eta + rng.standard_normal(n)
    Y = (ystar >= 0.0).astype(np.float64)
    data = MatrixDataset(X=X, E=E, Z=Z, Y=Y)
    return data, LatentState(T=T, ystar=ystar)


def generate_sparse_loadings(rows: int, cols: int, threshold: float,
                             rng: np.random.Generator, max_retries: int = 50) -> np.ndarray:
    """Sparse near-orthonormal loading frame.

    Uniform Stiefel draw, varimax-rotated, entries with |value| <= threshold
    zeroed, columns renormalized to unit length.  Thresholding can leave small
    correlations between columns, so the result is unit-column but not
    necessarily orthonormal.
    """
    if cols > rows:
        raise DimensionError(f"need cols <= rows, got {rows} x {cols}")
    if threshold < 0:
        raise EvaluationError("threshold must be >= 0")
    for _ in range(max_retries):
        F = sample_uniform_stiefel(rows, cols, rng)
        F = F @ varimax_rotation(F)
        F = np.where(np.abs(F) <= threshold, 0.0, F)
        norms = np.linalg.norm(F, axis=0)
        if np.all(norms > 0):
            return F / norms
    raise EvaluationError(
        f"thresholding at {threshold} zeroed a whole column in {max_retries} attempts")


def paper_truth_params(scenario: str, rng: np.random.Generator) -> ModelParams:
    """Ground-truth parameters of the synthetic experiments.

    ``low`` is a 10 x 10 observed matrix, ``high`` 10 x 50; both use a 2 x 2
    latent feature matrix, sparse loadings thresholded at 0.3, and effects
    beta_ET = (0.5, 0.5, 0, 0), beta_TY = (0.7, 0, 0.7, 0), beta_EY = 0.3,
    noise precision 25, no covariates.
    """
    if scenario == "low":
        p, q = 10, 10
    elif scenario == "high":
        p, q = 10, 50
    else:
        raise EvaluationError(f"scenario must be 'low' or 'high', got {scenario!r}")
    p0 = q0 = 2
    A = generate_sparse_loadings(p, p0, 0.3, rng)
    B = generate_sparse_loadings(q, q0, 0.3, rng)
    return ModelParams(
        A=A, B=B, mu=np.zeros((p, q)),
        beta_ET=np.array([0.5, 0.5, 0.0, 0.0]),
        Omega_ZT=np.zeros((p0 * q0, 0)),
        alpha_Y=0.0, beta_EY=0.3,
        beta_TY=np.array([0.7, 0.0, 0.7, 0.0]),
        beta_ZY=np.zeros(0), phi=25.0,
    )
