"""Two-step baseline: algorithmic multilinear PCA, then separate regressions.

Step 1 alternates eigen-updates of the row and column frames until the
captured variance stabilizes.  Step 2 regresses each extracted feature on the
treatment and covariates (ordinary least squares with an intercept, since the
features are centered) and fits a probit MLE for the outcome.  Mediation
quantities use the varimax-rotated Kronecker loading for comparability with
the joint model.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from . import kernels
from .errors import DimensionError, EvaluationError, PerfectSeparationError
from .model import MatrixDataset, ModelParams
from .rotation import varimax_with_convention
from .tensor import kron, vec_batch


@dataclass(frozen=True)
class MpcaFit:
    A_hat: np.ndarray
    B_hat: np.ndarray
    mu_hat: np.ndarray
    T_hat: np.ndarray            # n x p0 x q0
    explained_variance: float
    converged: bool
    n_iter: int
    variance_history: tuple = ()  # captured variance per iteration, winning run


def _fix_sign(V: np.ndarray) -> np.ndarray:
    W = V.copy()
    for j in range(W.shape[1]):
        i = int(np.argmax(np.abs(W[:, j])))
        if W[i, j] < 0:
            W[:, j] = -W[:, j]
    return W


def _top_eigvecs(S: np.ndarray, k: int) -> np.ndarray:
    vals, vecs = np.linalg.eigh(S)
    return _fix_sign(vecs[:, ::-1][:, :k])


def _captured_variance(Xc, A, B) -> float:
    P = kernels.project_features(Xc, A, B)
    return float(np.vdot(P, P))


def fit_mpca(data, p0: int, q0: int, max_iters: int = 200, tol: float = 1e-10,
             n_restarts: int = 3, seed: int = 0) -> MpcaFit:
    """Alternating-eigendecomposition MPCA fit.

    Captured variance is non-decreasing across iterations; the deterministic
    full-projection initialization is hedged with seeded random restarts and
    the best run wins.  Unlike the sampler, p0 = p or q0 = q is allowed.
    """
    X = data.X if isinstance(data, MatrixDataset) else np.asarray(data, dtype=np.float64)
    n, p, q = X.shape
    if not (1 <= p0 <= p and 1 <= q0 <= q):
        raise DimensionError(f"need 1 <= p0 <= {p} and 1 <= q0 <= {q}")
    mu_hat = X.mean(axis=0)
    Xc = X - mu_hat
    total = float(np.vdot(Xc, Xc))
    if total <= 0:
        raise EvaluationError("data has zero variance around the mean")

    mode2 = np.tensordot(Xc, Xc, axes=[(0, 1), (0, 1)])   # q x q
    inits = [_top_eigvecs(mode2, q0)]
    rng = np.random.default_rng(seed)
    from .tensor import sample_uniform_stiefel

    for _ in range(n_restarts):
        inits.append(sample_uniform_stiefel(q, q0, rng))

    best = None
    for B in inits:
        A = np.zeros((p, p0))
        prev = -np.inf
        converged = False
        it = 0
        history = []
        for it in range(1, max_iters + 1):
            XB = Xc @ B                                     # n x p x q0
            S1 = np.tensordot(XB, XB, axes=[(0, 2), (0, 2)])
            A = _top_eigvecs(S1, p0)
            XtA = np.matmul(Xc.transpose(0, 2, 1), A)       # n x q x p0
            S2 = np.tensordot(XtA, XtA, axes=[(0, 2), (0, 2)])
            B = _top_eigvecs(S2, q0)
            cur = _captured_variance(Xc, A, B)
            history.append(cur)
            if cur - prev <= tol * max(1.0, abs(cur)):
                converged = True
                break
            prev = cur
        cur = history[-1]
        if best is None or cur > best[0]:
            best = (cur, A, B, converged, it, tuple(history))

    cap, A, B, converged, it, history = best
    if not converged:
        warnings.warn("MPCA alternating fit did not converge; returning best iterate")
    T_hat = kernels.project_features(Xc, A, B)
    return MpcaFit(A_hat=A, B_hat=B, mu_hat=mu_hat, T_hat=T_hat,
                   explained_variance=min(1.0, max(0.0, cap / total)),
                   converged=converged, n_iter=it, variance_history=history)


def probit_loglik(beta, y, D) -> float:
    eta = D @ beta
    return float(np.sum(np.where(y == 1.0, log_ndtr(eta), log_ndtr(-eta))))


def _probit_score_info(beta, y, D):
    eta = D @ beta
    # inverse Mills ratios, numerically safe via the log-cdf
    lam_pos = np.exp(-0.5 * eta * eta - 0.5 * math.log(2 * math.pi) - log_ndtr(eta))
    lam_neg = np.exp(-0.5 * eta * eta - 0.5 * math.log(2 * math.pi) - log_ndtr(-eta))
    lam = np.where(y == 1.0, lam_pos, -lam_neg)
    w = lam * (lam + eta)
    grad = D.T @ lam
    info = (D * w[:, None]).T @ D
    return grad, info


def probit_mle(y, design, max_iter: int = 100, grad_tol: float = 1e-8):
    """Newton probit fit; returns (coef, covariance).

    Raises :class:`PerfectSeparationError` when the likelihood has no interior
    maximizer; falls back to a ridge-stabilized step (with a warning) when the
    observed information is singular.
    """
    y = np.asarray(y, dtype=np.float64)
    D = np.asarray(design, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != y.shape[0]:
        raise DimensionError("design must be (n, m) aligned with y")
    m = D.shape[1]
    beta = np.zeros(m)
    for _ in range(max_iter):
        grad, info = _probit_score_info(beta, y, D)
        if np.linalg.norm(grad) <= grad_tol:
            break
        try:
            cond = np.linalg.cond(info)
            if not np.isfinite(cond) or cond > 1e12:
                raise np.linalg.LinAlgError("ill-conditioned information")
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            warnings.warn("singular probit information; ridge-stabilized step")
            step = np.linalg.solve(info + 1e-6 * np.eye(m), grad)
        # halve the step until the log-likelihood does not decrease
        ll0 = probit_loglik(beta, y, D)
        scale = 1.0
        for _ in range(40):
            cand = beta + scale * step
            if probit_loglik(cand, y, D) >= ll0 - 1e-12:
                break
            scale *= 0.5
        beta = beta + scale * step
        if np.linalg.norm(beta) > 1e6:
            raise PerfectSeparationError("probit estimates diverged (separated data)")
    grad, info = _probit_score_info(beta, y, D)
    # a coefficient whose margins are all strictly correct separates the data,
    # so the likelihood has no interior maximizer (gradient vanishes at infinity)
    if np.all((2.0 * y - 1.0) * (D @ beta) > 0):
        raise PerfectSeparationError("probit likelihood maximized at infinity")
    if np.linalg.norm(grad) > grad_tol:
        raise EvaluationError(f"probit Newton failed to reach gradient tolerance "
                              f"({np.linalg.norm(grad):.2e} > {grad_tol:.0e})")
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        warnings.warn("singular information at optimum; ridge-stabilized covariance")
        cov = np.linalg.inv(info + 1e-6 * np.eye(m))
    return beta, cov


@dataclass(frozen=True)
class TwoStepFit:
    """Point estimates from the two-step pipeline.

    Coefficients are stored in the raw MPCA basis; ``rotation`` is the
    varimax transform of the Kronecker loading, applied only when computing
    mediation quantities (the overall effects are rotation-invariant).
    """

    mpca: MpcaFit
    alpha_T: np.ndarray      # d, mediator intercepts (nuisance)
    beta_ET: np.ndarray      # d
    Omega_ZT: np.ndarray     # d x K
    alpha_Y: float
    beta_EY: float
    beta_TY: np.ndarray      # d
    beta_ZY: np.ndarray      # K
    outcome_cov: np.ndarray
    phi_hat: float
    rotation: np.ndarray     # d x d orthogonal

    def params(self) -> ModelParams:
        """Point estimates packaged for the effects and map modules."""
        return ModelParams(
            A=self.mpca.A_hat, B=self.mpca.B_hat, mu=self.mpca.mu_hat,
            beta_ET=self.beta_ET, Omega_ZT=self.Omega_ZT,
            alpha_Y=self.alpha_Y, beta_EY=self.beta_EY,
            beta_TY=self.beta_TY, beta_ZY=self.beta_ZY, phi=self.phi_hat,
        )

    def mediation_quantities(self) -> np.ndarray:
        W = kron(self.mpca.B_hat, self.mpca.A_hat) @ self.rotation
        bet = self.rotation.T @ self.beta_ET
        bty = self.rotation.T @ self.beta_TY
        return np.abs(W) @ np.abs(bet * bty)


def two_step_fit(data: MatrixDataset, p0: int, q0: int, max_iters: int = 200,
                 tol: float = 1e-10) -> TwoStepFit:
    """MPCA feature extraction followed by OLS mediator and probit outcome fits."""
    fit = fit_mpca(data, p0, q0, max_iters=max_iters, tol=tol)
    n = data.n
    d = p0 * q0
    Tvec = vec_batch(fit.T_hat)

    D_med = np.column_stack([np.ones(n), data.E, data.Z])
    coef_med, *_ = np.linalg.lstsq(D_med, Tvec, rcond=None)
    alpha_T = coef_med[0]
    beta_ET = coef_med[1]
    Omega = coef_med[2:].T.copy()

    D_out = np.column_stack([np.ones(n), data.E, Tvec, data.Z])
    coef_out, cov_out = probit_mle(data.Y, D_out)
    alpha_Y = float(coef_out[0])
    beta_EY = float(coef_out[1])
    beta_TY = coef_out[2:2 + d].copy()
    beta_ZY = coef_out[2 + d:].copy()

    Xc = data.X - fit.mu_hat
    rss = float(np.vdot(Xc, Xc)) - float(np.vdot(Tvec, Tvec))
    dof = n * data.p * data.q
    phi_hat = dof / max(rss, 1e-12)

    R = varimax_with_convention(kron(fit.B_hat, fit.A_hat))
    return TwoStepFit(
        mpca=fit, alpha_T=alpha_T, beta_ET=beta_ET, Omega_ZT=Omega,
        alpha_Y=alpha_Y, beta_EY=beta_EY, beta_TY=beta_TY, beta_ZY=beta_ZY,
        outcome_cov=cov_out, phi_hat=phi_hat, rotation=R,
    )
