"""Model-selection and chain-quality metrics: variance explained, DIC,
effective sample size, and the latent-dimension grid search."""

import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._parallel import parallel_map
from .effects import EffectEstimates, posterior_effects
from .errors import EvaluationError
from .gibbs import PosteriorDraws, SamplerConfig, run_chain
from .model import LatentState, MatrixDataset, complete_loglik
from .rngutil import substream_seed
from .twostep import MpcaFit


def variance_explained(fit_or_draws, data: MatrixDataset) -> float:
    """Share of centered variance captured by the fitted latent reconstruction.

    For an :class:`MpcaFit` this is the plug-in ratio with the projected
    features.  For :class:`PosteriorDraws` it is the posterior mean of the
    per-draw explained share, which is invariant to the rotation/relabeling
    of individual draws (a plug-in ratio at averaged frames is not).
    """
    if isinstance(fit_or_draws, MpcaFit):
        A, B = fit_or_draws.A_hat, fit_or_draws.B_hat
        T, mu = fit_or_draws.T_hat, fit_or_draws.mu_hat
        Xc = data.X - mu
        total = float(np.vdot(Xc, Xc))
        if total <= 0:
            raise EvaluationError("zero total variance; variance explained undefined")
        rss = kernels.residual_sumsq(Xc, A, T, B)
        return min(1.0, max(0.0, 1.0 - rss / total))
    if isinstance(fit_or_draws, PosteriorDraws):
        draws = fit_or_draws
        if np.any(draws.total_ss <= 0):
            raise EvaluationError("zero total variance; variance explained undefined")
        per_draw = 1.0 - draws.resid_ss / draws.total_ss
        return float(np.clip(per_draw, 0.0, 1.0).mean())
    raise EvaluationError(f"unsupported fit object {type(fit_or_draws).__name__}")


def _dic_from(deviances: np.ndarray, deviance_at_mean: float):
    d_bar = float(np.mean(deviances))
    p_d = d_bar - deviance_at_mean
    return d_bar + p_d, p_d


def dic(draws: PosteriorDraws, data: MatrixDataset):
    """Complete-data DIC with plug-in latent features.

    Deviance is -2 x complete-data log-likelihood; the plug-in point uses
    posterior means, loading frames retracted to the Stiefel manifold.
    Returns ``(dic, p_d)``.
    """
    theta_bar = draws.mean_params()
    state_bar = LatentState(T=draws.latent_mean, ystar=np.zeros(data.n))
    d_hat = -2.0 * complete_loglik(theta_bar, state_bar, data)
    return _dic_from(draws.deviance, d_hat)


def effective_sample_size(trace) -> float:
    """Initial-monotone-sequence autocorrelation estimator of the ESS.

    A constant trace is flagged with a warning and returns the trace length
    (zero autocorrelation by convention).
    """
    x = np.asarray(trace, dtype=np.float64)
    if x.ndim != 1 or x.size < 10:
        raise EvaluationError("need a 1-D trace of length >= 10")
    n = x.size
    x = x - x.mean()
    var = float(np.vdot(x, x)) / n
    if var <= 0:
        warnings.warn("constant trace; effective sample size set to the length")
        return float(n)
    # autocovariances via FFT, normalized to autocorrelations
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n] / n
    rho = acov / acov[0]
    # Geyer: sum paired autocorrelations while positive, enforce monotone decay
    tau = -1.0
    prev = np.inf
    for k in range(0, n - 1, 2):
        gamma = rho[k] + rho[k + 1] if k + 1 < n else rho[k]
        if gamma <= 0:
            break
        gamma = min(gamma, prev)
        prev = gamma
        tau += 2.0 * gamma
    tau = max(tau, 1.0 / n)
    return float(min(n, n / tau))


@dataclass(frozen=True)
class ModelGridResult:
    p0: int
    q0: int
    dic: float
    p_d: float
    ve: float
    effects: EffectEstimates
    draws: PosteriorDraws
    seconds: float
    error: str | None = None


def grid_cell(data: MatrixDataset, p0: int, q0: int, config: SamplerConfig,
              z_ref=None) -> ModelGridResult:
    start = time.perf_counter()
    draws = run_chain(data, data.dims(p0, q0), config)
    dic_val, p_d = dic(draws, data)
    ve = variance_explained(draws, data)
    eff = posterior_effects(draws, z_ref=z_ref)
    return ModelGridResult(p0=p0, q0=q0, dic=dic_val, p_d=p_d, ve=ve, effects=eff,
                           draws=draws, seconds=time.perf_counter() - start)


def _grid_cell_task(args):
    data, p0, q0, cfg, z_ref = args
    try:
        return grid_cell(data, p0, q0, cfg, z_ref=z_ref)
    except Exception as exc:  # noqa: BLE001 - per-cell isolation is the contract
        return ModelGridResult(
            p0=p0, q0=q0, dic=float("nan"), p_d=float("nan"), ve=float("nan"),
            effects=None, draws=None, seconds=0.0,
            error=f"{type(exc).__name__}: {exc}")


def model_grid_search(data: MatrixDataset, p0_range, q0_range, config: SamplerConfig,
                      z_ref=None, workers: int | None = None) -> list:
    """Fit one chain per (p0, q0) cell; failures are recorded, not raised.

    Each cell gets an independent seed substream of ``config.seed``; cells run
    in parallel up to the MATMED_THREADS cap.
    """
    tasks = []
    for p0 in p0_range:
        for q0 in q0_range:
            cell_cfg = SamplerConfig(
                iterations=config.iterations, burn_in=config.burn_in, thin=config.thin,
                seed=substream_seed(config.seed, "grid", p0, q0),
                varimax_enabled=config.varimax_enabled, retain_full=config.retain_full,
                priors=config.priors,
            )
            tasks.append((data, p0, q0, cell_cfg, z_ref))
    return parallel_map(_grid_cell_task, tasks, workers=workers)
