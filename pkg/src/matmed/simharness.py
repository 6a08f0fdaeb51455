"""Replicated synthetic experiments: joint model vs two-step baseline.

One master seed drives everything through named substreams: the ground-truth
loadings, each replicate's dataset, and each replicate's chain.  Truth
loadings are regenerated per master seed, so targets are distributional.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ._parallel import parallel_map
from .effects import closed_form_effects, posterior_effects
from .gibbs import SamplerConfig, run_chain
from .mediation_map import (auc_active_indicators, mediation_quantities,
                            posterior_probability_map, true_active_set)
from .model import ModelParams, Priors, paper_truth_params, simulate_dataset
from .rngutil import substream, substream_seed
from .twostep import two_step_fit

PAPER_KAPPAS = {"low": (0.05, 0.10, 0.15), "high": (0.03, 0.06, 0.09)}

DESK_SCALE = dict(replicates=50, iterations=4000, burn_in=1000, thin=5)
PAPER_SCALE = dict(replicates=500, iterations=10_000, burn_in=3000, thin=5)


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    method: str              # "joint" | "two-step"
    scenario: str
    n: int
    seed: int
    nie: float
    nde: float
    te: float
    ci: dict = field(default_factory=dict)
    quantities: np.ndarray = None          # length pq (posterior mean / point)
    prob_maps: dict = field(default_factory=dict)   # kappa -> length pq
    auc: float = float("nan")
    seconds: float = 0.0
    error: str | None = None


def _fit_one_replicate(args):
    (scenario, n, rep, master_seed, methods, iterations, burn_in, thin,
     kappas, truth, active) = args
    rng = substream(master_seed, "replicate", scenario, n, rep)
    data, _ = simulate_dataset(truth, n, rng)
    out = []
    if "joint" in methods:
        start = time.perf_counter()
        seed = substream_seed(master_seed, "chain", scenario, n, rep)
        try:
            cfg = SamplerConfig(iterations=iterations, burn_in=burn_in, thin=thin,
                                seed=seed, priors=Priors())
            draws = run_chain(data, data.dims(truth.p0, truth.q0), cfg)
            eff = posterior_effects(draws)
            mean_q = draws.quantities.mean(axis=0)
            probs = {k: posterior_probability_map(draws, k).reshape(-1, order="F")
                     for k in kappas}
            out.append(ReplicateResult(
                replicate=rep, method="joint", scenario=scenario, n=n, seed=seed,
                nie=eff.nie, nde=eff.nde, te=eff.te, ci=eff.ci,
                quantities=mean_q, prob_maps=probs,
                auc=auc_active_indicators(mean_q, active),
                seconds=time.perf_counter() - start))
        except Exception as exc:  # noqa: BLE001 - replicate failures are recorded
            out.append(ReplicateResult(
                replicate=rep, method="joint", scenario=scenario, n=n, seed=seed,
                nie=float("nan"), nde=float("nan"), te=float("nan"),
                seconds=time.perf_counter() - start,
                error=f"{type(exc).__name__}: {exc}"))
    if "two-step" in methods:
        start = time.perf_counter()
        try:
            fit = two_step_fit(data, truth.p0, truth.q0)
            eff = closed_form_effects(fit.params())
            q = fit.mediation_quantities()
            out.append(ReplicateResult(
                replicate=rep, method="two-step", scenario=scenario, n=n, seed=0,
                nie=eff.nie, nde=eff.nde, te=eff.te,
                quantities=q, auc=auc_active_indicators(q, active),
                seconds=time.perf_counter() - start))
        except Exception as exc:  # noqa: BLE001
            out.append(ReplicateResult(
                replicate=rep, method="two-step", scenario=scenario, n=n, seed=0,
                nie=float("nan"), nde=float("nan"), te=float("nan"),
                seconds=time.perf_counter() - start,
                error=f"{type(exc).__name__}: {exc}"))
    return out


def scenario_truth(scenario: str, master_seed: int) -> ModelParams:
    return paper_truth_params(scenario, substream(master_seed, "truth", scenario))


def run_simulation(scenario: str, n: int, replicates: int, master_seed: int = 0,
                   methods=("joint", "two-step"), iterations: int = 4000,
                   burn_in: int = 1000, thin: int = 5, kappas=None,
                   workers: int | None = None):
    """Run the replicate study; returns ``(results, truth)``.

    Deterministic given the master seed (replicates are independent
    substreams, so the worker count does not affect results).
    """
    truth = scenario_truth(scenario, master_seed)
    kappas = PAPER_KAPPAS[scenario] if kappas is None else tuple(kappas)
    active = true_active_set(truth.A, truth.B, truth.beta_ET, truth.beta_TY)
    tasks = [(scenario, n, rep, master_seed, tuple(methods), iterations, burn_in,
              thin, kappas, truth, active) for rep in range(replicates)]
    nested = parallel_map(_fit_one_replicate, tasks, workers=workers)
    return [r for chunk in nested for r in chunk], truth


def true_effects(truth: ModelParams):
    eff = closed_form_effects(truth)
    return {"nie": eff.nie, "nde": eff.nde, "te": eff.te}


def summarize_table1(results, truth: ModelParams) -> pd.DataFrame:
    """Per (scenario, n, method, effect): MSE/Var/Bias (x1000) and mean estimate.

    Failed replicates are excluded; their count is reported per cell.
    """
    truths = true_effects(truth)
    rows = []
    ok = [r for r in results if r.error is None]
    failed = [r for r in results if r.error is not None]
    keys = sorted({(r.scenario, r.n, r.method) for r in ok})
    for scenario, n, method in keys:
        cell = [r for r in ok if (r.scenario, r.n, r.method) == (scenario, n, method)]
        n_failed = sum(1 for r in failed
                       if (r.scenario, r.n, r.method) == (scenario, n, method))
        for effect in ("nie", "nde", "te"):
            est = np.array([getattr(r, effect) for r in cell])
            tv = truths[effect]
            rows.append({
                "scenario": scenario, "n": n, "method": method, "effect": effect.upper(),
                "replicates": len(cell), "failed": n_failed,
                "mse_x1000": 1000.0 * float(np.mean((est - tv) ** 2)),
                "var_x1000": 1000.0 * float(np.var(est, ddof=1)) if len(cell) > 1 else 0.0,
                "bias_x1000": 1000.0 * float(np.mean(est) - tv),
                "estimate": float(np.mean(est)),
                "truth": tv,
            })
    return pd.DataFrame(rows)


def export_figure_data(results, truth: ModelParams, outdir):
    """Write scatter (per-element truth vs mean estimate) and heatmap CSVs.

    Returns the list of written paths.  Heatmaps are the replicate-averaged
    posterior exceedance probabilities per threshold, plus the true
    active-indicator mask.
    """
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    p, q = truth.p, truth.q
    truth_q = mediation_quantities(truth)
    active = true_active_set(truth.A, truth.B, truth.beta_ET, truth.beta_TY)
    written = []

    ok = [r for r in results if r.error is None and r.quantities is not None]
    keys = sorted({(r.scenario, r.n, r.method) for r in ok})
    for scenario, n, method in keys:
        cell = [r for r in ok if (r.scenario, r.n, r.method) == (scenario, n, method)]
        Q = np.stack([r.quantities for r in cell])
        aucs = np.array([r.auc for r in cell])
        rows = []
        for m in range(p * q):
            rows.append({
                "element": m, "row": m % p, "col": m // p,
                "truth": truth_q[m] if active[m] else 0.0,
                "mean_estimate": float(Q[:, m].mean()),
                "sd_estimate": float(Q[:, m].std(ddof=1)) if len(cell) > 1 else 0.0,
                "active": bool(active[m]),
                "auc": float(np.nanmean(aucs)),
            })
        path = outdir / f"scatter_{scenario}_{method.replace('-', '')}_n{n}.csv"
        pd.DataFrame(rows).to_csv(path, index=False)
        written.append(path)

        if method != "joint":
            continue
        kappas = sorted({k for r in cell for k in r.prob_maps})
        for kappa in kappas:
            P = np.stack([r.prob_maps[kappa] for r in cell]).mean(axis=0)
            rows = [{"row": m % p, "col": m // p,
                     "probability": float(P[m]), "active": bool(active[m])}
                    for m in range(p * q)]
            path = outdir / f"heatmap_{scenario}_n{n}_kappa{kappa:g}.csv"
            pd.DataFrame(rows).to_csv(path, index=False)
            written.append(path)
    return written
