"""Bayesian joint mediation analysis for matrix-valued mediators."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .effects import EffectEstimates, closed_form_effects, mc_effects, posterior_effects
from .gibbs import PosteriorDraws, SamplerConfig, run_chain
from .mediation_map import (MediationMap, auc_active_indicators, build_map,
                            mediation_quantities, posterior_probability_map,
                            true_active_set)
from .model import (LatentState, MatrixDataset, ModelParams, Priors, complete_loglik,
                    generate_sparse_loadings, paper_truth_params, simulate_dataset)
from .tensor import Dims, kron, sample_uniform_stiefel, unvec, vec
from .twostep import MpcaFit, TwoStepFit, fit_mpca, probit_mle, two_step_fit

__all__ = [
    "BACKEND", "Dims", "EffectEstimates", "LatentState", "MatrixDataset",
    "MediationMap", "ModelParams", "MpcaFit", "PosteriorDraws", "Priors",
    "SamplerConfig", "TwoStepFit", "auc_active_indicators", "build_map",
    "closed_form_effects", "complete_loglik", "fit_mpca", "generate_sparse_loadings",
    "kron", "mc_effects", "mediation_quantities", "paper_truth_params",
    "posterior_effects", "posterior_probability_map", "probit_mle", "run_chain",
    "sample_uniform_stiefel", "simulate_dataset", "true_active_set", "two_step_fit",
    "unvec", "vec",
]
