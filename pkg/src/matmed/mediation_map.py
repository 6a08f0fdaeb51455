"""Mediation quantities per observed-matrix element, posterior-probability
maps, thresholding, and AUC scoring of active-indicator recovery.

The per-element quantity is sum_j |beta_ET_j * beta_TY_j * W_mj| with
W = B kron A; an element is an active indicator of mediation when that sum
is nonzero.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EvaluationError
from .tensor import kron, unvec


def mediation_quantities_from(A, B, beta_ET, beta_TY) -> np.ndarray:
    """Length-pq vector of pathway-weight sums, nonnegative by construction."""
    W = kron(B, A)
    return np.abs(W) @ np.abs(np.asarray(beta_ET) * np.asarray(beta_TY))


def mediation_quantities(theta) -> np.ndarray:
    return mediation_quantities_from(theta.A, theta.B, theta.beta_ET, theta.beta_TY)


def quantity_matrix(quantities: np.ndarray, p: int, q: int) -> np.ndarray:
    """Reshape a length-pq quantity vector back to the observed p x q layout."""
    return unvec(quantities, p, q)


def _draw_quantities(draws) -> np.ndarray:
    q = getattr(draws, "quantities", draws)
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] == 0:
        raise EvaluationError("need a nonempty (R, pq) array of per-draw quantities")
    return q


def posterior_probability_map(draws, kappa: float, p: int | None = None,
                              q: int | None = None) -> np.ndarray:
    """Elementwise posterior exceedance probabilities Pr(quantity > kappa).

    Returns the p x q matrix when dimensions are available (either from the
    draws object or passed explicitly), otherwise the flat length-pq vector.
    """
    if kappa < 0:
        raise EvaluationError("kappa must be >= 0")
    qd = _draw_quantities(draws)
    probs = np.mean(qd > kappa, axis=0)
    dims = getattr(draws, "dims", None)
    if p is None and dims is not None:
        p, q = dims.p, dims.q
    if p is None:
        return probs
    return unvec(probs, p, q)


@dataclass(frozen=True)
class MediationMap:
    """Posterior-mean quantities with exceedance maps over a threshold grid."""

    quantities: np.ndarray        # length pq, posterior mean
    matrix: np.ndarray            # p x q reshape of quantities
    kappa_list: tuple
    prob_maps: dict               # kappa -> p x q matrix
    kappa_rule: str = "explicit"


def build_map(draws, kappa_list, p: int | None = None, q: int | None = None,
              kappa_rule: str = "explicit") -> MediationMap:
    qd = _draw_quantities(draws)
    mean_q = qd.mean(axis=0)
    dims = getattr(draws, "dims", None)
    if p is None and dims is not None:
        p, q = dims.p, dims.q
    if p is None or p * q != mean_q.size:
        raise DimensionError("cannot infer p, q for the map reshape")
    prob_maps = {float(k): posterior_probability_map(draws, float(k), p, q)
                 for k in kappa_list}
    return MediationMap(quantities=mean_q, matrix=unvec(mean_q, p, q),
                        kappa_list=tuple(float(k) for k in kappa_list),
                        prob_maps=prob_maps, kappa_rule=kappa_rule)


def default_kappa_grid(mean_quantities: np.ndarray, rule: str = "range") -> list:
    """Threshold grid at the 25/50/75 percent points.

    ``range`` interpolates the [min, max] span of the posterior-mean
    quantities; ``empirical`` takes percentiles of their distribution.
    """
    v = np.asarray(mean_quantities, dtype=np.float64)
    if rule == "range":
        lo, hi = float(v.min()), float(v.max())
        return [lo + f * (hi - lo) for f in (0.25, 0.50, 0.75)]
    if rule == "empirical":
        return [float(np.percentile(v, 100 * f)) for f in (0.25, 0.50, 0.75)]
    raise EvaluationError(f"unknown kappa rule {rule!r}")


def true_active_set(A, B, beta_ET, beta_TY, tol: float = 1e-12) -> np.ndarray:
    """Boolean length-pq mask of elements with nonzero true pathway weight."""
    return mediation_quantities_from(A, B, beta_ET, beta_TY) > tol


def auc_active_indicators(scores, active_set) -> float:
    """Rank-based (Mann-Whitney) AUC of scores against the active mask; midrank ties."""
    s = np.asarray(scores, dtype=np.float64)
    a = np.asarray(active_set, dtype=bool)
    if s.shape != a.shape:
        raise DimensionError("scores and active_set must have equal length")
    n_pos = int(a.sum())
    n_neg = a.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("active_set needs at least one active and one inactive element")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(ranks[a].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)
