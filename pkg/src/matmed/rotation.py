"""Raw varimax rotation with a deterministic sign/order convention."""

import math

import numpy as np


def varimax_criterion(F: np.ndarray) -> float:
    """Sum over columns of the variance of squared loadings."""
    F = np.asarray(F, dtype=np.float64)
    sq = F * F
    return float(np.sum(np.mean(sq * sq, axis=0) - np.mean(sq, axis=0) ** 2))


def _varimax_pair_angle(x: np.ndarray, y: np.ndarray, p: int) -> float:
    # Kaiser's closed-form planar angle for one column pair.
    u = x * x - y * y
    v = 2.0 * x * y
    num = 2.0 * (p * float(u @ v) - u.sum() * v.sum())
    den = p * float(u @ u - v @ v) - (u.sum() ** 2 - v.sum() ** 2)
    return 0.25 * math.atan2(num, den)


def varimax_rotation(F: np.ndarray, tol: float = 1e-10, max_iter: int = 1000) -> np.ndarray:
    """Orthogonal R maximizing the varimax criterion of F @ R.

    Raw varimax (no Kaiser row normalization).  Two columns are solved in
    closed form by the planar-angle formula; larger frames use cyclic
    pairwise sweeps of the same formula until the criterion stabilizes.
    For a single column returns the 1x1 identity.
    """
    F = np.asarray(F, dtype=np.float64)
    p, k = F.shape
    if k == 1:
        return np.eye(1)
    R = np.eye(k)
    L = F.copy()
    for sweep in range(max_iter):
        delta = 0.0
        for a in range(k - 1):
            for b in range(a + 1, k):
                phi = _varimax_pair_angle(L[:, a], L[:, b], p)
                if abs(phi) < 1e-15:
                    continue
                c, s = math.cos(phi), math.sin(phi)
                G = np.array([[c, -s], [s, c]])
                L[:, [a, b]] = L[:, [a, b]] @ G
                R[:, [a, b]] = R[:, [a, b]] @ G
                delta = max(delta, abs(phi))
        if delta < tol:
            break
    return R


def sign_order_convention(F: np.ndarray) -> np.ndarray:
    """Signed permutation S with F @ S canonical.

    Signs make the largest-magnitude entry of each column positive; columns
    are then ordered by descending sum of fourth powers (the per-column
    varimax mass), ties broken by original position.
    """
    F = np.asarray(F, dtype=np.float64)
    k = F.shape[1]
    signs = np.ones(k)
    for j in range(k):
        i = int(np.argmax(np.abs(F[:, j])))
        if F[i, j] < 0:
            signs[j] = -1.0
    mass = np.sum(F ** 4, axis=0)
    order = np.argsort(-mass, kind="stable")
    S = np.zeros((k, k))
    for new_pos, old_pos in enumerate(order):
        S[old_pos, new_pos] = signs[old_pos]
    return S


def varimax_with_convention(F: np.ndarray, tol: float = 1e-10, max_iter: int = 1000) -> np.ndarray:
    """Full orthogonal transform: varimax rotation followed by sign/order fixing."""
    R = varimax_rotation(F, tol=tol, max_iter=max_iter)
    S = sign_order_convention(np.asarray(F) @ R)
    return R @ S
