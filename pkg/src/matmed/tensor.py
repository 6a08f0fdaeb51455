"""Matrix vectorization, Kronecker products, and Stiefel-manifold utilities.

Vectorization is column-major throughout: this is the convention under which
``vec(A T B^T) = (B kron A) vec(T)`` holds, and every module relies on that
identity.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

STIEFEL_TOL = 1e-8


@dataclass(frozen=True)
class Dims:
    """Problem dimensions; the sampler requires strict reduction p0 < p, q0 < q."""

    p: int
    q: int
    p0: int
    q0: int
    K: int = 0
    n: int = 1

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise DimensionError(f"p, q must be >= 1, got ({self.p}, {self.q})")
        if not (1 <= self.p0 < self.p):
            raise DimensionError(f"need 1 <= p0 < p, got p0={self.p0}, p={self.p}")
        if not (1 <= self.q0 < self.q):
            raise DimensionError(f"need 1 <= q0 < q, got q0={self.q0}, q={self.q}")
        if self.K < 0:
            raise DimensionError(f"K must be >= 0, got {self.K}")
        if self.n < 1:
            raise DimensionError(f"n must be >= 1, got {self.n}")

    @property
    def d(self) -> int:
        return self.p0 * self.q0


def vec(M) -> np.ndarray:
    """Column-major vectorization: vec(M)[k*p + j] = M[j, k]."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionError(f"vec expects a matrix, got ndim={M.ndim}")
    return M.reshape(-1, order="F").copy()


def unvec(v, p: int, q: int) -> np.ndarray:
    """Inverse of :func:`vec`; requires len(v) == p*q."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != p * q:
        raise DimensionError(f"unvec expects length {p * q}, got shape {v.shape}")
    return v.reshape((p, q), order="F").copy()


def vec_batch(M3: np.ndarray) -> np.ndarray:
    """Column-major vectorization of a stack of matrices, (n, p, q) -> (n, pq)."""
    n = M3.shape[0]
    return M3.transpose(0, 2, 1).reshape(n, -1)


def unvec_batch(V: np.ndarray, p: int, q: int) -> np.ndarray:
    """(n, pq) -> (n, p, q), inverting :func:`vec_batch`."""
    n = V.shape[0]
    return np.ascontiguousarray(V.reshape(n, q, p).transpose(0, 2, 1))


def kron(B: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Kronecker product B (x) A; maps vec(T) to vec(A T B^T)."""
    return np.kron(np.asarray(B, dtype=np.float64), np.asarray(A, dtype=np.float64))


def stiefel_violation(F) -> float:
    """max|F^T F - I|, zero exactly on the Stiefel manifold."""
    F = np.asarray(F, dtype=np.float64)
    k = F.shape[1]
    return float(np.max(np.abs(F.T @ F - np.eye(k))))


def require_stiefel(F, tol: float = STIEFEL_TOL, name: str = "frame") -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] > F.shape[0]:
        raise DimensionError(f"{name} must be tall (rows >= cols), got {F.shape}")
    v = stiefel_violation(F)
    if v > tol:
        raise DimensionError(f"{name} is off the Stiefel manifold: max|F'F - I| = {v:.3e}")
    return F


def sample_uniform_stiefel(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the Stiefel manifold of rows x cols orthonormal frames.

    QR of a standard Gaussian matrix with the R-diagonal sign correction,
    which makes the factorization unique and the draw exactly uniform
    (invariant under left-multiplication by any fixed orthogonal matrix).
    """
    if cols > rows:
        raise DimensionError(f"need cols <= rows, got {rows} x {cols}")
    G = rng.standard_normal((rows, cols))
    Q, R = np.linalg.qr(G)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def polar_retraction(M: np.ndarray) -> np.ndarray:
    """Nearest orthonormal frame to M (polar factor via SVD)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=np.float64), full_matrices=False)
    return U @ Vt


def complement_basis(F: np.ndarray, rows: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of span(F) in R^rows.

    F has orthonormal columns (possibly zero of them); the result has
    rows - F.shape[1] columns.
    """
    k = 0 if F.size == 0 else F.shape[1]
    if k == 0:
        return np.eye(rows)
    if k == 1:
        # Householder reflector mapping e1 onto +/- the column; its trailing
        # columns span the complement.
        u = F[:, 0]
        sigma = -1.0 if u[0] >= 0 else 1.0
        v = u.copy()
        v[0] -= sigma
        vv = float(v @ v)
        if vv < 1e-24:
            return np.eye(rows)[:, 1:]
        H = -(2.0 / vv) * np.outer(v, v[1:])
        H[1:] += np.eye(rows - 1)
        return H
    Q = np.linalg.qr(F, mode="complete")[0]
    return Q[:, k:]
