"""Von Mises-Fisher sampling on the unit sphere (Wood's rejection scheme)."""

import math

import numpy as np

from .errors import DimensionError


def sample_uniform_sphere(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw on the unit sphere in R^dim."""
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def _sample_cosine(dim: int, kappa: float, rng: np.random.Generator) -> float:
    # Rejection sampler for the cosine of the angle to the mean direction.
    m = dim - 1.0
    b = m / (math.sqrt(4.0 * kappa * kappa + m * m) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * math.log(1.0 - x0 * x0)
    while True:
        z = rng.beta(m / 2.0, m / 2.0)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random()
        if kappa * w + m * math.log(1.0 - x0 * w) - c >= math.log(u):
            return w


def sample_vmf(direction: np.ndarray, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """Draw from the vMF density proportional to exp(kappa * direction'x) on the sphere.

    ``direction`` must be a unit vector; ``kappa == 0`` degenerates to the
    uniform distribution on the sphere.
    """
    mu = np.asarray(direction, dtype=np.float64)
    dim = mu.size
    if dim < 2:
        raise DimensionError("vMF sampling needs an ambient dimension >= 2")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if kappa == 0.0:
        return sample_uniform_sphere(dim, rng)
    norm = np.linalg.norm(mu)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError("direction must be unit-norm")

    w = _sample_cosine(dim, kappa, rng)
    # uniform tangent direction orthogonal to mu
    v = rng.standard_normal(dim)
    v -= (v @ mu) * mu
    vnorm = np.linalg.norm(v)
    while vnorm < 1e-12:
        v = rng.standard_normal(dim)
        v -= (v @ mu) * mu
        vnorm = np.linalg.norm(v)
    v /= vnorm
    x = w * mu + math.sqrt(max(0.0, 1.0 - w * w)) * v
    return x / np.linalg.norm(x)
