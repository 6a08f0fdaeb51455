"""Hot numeric kernels with numba and pure-numpy implementations.

Each kernel has a numpy implementation (``_np_*``) and a loop implementation
(``_loop_*``) that numba compiles.  ``MATMED_BACKEND`` picks the active set;
``numpy_impls()`` / ``numba_impls()`` expose both for tests and benchmarks.

Array arguments are float64 and C-contiguous:

* ``Xc``: centered observations, shape (n, p, q)
* ``A``:  row loading frame, shape (p, p0)
* ``B``:  column loading frame, shape (q, q0)
* ``T``:  latent features, shape (n, p0, q0)
"""

import math

import numpy as np
from scipy.special import erfc as _sp_erfc
from scipy.special import ndtri as _sp_ndtri

from ._backend import BACKEND, HAVE_NUMBA, jit_compile

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# numpy implementations

def _np_residual_sumsq(Xc, A, T, B):
    d = Xc - A @ T @ B.T
    return float(np.vdot(d, d))


def _np_project_features(Xc, A, B):
    return A.T @ Xc @ B


def _np_loading_cross_a(Xc, B, T):
    # sum_i Xc_i B T_i^T, shape (p, p0)
    XB = Xc @ B
    return np.tensordot(XB, T, axes=[(0, 2), (0, 2)])


def _np_loading_cross_b(Xc, A, T):
    # sum_i Xc_i^T A T_i, shape (q, q0)
    AT = np.matmul(A, T)
    return np.tensordot(Xc, AT, axes=[(0, 1), (0, 1)])


def _np_truncnorm_lower_std(a, u):
    tail = 0.5 * _sp_erfc(a / _SQRT2)
    x = -_sp_ndtri(np.maximum((1.0 - u) * tail, 5e-324))
    return np.maximum(x, a)


# ---------------------------------------------------------------------------
# loop implementations (compiled by numba)

def _loop_residual_sumsq(Xc, A, T, B):
    n, p, q = Xc.shape
    p0 = A.shape[1]
    q0 = B.shape[1]
    TB = np.empty((p0, q))
    acc = 0.0
    for i in range(n):
        for s in range(p0):
            for c in range(q):
                v = 0.0
                for cc in range(q0):
                    v += T[i, s, cc] * B[c, cc]
                TB[s, c] = v
        for r in range(p):
            for c in range(q):
                rec = 0.0
                for s in range(p0):
                    rec += A[r, s] * TB[s, c]
                d = Xc[i, r, c] - rec
                acc += d * d
    return acc


def _loop_project_features(Xc, A, B):
    n, p, q = Xc.shape
    p0 = A.shape[1]
    q0 = B.shape[1]
    AX = np.empty((p0, q))
    out = np.empty((n, p0, q0))
    for i in range(n):
        AX[:] = 0.0
        for r in range(p):
            for s in range(p0):
                a = A[r, s]
                for c in range(q):
                    AX[s, c] += a * Xc[i, r, c]
        for s in range(p0):
            for cc in range(q0):
                out[i, s, cc] = 0.0
        for c in range(q):
            for cc in range(q0):
                bc = B[c, cc]
                for s in range(p0):
                    out[i, s, cc] += AX[s, c] * bc
    return out


def _loop_loading_cross_a(Xc, B, T):
    n, p, q = Xc.shape
    q0 = B.shape[1]
    p0 = T.shape[1]
    XB = np.empty((p, q0))
    out = np.zeros((p, p0))
    for i in range(n):
        XB[:] = 0.0
        for r in range(p):
            for c in range(q):
                x = Xc[i, r, c]
                for cc in range(q0):
                    XB[r, cc] += x * B[c, cc]
        for r in range(p):
            for s in range(p0):
                v = 0.0
                for cc in range(q0):
                    v += XB[r, cc] * T[i, s, cc]
                out[r, s] += v
    return out


def _loop_loading_cross_b(Xc, A, T):
    n, p, q = Xc.shape
    p0 = A.shape[1]
    q0 = T.shape[2]
    AT = np.empty((p, q0))
    out = np.zeros((q, q0))
    for i in range(n):
        for r in range(p):
            for cc in range(q0):
                v = 0.0
                for s in range(p0):
                    v += A[r, s] * T[i, s, cc]
                AT[r, cc] = v
        for r in range(p):
            for c in range(q):
                x = Xc[i, r, c]
                for cc in range(q0):
                    out[c, cc] += x * AT[r, cc]
    return out


def _ndtri_scalar(p):
    # Wichura's PPND16 rational approximations.
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    x = num / den
    return -x if q < 0.0 else x


def _make_loop_truncnorm(ndtri_fn):
    def _loop_truncnorm_lower_std(a, u):
        m = a.shape[0]
        out = np.empty(m)
        for i in range(m):
            tail = 0.5 * math.erfc(a[i] / _SQRT2)
            arg = (1.0 - u[i]) * tail
            if arg < 5e-324:
                arg = 5e-324
            x = -ndtri_fn(arg)
            out[i] = x if x > a[i] else a[i]
        return out

    return _loop_truncnorm_lower_std


_NP_IMPLS = {
    "residual_sumsq": _np_residual_sumsq,
    "project_features": _np_project_features,
    "loading_cross_a": _np_loading_cross_a,
    "loading_cross_b": _np_loading_cross_b,
    "truncnorm_lower_std": _np_truncnorm_lower_std,
}

_NB_IMPLS = None


def numpy_impls():
    return _NP_IMPLS


def numba_impls():
    """Compile (once) and return the numba kernel set."""
    global _NB_IMPLS
    if _NB_IMPLS is None:
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not importable")
        ndtri_nb = jit_compile(_ndtri_scalar)
        _NB_IMPLS = {
            "residual_sumsq": jit_compile(_loop_residual_sumsq),
            "project_features": jit_compile(_loop_project_features),
            "loading_cross_a": jit_compile(_loop_loading_cross_a),
            "loading_cross_b": jit_compile(_loop_loading_cross_b),
            "truncnorm_lower_std": jit_compile(_make_loop_truncnorm(ndtri_nb)),
        }
    return _NB_IMPLS


_ACTIVE = numba_impls() if BACKEND == "numba" else _NP_IMPLS


def active_backend() -> str:
    return BACKEND


def residual_sumsq(Xc, A, T, B) -> float:
    """Sum over subjects of the squared Frobenius reconstruction residual."""
    return float(_ACTIVE["residual_sumsq"](Xc, A, T, B))


def project_features(Xc, A, B):
    """Per-subject two-way projection ``A^T Xc_i B``, shape (n, p0, q0)."""
    return _ACTIVE["project_features"](Xc, A, B)


def loading_cross_a(Xc, B, T):
    """Cross-product driving the row-loading update: ``sum_i Xc_i B T_i^T``."""
    return _ACTIVE["loading_cross_a"](Xc, B, T)


def loading_cross_b(Xc, A, T):
    """Cross-product driving the column-loading update: ``sum_i Xc_i^T A T_i``."""
    return _ACTIVE["loading_cross_b"](Xc, A, T)


def truncnorm_lower_std(a, u):
    """Standard normal truncated to [a_i, inf), from uniforms via inverse survival.

    Accurate for truncation points far into either tail; consumes exactly one
    uniform per draw so both backends use identical random streams.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    return _ACTIVE["truncnorm_lower_std"](a, u)
