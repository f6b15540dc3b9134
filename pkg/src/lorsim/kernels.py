"""Batched random-effects estimators over many replications.

Every function takes ``(M, K)`` arrays of study log-odds-ratios ``y`` and
within-study variances ``v`` (one row per replication) and works row by row.
Two implementations exist for each kernel: numba-compiled row loops and
vectorised numpy. The module-level names dispatch to one of them according
to :data:`lorsim._accel.USE_NUMBA`; both are importable for benchmarking and
cross-checking.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

REML_TOL = 1e-8
REML_MAXITER = 200
MP_TOL = 1e-12
MP_MAXITER = 400


# ---------------------------------------------------------------------------
# numba row loops
# ---------------------------------------------------------------------------


@njit
def _q_row(y, v, tau2):
    sw = 0.0
    swy = 0.0
    for i in range(y.shape[0]):
        w = 1.0 / (v[i] + tau2)
        sw += w
        swy += w * y[i]
    mu = swy / sw
    q = 0.0
    for i in range(y.shape[0]):
        d = y[i] - mu
        q += d * d / (v[i] + tau2)
    return q


@njit
def _dl_row(y, v):
    K = y.shape[0]
    sw = 0.0
    sw2 = 0.0
    for i in range(K):
        w = 1.0 / v[i]
        sw += w
        sw2 += w * w
    q = _q_row(y, v, 0.0)
    t = (q - (K - 1)) / (sw - sw2 / sw)
    return t if t > 0.0 else 0.0


@njit
def _mp_row(y, v, tol, maxiter):
    target = y.shape[0] - 1.0
    if _q_row(y, v, 0.0) <= target:
        return 0.0
    lo = 0.0
    hi = 1.0
    while _q_row(y, v, hi) >= target:
        lo = hi
        hi *= 2.0
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol:
            break
        if _q_row(y, v, mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@njit
def _reml_row(y, v, start, tol, maxiter):
    K = y.shape[0]
    t = start
    for it in range(maxiter):
        sw = 0.0
        swy = 0.0
        for i in range(K):
            w = 1.0 / (v[i] + t)
            sw += w
            swy += w * y[i]
        mu = swy / sw
        num = 0.0
        sw2 = 0.0
        for i in range(K):
            w = 1.0 / (v[i] + t)
            d = y[i] - mu
            num += w * w * (d * d - v[i])
            sw2 += w * w
        new = num / sw2 + 1.0 / sw
        if new < 0.0:
            new = 0.0
        if abs(new - t) < tol:
            return new, True
        t = new
    return t, False


@njit
def q_stat_numba(y, v, tau2):
    M = y.shape[0]
    out = np.empty(M)
    for m in range(M):
        out[m] = _q_row(y[m], v[m], tau2[m])
    return out


@njit
def tau2_dl_numba(y, v):
    M = y.shape[0]
    out = np.empty(M)
    for m in range(M):
        out[m] = _dl_row(y[m], v[m])
    return out


@njit
def tau2_mp_numba(y, v, tol=MP_TOL, maxiter=MP_MAXITER):
    M = y.shape[0]
    out = np.empty(M)
    for m in range(M):
        out[m] = _mp_row(y[m], v[m], tol, maxiter)
    return out


@njit
def tau2_reml_numba(y, v, start, tol=REML_TOL, maxiter=REML_MAXITER):
    M = y.shape[0]
    out = np.empty(M)
    conv = np.empty(M, dtype=np.bool_)
    for m in range(M):
        out[m], conv[m] = _reml_row(y[m], v[m], start[m], tol, maxiter)
    return out, conv


@njit
def iv_pool_numba(y, v, tau2):
    M, K = y.shape
    theta = np.empty(M)
    se = np.empty(M)
    for m in range(M):
        sw = 0.0
        swy = 0.0
        for i in range(K):
            w = 1.0 / (v[m, i] + tau2[m])
            sw += w
            swy += w * y[m, i]
        theta[m] = swy / sw
        se[m] = 1.0 / np.sqrt(sw)
    return theta, se


@njit
def ssw_numba(y, v, wn, tau2):
    M, K = y.shape
    theta = np.empty(M)
    var = np.empty(M)
    for m in range(M):
        sw = 0.0
        swy = 0.0
        swv = 0.0
        for i in range(K):
            w = wn[m, i]
            sw += w
            swy += w * y[m, i]
            swv += w * w * (v[m, i] + tau2[m])
        theta[m] = swy / sw
        var[m] = swv / (sw * sw)
    return theta, var


# ---------------------------------------------------------------------------
# numpy, vectorised across rows
# ---------------------------------------------------------------------------


def q_stat_numpy(y, v, tau2):
    w = 1.0 / (v + tau2[:, None])
    mu = (w * y).sum(axis=1) / w.sum(axis=1)
    return (w * (y - mu[:, None]) ** 2).sum(axis=1)


def tau2_dl_numpy(y, v):
    K = y.shape[1]
    w = 1.0 / v
    sw = w.sum(axis=1)
    q = q_stat_numpy(y, v, np.zeros(y.shape[0]))
    t = (q - (K - 1)) / (sw - (w * w).sum(axis=1) / sw)
    return np.maximum(t, 0.0)


def tau2_mp_numpy(y, v, tol=MP_TOL, maxiter=MP_MAXITER):
    M, K = y.shape
    target = K - 1.0
    out = np.zeros(M)
    rows = np.flatnonzero(q_stat_numpy(y, v, np.zeros(M)) > target)
    if rows.size == 0:
        return out
    y, v = y[rows], v[rows]
    lo = np.zeros(rows.size)
    hi = np.ones(rows.size)
    grow = q_stat_numpy(y, v, hi) >= target
    while grow.any():
        lo[grow] = hi[grow]
        hi[grow] *= 2.0
        grow[grow] = q_stat_numpy(y[grow], v[grow], hi[grow]) >= target
    active = np.ones(rows.size, dtype=bool)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        active &= (mid > lo) & (mid < hi) & (hi - lo > tol)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        above = q_stat_numpy(y[idx], v[idx], mid[idx]) > target
        lo[idx[above]] = mid[idx[above]]
        hi[idx[~above]] = mid[idx[~above]]
    out[rows] = 0.5 * (lo + hi)
    return out


def tau2_reml_numpy(y, v, start, tol=REML_TOL, maxiter=REML_MAXITER):
    M = y.shape[0]
    t = np.array(start, dtype=np.float64, copy=True)
    conv = np.zeros(M, dtype=bool)
    idx = np.arange(M)
    for _ in range(maxiter):
        if idx.size == 0:
            break
        yy, vv, tt = y[idx], v[idx], t[idx]
        w = 1.0 / (vv + tt[:, None])
        sw = w.sum(axis=1)
        mu = (w * yy).sum(axis=1) / sw
        w2 = w * w
        new = (w2 * ((yy - mu[:, None]) ** 2 - vv)).sum(axis=1) / w2.sum(axis=1) + 1.0 / sw
        new = np.maximum(new, 0.0)
        done = np.abs(new - tt) < tol
        t[idx] = new
        conv[idx[done]] = True
        idx = idx[~done]
    return t, conv


def iv_pool_numpy(y, v, tau2):
    w = 1.0 / (v + tau2[:, None])
    sw = w.sum(axis=1)
    return (w * y).sum(axis=1) / sw, 1.0 / np.sqrt(sw)


def ssw_numpy(y, v, wn, tau2):
    sw = wn.sum(axis=1)
    theta = (wn * y).sum(axis=1) / sw
    var = (wn * wn * (v + tau2[:, None])).sum(axis=1) / (sw * sw)
    return theta, var


NUMBA_KERNELS = {
    "q_stat": q_stat_numba,
    "tau2_dl": tau2_dl_numba,
    "tau2_mp": tau2_mp_numba,
    "tau2_reml": tau2_reml_numba,
    "iv_pool": iv_pool_numba,
    "ssw": ssw_numba,
}

NUMPY_KERNELS = {
    "q_stat": q_stat_numpy,
    "tau2_dl": tau2_dl_numpy,
    "tau2_mp": tau2_mp_numpy,
    "tau2_reml": tau2_reml_numpy,
    "iv_pool": iv_pool_numpy,
    "ssw": ssw_numpy,
}


def kernel_set(backend=None):
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        return NUMBA_KERNELS
    if backend == "numpy":
        return NUMPY_KERNELS
    raise ValueError(f"unknown backend {backend!r}")


_active = kernel_set()
q_stat = _active["q_stat"]
tau2_dl = _active["tau2_dl"]
tau2_mp = _active["tau2_mp"]
tau2_reml = _active["tau2_reml"]
iv_pool = _active["iv_pool"]
ssw = _active["ssw"]
