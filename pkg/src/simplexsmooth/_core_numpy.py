"""Pure-numpy fallback for the batch fitting kernels.

Mirrors ``_core_numba`` semantics exactly (log-space weights with max
normalisation, weight flushing, pivot-tolerance fallback to the local
constant fit); evaluation points are processed in vectorised chunks instead
of compiled loops.
"""

import numpy as np
from scipy.special import gammaln

WEIGHT_FLUSH = 1e-300

_CHUNK = 256


def _log_weight_matrix(logX, log1m, S, b):
    # (C, n) matrix of log kernel weights, one row per evaluation point.
    d = S.shape[1]
    ssum = S.sum(axis=1)
    v = (1.0 - ssum) / b + 1.0
    lc = gammaln(1.0 / b + d + 1.0) - gammaln(v) - gammaln(S / b + 1.0).sum(axis=1)
    a = S / b
    vm1 = (1.0 - ssum) / b
    xz = np.isneginf(logX)
    oz = np.isneginf(log1m)
    logX_safe = np.where(xz, 0.0, logX)
    log1m_safe = np.where(oz, 0.0, log1m)
    lw = lc[:, None] + a @ logX_safe.T + vm1[:, None] * log1m_safe[None, :]
    # restore -inf where a positive exponent met a zero base
    bad = ((a > 0.0).astype(np.float64) @ xz.T.astype(np.float64)) > 0.0
    bad |= (vm1[:, None] > 0.0) & oz[None, :]
    lw[bad] = -np.inf
    return lw


def _normalised_weights(lw):
    mx = lw.max(axis=1)
    no_support = ~np.isfinite(mx)
    shift = np.where(no_support, 0.0, mx)
    W = np.exp(lw - shift[:, None])
    W[W < WEIGHT_FLUSH] = 0.0
    W[no_support] = 0.0
    wsum = W.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tw = np.where(no_support, 0.0, np.exp(mx + np.log(np.where(wsum > 0, wsum, 1.0))))
    return W, wsum, tw, no_support


def _solve_psd(A, r, pivot_tol, no_support):
    """Batched symmetric elimination with relative pivot tolerance.

    Returns ``(sol, deg, cond)``; rows flagged degenerate carry no valid
    solution and must be replaced by the local constant fallback.
    """
    C, m, _ = A.shape
    U = A.copy()
    c = r.copy()
    scale = np.diagonal(A, axis1=1, axis2=2).max(axis=1)
    ok = ~no_support
    deg = np.zeros(C, bool)
    minpiv = np.full(C, np.inf)
    for k in range(m):
        piv = U[:, k, k]
        newly = ok & ~(piv > pivot_tol * scale)
        deg |= newly
        ok &= ~newly
        minpiv = np.where(ok & (piv < minpiv), piv, minpiv)
        safe = np.where(piv != 0.0, piv, 1.0)
        f = np.where(ok[:, None], U[:, k + 1 :, k] / safe[:, None], 0.0)
        U[:, k + 1 :, k:] -= f[:, :, None] * U[:, k, None, k:]
        c[:, k + 1 :] -= f * c[:, k, None]
    sol = np.zeros((C, m))
    for k in range(m - 1, -1, -1):
        acc = c[:, k] - (U[:, k, k + 1 :] * sol[:, k + 1 :]).sum(axis=1)
        piv = U[:, k, k]
        sol[:, k] = np.where(ok, acc / np.where(piv != 0.0, piv, 1.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(ok, scale / minpiv, np.inf)
    return sol, deg, cond


def _ll_chunk(X, y, logX, log1m, S, b, pivot_tol):
    d = X.shape[1]
    m = d + 1
    lw = _log_weight_matrix(logX, log1m, S, b)
    W, wsum, tw, no_support = _normalised_weights(lw)
    C = S.shape[0]
    D = X[None, :, :] - S[:, None, :]
    WD = W[:, :, None] * D
    A = np.empty((C, m, m))
    A[:, 0, 0] = wsum
    A[:, 0, 1:] = WD.sum(axis=1)
    A[:, 1:, 0] = A[:, 0, 1:]
    A[:, 1:, 1:] = np.einsum("cnk,cnl->ckl", WD, D)
    r = np.empty((C, m))
    r[:, 0] = W @ y
    r[:, 1:] = np.einsum("cnk,n->ck", WD, y)
    with np.errstate(invalid="ignore", divide="ignore"):
        nw_val = np.where(wsum > 0, r[:, 0] / np.where(wsum > 0, wsum, 1.0), np.nan)
    sol, deg, cond = _solve_psd(A, r, pivot_tol, no_support)
    est = np.where(deg, nw_val, sol[:, 0])
    est = np.where(no_support, np.nan, est)
    slope = np.where(deg[:, None] | no_support[:, None], 0.0, sol[:, 1:])
    slope = np.where(no_support[:, None], np.nan, slope)
    deg = deg | no_support
    return est, slope, deg, tw, cond


def ll_batch(X, y, logX, log1m, S, b, pivot_tol):
    """Local linear fit at every row of ``S``.

    Returns ``(est, slope, degenerate, total_weight, cond)``; ``est`` is NaN
    where no design point carries positive kernel weight.
    """
    N = S.shape[0]
    d = X.shape[1]
    est = np.empty(N)
    slope = np.empty((N, d))
    deg = np.zeros(N, bool)
    tw = np.empty(N)
    cond = np.empty(N)
    for lo in range(0, N, _CHUNK):
        hi = min(lo + _CHUNK, N)
        e, sl, dg, t, c = _ll_chunk(X, y, logX, log1m, S[lo:hi], b, pivot_tol)
        est[lo:hi] = e
        slope[lo:hi] = sl
        deg[lo:hi] = dg
        tw[lo:hi] = t
        cond[lo:hi] = c
    return est, slope, deg, tw, cond


def nw_batch(X, y, logX, log1m, S, b):
    """Local constant (kernel weighted mean) fit at every row of ``S``."""
    N = S.shape[0]
    est = np.empty(N)
    tw = np.empty(N)
    for lo in range(0, N, _CHUNK):
        hi = min(lo + _CHUNK, N)
        lw = _log_weight_matrix(logX, log1m, S[lo:hi], b)
        W, wsum, t, no_support = _normalised_weights(lw)
        with np.errstate(invalid="ignore", divide="ignore"):
            e = np.where(wsum > 0, (W @ y) / np.where(wsum > 0, wsum, 1.0), np.nan)
        est[lo:hi] = np.where(no_support, np.nan, e)
        tw[lo:hi] = t
    return est, tw


def loocv_predict(X, y, logX, log1m, b, use_ll, pivot_tol):
    """Held-out prediction at each design point with that pair removed."""
    n, d = X.shape
    m = d + 1
    lw = _log_weight_matrix(logX, log1m, X, b)
    np.fill_diagonal(lw, -np.inf)  # zero weight on the held-out pair
    W, wsum, _, no_support = _normalised_weights(lw)
    with np.errstate(invalid="ignore", divide="ignore"):
        nw_val = np.where(wsum > 0, (W @ y) / np.where(wsum > 0, wsum, 1.0), np.nan)
    if not use_ll:
        return np.where(no_support, np.nan, nw_val)
    D = X[None, :, :] - X[:, None, :]
    WD = W[:, :, None] * D
    A = np.empty((n, m, m))
    A[:, 0, 0] = wsum
    A[:, 0, 1:] = WD.sum(axis=1)
    A[:, 1:, 0] = A[:, 0, 1:]
    A[:, 1:, 1:] = np.einsum("cnk,cnl->ckl", WD, D)
    r = np.empty((n, m))
    r[:, 0] = W @ y
    r[:, 1:] = np.einsum("cnk,n->ck", WD, y)
    sol, deg, _ = _solve_psd(A, r, pivot_tol, no_support)
    pred = np.where(deg, nw_val, sol[:, 0])
    return np.where(no_support, np.nan, pred)
