"""Numba-compiled batch kernels: Dirichlet kernel weights + small WLS solves.

Each evaluation point is an independent ``prange`` work item that writes only
to its own output slots, so results are bitwise identical for any thread
count.  Weights are computed in log space and normalised by the largest
log-weight before exponentiation; the local system is solved by symmetric
Gaussian elimination with a relative pivot tolerance, falling back to the
local constant (zero slope) estimate when a pivot degenerates.
"""

import math

import numpy as np
from numba import njit, prange

# Relative weights below this are flushed to zero before accumulation.
WEIGHT_FLUSH = 1e-300


@njit(cache=True)
def _log_weights(logX, log1m, s, b, out):
    # log of the Dirichlet(s/b+1, (1-|s|)/b+1) density at every design point,
    # with the 0*log(0) = 0 convention for zero exponents.
    n, d = logX.shape
    ssum = 0.0
    for k in range(d):
        ssum += s[k]
    v = (1.0 - ssum) / b + 1.0
    lc = math.lgamma(1.0 / b + d + 1.0) - math.lgamma(v)
    for k in range(d):
        lc -= math.lgamma(s[k] / b + 1.0)
    vm1 = (1.0 - ssum) / b
    for i in range(n):
        acc = lc
        for k in range(d):
            a = s[k] / b
            if a > 0.0:
                acc += a * logX[i, k]
        if vm1 > 0.0:
            acc += vm1 * log1m[i]
        out[i] = acc


@njit(cache=True, parallel=True)
def _ll_kernel(X, y, logX, log1m, S, b, pivot_tol, est, slope, deg, tw, cond):
    N = S.shape[0]
    n, d = X.shape
    m = d + 1
    for e in prange(N):
        s = S[e]
        lw = np.empty(n)
        _log_weights(logX, log1m, s, b, lw)
        mx = -np.inf
        for i in range(n):
            if lw[i] > mx:
                mx = lw[i]
        if not np.isfinite(mx):
            est[e] = np.nan
            for k in range(d):
                slope[e, k] = np.nan
            deg[e] = True
            tw[e] = 0.0
            cond[e] = np.inf
            continue
        w = np.empty(n)
        wsum = 0.0
        for i in range(n):
            wi = math.exp(lw[i] - mx)
            if wi < WEIGHT_FLUSH:
                wi = 0.0
            w[i] = wi
            wsum += wi
        tw[e] = math.exp(mx + math.log(wsum))

        A = np.zeros((m, m))
        r = np.zeros(m)
        for i in range(n):
            wi = w[i]
            if wi == 0.0:
                continue
            yi = y[i]
            A[0, 0] += wi
            r[0] += wi * yi
            for k in range(d):
                dk = X[i, k] - s[k]
                A[0, k + 1] += wi * dk
                r[k + 1] += wi * yi * dk
                for l in range(k, d):
                    A[k + 1, l + 1] += wi * dk * (X[i, l] - s[l])
        for k in range(m):
            for l in range(k + 1, m):
                A[l, k] = A[k, l]
        nw_val = r[0] / A[0, 0]

        scale = 0.0
        for k in range(m):
            if A[k, k] > scale:
                scale = A[k, k]
        ok = True
        minpiv = np.inf
        for k in range(m):
            piv = A[k, k]
            if not (piv > pivot_tol * scale):
                ok = False
                break
            if piv < minpiv:
                minpiv = piv
            for i2 in range(k + 1, m):
                f = A[i2, k] / piv
                for j2 in range(k, m):
                    A[i2, j2] -= f * A[k, j2]
                r[i2] -= f * r[k]
        if ok:
            sol = np.empty(m)
            for k in range(m - 1, -1, -1):
                acc = r[k]
                for j2 in range(k + 1, m):
                    acc -= A[k, j2] * sol[j2]
                sol[k] = acc / A[k, k]
            est[e] = sol[0]
            for k in range(d):
                slope[e, k] = sol[k + 1]
            deg[e] = False
            cond[e] = scale / minpiv
        else:
            est[e] = nw_val
            for k in range(d):
                slope[e, k] = 0.0
            deg[e] = True
            cond[e] = np.inf


@njit(cache=True, parallel=True)
def _nw_kernel(X, y, logX, log1m, S, b, est, tw):
    N = S.shape[0]
    n = X.shape[0]
    for e in prange(N):
        lw = np.empty(n)
        _log_weights(logX, log1m, S[e], b, lw)
        mx = -np.inf
        for i in range(n):
            if lw[i] > mx:
                mx = lw[i]
        if not np.isfinite(mx):
            est[e] = np.nan
            tw[e] = 0.0
            continue
        num = 0.0
        den = 0.0
        for i in range(n):
            wi = math.exp(lw[i] - mx)
            if wi < WEIGHT_FLUSH:
                wi = 0.0
            num += wi * y[i]
            den += wi
        est[e] = num / den
        tw[e] = math.exp(mx + math.log(den))


@njit(cache=True, parallel=True)
def _loocv_kernel(X, y, logX, log1m, b, use_ll, pivot_tol, pred):
    n, d = X.shape
    m = d + 1
    for h in prange(n):
        s = X[h]
        lw = np.empty(n)
        _log_weights(logX, log1m, s, b, lw)
        lw[h] = -np.inf  # zero weight on the held-out pair == deleting it
        mx = -np.inf
        for i in range(n):
            if lw[i] > mx:
                mx = lw[i]
        if not np.isfinite(mx):
            pred[h] = np.nan
            continue
        w = np.empty(n)
        for i in range(n):
            wi = math.exp(lw[i] - mx)
            if wi < WEIGHT_FLUSH:
                wi = 0.0
            w[i] = wi
        if not use_ll:
            num = 0.0
            den = 0.0
            for i in range(n):
                num += w[i] * y[i]
                den += w[i]
            pred[h] = num / den
            continue
        A = np.zeros((m, m))
        r = np.zeros(m)
        for i in range(n):
            wi = w[i]
            if wi == 0.0:
                continue
            yi = y[i]
            A[0, 0] += wi
            r[0] += wi * yi
            for k in range(d):
                dk = X[i, k] - s[k]
                A[0, k + 1] += wi * dk
                r[k + 1] += wi * yi * dk
                for l in range(k, d):
                    A[k + 1, l + 1] += wi * dk * (X[i, l] - s[l])
        for k in range(m):
            for l in range(k + 1, m):
                A[l, k] = A[k, l]
        nw_val = r[0] / A[0, 0]
        scale = 0.0
        for k in range(m):
            if A[k, k] > scale:
                scale = A[k, k]
        ok = True
        for k in range(m):
            piv = A[k, k]
            if not (piv > pivot_tol * scale):
                ok = False
                break
            for i2 in range(k + 1, m):
                f = A[i2, k] / piv
                for j2 in range(k, m):
                    A[i2, j2] -= f * A[k, j2]
                r[i2] -= f * r[k]
        if ok:
            sol = np.empty(m)
            for k in range(m - 1, -1, -1):
                acc = r[k]
                for j2 in range(k + 1, m):
                    acc -= A[k, j2] * sol[j2]
                sol[k] = acc / A[k, k]
            pred[h] = sol[0]
        else:
            pred[h] = nw_val


def ll_batch(X, y, logX, log1m, S, b, pivot_tol):
    """Local linear fit at every row of ``S``.

    Returns ``(est, slope, degenerate, total_weight, cond)``; ``est`` is NaN
    where no design point carries positive kernel weight.
    """
    N = S.shape[0]
    d = X.shape[1]
    est = np.empty(N)
    slope = np.empty((N, d))
    deg = np.zeros(N, np.bool_)
    tw = np.empty(N)
    cond = np.empty(N)
    _ll_kernel(X, y, logX, log1m, S, float(b), float(pivot_tol), est, slope, deg, tw, cond)
    return est, slope, deg, tw, cond


def nw_batch(X, y, logX, log1m, S, b):
    """Local constant (kernel weighted mean) fit at every row of ``S``."""
    N = S.shape[0]
    est = np.empty(N)
    tw = np.empty(N)
    _nw_kernel(X, y, logX, log1m, S, float(b), est, tw)
    return est, tw


def loocv_predict(X, y, logX, log1m, b, use_ll, pivot_tol):
    """Held-out prediction at each design point with that pair removed."""
    n = X.shape[0]
    pred = np.empty(n)
    _loocv_kernel(X, y, logX, log1m, float(b), bool(use_ll), float(pivot_tol), pred)
    return pred
