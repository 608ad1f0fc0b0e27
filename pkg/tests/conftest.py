import numpy as np
import pytest

from simplexsmooth.kernels import kernel_params, log_dirichlet_density


def brute_force_alpha(data, b, s):
    """Independent local-linear solve: raw weights straight from the density
    formula, extended-precision normal equations, Gaussian elimination with
    partial pivoting.  Shares no code path with the production solver."""
    X = data.design.astype(np.longdouble)
    y = data.responses.astype(np.longdouble)
    sl = np.asarray(s, dtype=np.longdouble)
    logw = np.asarray(
        log_dirichlet_density(kernel_params(np.asarray(s, float), b), data.design),
        dtype=np.longdouble,
    )
    w = np.exp(logw - logw.max())
    n, d = X.shape
    m = d + 1
    Z = np.concatenate([np.ones((n, 1), np.longdouble), X - sl], axis=1)
    A = (Z * w[:, None]).T @ Z
    r = (Z * w[:, None]).T @ y
    M = np.concatenate([A, r[:, None]], axis=1)
    for k in range(m):
        p = k + int(np.argmax(np.abs(M[k:, k])))
        M[[k, p]] = M[[p, k]]
        M[k] = M[k] / M[k, k]
        for i in range(m):
            if i != k:
                M[i] -= M[i, k] * M[k]
    return float(M[0, -1])


@pytest.fixture
def rng():
    return np.random.default_rng(20250811)
