"""Simplex geometry, Dirichlet densities and kernel weights, exact moments,
and the squared-kernel integral with its small-bandwidth behaviour.

Points of the unit simplex S_d are plain float arrays of the d free
coordinates; the last coordinate is the implicit complement ``1 - sum``.
All density work happens in log space via log-gamma, so large kernel
parameters (small bandwidths) never overflow.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

# Coordinate / sum tolerance for clamping points onto the closed simplex.
SUM_TOL = 1e-12


def as_simplex_points(x, d=None):
    """Validate an (N, d) array of simplex points, clamping roundoff noise.

    Coordinates in [-1e-12, 0) are clipped to 0 and rows with sum in
    (1, 1 + 1e-12] are rescaled onto the simplex; anything further out is an
    error.  Returns a float64 copy.
    """
    arr = np.array(x, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError(f"expected points of shape (n, d) with d >= 1, got {np.shape(x)}")
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"dimension mismatch: expected d={d}, got d={arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite coordinate in simplex point")
    if arr.min(initial=0.0) < -SUM_TOL:
        bad = np.unravel_index(np.argmin(arr), arr.shape)
        raise ValueError(f"negative coordinate {arr[bad]} at row {bad[0]}")
    np.clip(arr, 0.0, None, out=arr)
    sums = arr.sum(axis=1)
    if sums.max(initial=0.0) > 1.0 + SUM_TOL:
        i = int(np.argmax(sums))
        raise ValueError(f"coordinate sum {sums[i]} > 1 at row {i}")
    over = sums > 1.0
    if np.any(over):
        arr[over] /= sums[over, None]
    return arr


def as_simplex_point(s, d=None):
    """Single-point variant of :func:`as_simplex_points`; returns shape (d,)."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    if s.ndim != 1:
        raise ValueError(f"expected a single point of shape (d,), got {s.shape}")
    return as_simplex_points(s, d)[0]


@dataclass(frozen=True)
class DirichletParams:
    """Parameters (u, v) of a Dirichlet distribution on S_d.

    ``u`` holds the d shape parameters of the free coordinates and ``v`` the
    shape of the implicit complement; all must be strictly positive.
    """

    u: np.ndarray
    v: float

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=np.float64))
        if u.ndim != 1 or u.size < 1:
            raise ValueError("u must be a vector of at least one shape parameter")
        if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
            raise ValueError("all entries of u must be finite and > 0")
        v = float(self.v)
        if not math.isfinite(v) or v <= 0.0:
            raise ValueError(f"v must be finite and > 0, got {v}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def d(self):
        return self.u.size


def _log_norm_const(u, v):
    # log of Gamma(|u| + v) / (Gamma(v) prod Gamma(u_i))
    return gammaln(np.sum(u) + v) - gammaln(v) - np.sum(gammaln(u))


def log_dirichlet_density(params, x):
    """Log density of Dirichlet(u, v) at simplex point(s) ``x``.

    Uses the convention that a factor with exponent exactly zero contributes
    nothing even at base zero, so boundary points with matching unit shape
    parameters stay finite.  A zero base under a positive exponent gives
    ``-inf``; under a negative exponent, ``+inf``.

    ``x`` may be a single point ``(d,)`` or a batch ``(N, d)``; the return
    is a scalar or an ``(N,)`` array accordingly.
    """
    single = np.asarray(x).ndim == 1
    pts = as_simplex_points(x, params.d)
    lc = _log_norm_const(params.u, params.v)
    a = params.u - 1.0
    vm1 = params.v - 1.0
    om = np.maximum(1.0 - pts.sum(axis=1), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(pts)
        lom = np.log(om)
        terms = np.where(a[None, :] == 0.0, 0.0, a[None, :] * lx)
        last = np.where(vm1 == 0.0, 0.0, vm1 * lom)
    out = lc + terms.sum(axis=1) + last
    return float(out[0]) if single else out


def kernel_params(s, b):
    """Dirichlet parameters of the kernel centred near ``s`` with bandwidth ``b``:
    ``u = s/b + 1`` componentwise and ``v = (1 - sum(s))/b + 1``."""
    s = as_simplex_point(s)
    b = _check_bandwidth(b)
    u = s / b + 1.0
    v = max(1.0 - s.sum(), 0.0) / b + 1.0
    return DirichletParams(u, v)


def kernel_weight(s, b, x):
    """Kernel weight at ``x`` for the fit location ``s``: the Dirichlet
    density with parameters :func:`kernel_params`.  Finite and >= 0 on the
    closed simplex for every b > 0."""
    lg = log_dirichlet_density(kernel_params(s, b), x)
    return np.exp(lg)


def _check_bandwidth(b):
    b = float(b)
    if not math.isfinite(b) or b <= 0.0:
        raise ValueError(f"bandwidth must be finite and > 0, got {b}")
    return b


def sample_dirichlet(params, rng, size=None):
    """Draw from Dirichlet(u, v), returned as the d free coordinates.

    Standard gamma-ratio construction on d+1 independent gammas; the draw
    sequence is fully determined by the state of ``rng``.
    """
    alpha = np.append(params.u, params.v)
    if size is None:
        g = rng.standard_gamma(alpha)
        return g[:-1] / g.sum()
    g = rng.standard_gamma(alpha, size=(int(size), alpha.size))
    return g[:, :-1] / g.sum(axis=1, keepdims=True)


def sample_uniform_simplex(d, rng, size=None):
    """Uniform draw(s) on S_d: Dirichlet with all shape parameters 1."""
    if int(d) < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return sample_dirichlet(DirichletParams(np.ones(int(d)), 1.0), rng, size=size)


def exact_mean(s, b):
    """Exact mean of the kernel's Dirichlet law: ``(s/b + 1)/(1/b + d + 1)``
    componentwise; equals ``s + O(b)`` and fixes the barycentre exactly."""
    s = as_simplex_point(s)
    b = _check_bandwidth(b)
    return (s / b + 1.0) / (1.0 / b + s.size + 1.0)


def exact_central_second_moment(s, b, k, l):
    """Exact central second moment E{(xi_k - s_k)(xi_l - s_l)} of the
    kernel's Dirichlet law (0-based coordinate indices).

    Evaluated from the exact finite-b expression (covariance plus the outer
    product of the mean shift), so it agrees with Monte Carlo at any b and
    has the small-b limit ``b (s_k 1{k=l} - s_k s_l) + O(b^2)`` for fixed
    interior ``s``.
    """
    s = as_simplex_point(s)
    b = _check_bandwidth(b)
    d = s.size
    if not (0 <= k < d) or not (0 <= l < d):
        raise IndexError(f"coordinate indices ({k}, {l}) out of range for d={d}")
    T = 1.0 / b + d + 1.0
    uk = s[k] / b + 1.0
    ul = s[l] / b + 1.0
    same = 1.0 if k == l else 0.0
    cov = (uk * same - uk * ul / T) / (T * (T + 1.0))
    shift = (uk / T) * (ul / T) - s[k] * ul / T - s[l] * uk / T + s[k] * s[l]
    return cov + shift


def _as_index_subset(J, d):
    J = tuple(sorted(int(j) for j in J))
    if len(set(J)) != len(J):
        raise ValueError(f"index subset has duplicates: {J}")
    if J and (J[0] < 0 or J[-1] >= d):
        raise ValueError(f"index subset {J} out of range for d={d}")
    return J


def psi(s, J=()):
    """Variance shape factor
    ``{(4 pi)^(d-|J|) (1 - sum(s)) prod_{i not in J} s_i}^(-1/2)``,
    with the product over an empty set equal to 1.

    ``J`` lists the (0-based) coordinates treated as boundary directions;
    the remaining coordinates and the complement must be strictly positive.
    """
    s = as_simplex_point(s)
    d = s.size
    J = _as_index_subset(J, d)
    notJ = [i for i in range(d) if i not in J]
    inner = (4.0 * np.pi) ** (d - len(J)) * max(1.0 - s.sum(), 0.0)
    for i in notJ:
        inner *= s[i]
    if inner <= 0.0:
        raise ValueError("boundary-degenerate shape factor: zero factor under the root")
    return float(inner ** -0.5)


def boundary_variance_factor(lam):
    """Per-coordinate boundary factor ``Gamma(2 lam + 1) / {2^(2 lam + 1)
    Gamma(lam + 1)^2}``; equals 1/4 at lam = 1."""
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    if np.any(lam <= 0.0) or not np.all(np.isfinite(lam)):
        raise ValueError("boundary rates must be finite and > 0")
    lg = gammaln(2.0 * lam + 1.0) - (2.0 * lam + 1.0) * math.log(2.0) - 2.0 * gammaln(lam + 1.0)
    return float(np.exp(lg).prod())


def a_b_closed_form(s, b):
    """Squared L2 norm of the kernel, ``int kappa_{s,b}(x)^2 dx`` over S_d.

    The square of a Dirichlet density is an unnormalised Dirichlet density
    with doubled-minus-one parameters, so the integral is the exact ratio
    ``C(u,v)^2 / C(2u-1, 2v-1)`` of normalising constants (valid here since
    u_i, v >= 1 keeps the doubled parameters positive).
    """
    p = kernel_params(s, b)
    return float(np.exp(2.0 * _log_norm_const(p.u, p.v) - _log_norm_const(2.0 * p.u - 1.0, 2.0 * p.v - 1.0)))


def a_b_asymptotic(s, b, J=(), lam=None):
    """Leading small-b form of the squared-kernel integral:
    ``b^(-(d+|J|)/2) psi_J(s) prod_{i in J} Gamma(2 lam_i + 1) /
    {2^(2 lam_i + 1) Gamma(lam_i + 1)^2}``.

    For boundary subsets ``J``, the rates ``lam`` describe the limiting
    sequence ``s_i ~ lam_i b`` and must be supplied by the caller.
    """
    s = as_simplex_point(s)
    b = _check_bandwidth(b)
    J = _as_index_subset(J, s.size)
    factor = 1.0
    if J:
        if lam is None:
            raise ValueError("boundary rates lam required when J is nonempty")
        lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
        if lam.size != len(J):
            raise ValueError(f"lam has {lam.size} entries for |J|={len(J)}")
        factor = boundary_variance_factor(lam)
    return b ** (-(s.size + len(J)) / 2.0) * psi(s, J) * factor


def a_b_uniform_bound(s, b):
    """Uniform upper envelope for the squared-kernel integral at interior s:
    ``b^((d+1)/2) (1/b + d)^(d+1/2) / {(4 pi)^(d/2)
    sqrt((1 - sum(s)) prod_i s_i)}``."""
    s = as_simplex_point(s)
    b = _check_bandwidth(b)
    d = s.size
    inner = max(1.0 - s.sum(), 0.0) * np.prod(s)
    if inner <= 0.0:
        raise ValueError("uniform bound requires strictly interior s")
    return float(
        b ** ((d + 1) / 2.0) * (1.0 / b + d) ** (d + 0.5) / ((4.0 * np.pi) ** (d / 2.0) * math.sqrt(inner))
    )
