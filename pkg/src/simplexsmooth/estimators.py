"""Local linear and local constant smoothers on the simplex.

The local linear estimate at ``s`` is the intercept of the plane minimising
the kernel weighted sum of squared residuals; the normal equations are
(d+1)-dimensional and solved by symmetric elimination with a relative pivot
tolerance.  Numerically rank-deficient systems (all weight on too few
points) fall back to the local constant value with ``degenerate=True``.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .backend import core
from .kernels import as_simplex_point, as_simplex_points, _check_bandwidth

# Pivot threshold relative to the largest diagonal of the local normal matrix.
PIVOT_TOL = 1e-10

_METHODS = ("ll", "nw")


class NoSupportError(RuntimeError):
    """Every kernel weight is exactly zero: the fit location has no support."""


def _check_method(method):
    m = str(method).lower()
    if m not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}, got {method!r}")
    return m


@dataclass(eq=False)
class Dataset:
    """Paired design points on S_d and scalar responses.

    ``design`` is (n, d) with every row a valid simplex point (clamped per
    the shared tolerance policy); ``responses`` is (n,) and must be finite.
    """

    design: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        design = np.asarray(self.design, dtype=np.float64)
        if design.ndim == 1:
            design = design[:, None]
        self.design = as_simplex_points(design)
        self.responses = np.array(self.responses, dtype=np.float64, copy=True).ravel()
        if self.design.shape[0] != self.responses.size:
            raise ValueError(
                f"{self.design.shape[0]} design points but {self.responses.size} responses"
            )
        if self.n < 1:
            raise ValueError("dataset must contain at least one pair")
        if not np.all(np.isfinite(self.responses)):
            i = int(np.flatnonzero(~np.isfinite(self.responses))[0])
            raise ValueError(f"non-finite response at row {i}")

    @property
    def n(self):
        return self.design.shape[0]

    @property
    def d(self):
        return self.design.shape[1]

    @cached_property
    def _log_design(self):
        # cached log coordinates; -inf marks exact zeros (handled by the cores)
        with np.errstate(divide="ignore"):
            logX = np.log(self.design)
            om = np.maximum(1.0 - self.design.sum(axis=1), 0.0)
            log1m = np.log(om)
        return logX, log1m

    def drop(self, i):
        """Copy of the dataset with pair ``i`` removed."""
        keep = np.ones(self.n, bool)
        keep[i] = False
        return Dataset(self.design[keep], self.responses[keep])


@dataclass
class LocalFit:
    """Output of one local linear solve.

    ``estimate`` is the fitted intercept; ``slope`` the fitted plane slope
    (zero when degenerate, in which case ``estimate`` equals the local
    constant value); ``total_weight`` the raw sum of kernel weights;
    ``condition_hint`` the pivot ratio of the local system (inf when
    degenerate).
    """

    estimate: float
    slope: np.ndarray
    degenerate: bool
    total_weight: float
    condition_hint: float = field(default=np.inf)


def ll_fit(data, b, s):
    """Local linear fit of ``data`` at location ``s`` with bandwidth ``b``."""
    b = _check_bandwidth(b)
    s = as_simplex_point(s, data.d)
    logX, log1m = data._log_design
    est, slope, deg, tw, cond = core.ll_batch(
        data.design, data.responses, logX, log1m, s[None, :], b, PIVOT_TOL
    )
    if math.isnan(est[0]):
        raise NoSupportError(f"no effective support at s={s.tolist()} with b={b}")
    return LocalFit(float(est[0]), slope[0].copy(), bool(deg[0]), float(tw[0]), float(cond[0]))


def nw_estimate(data, b, s):
    """Kernel weighted mean of the responses at ``s``: a convex combination,
    always inside [min y, max y]."""
    b = _check_bandwidth(b)
    s = as_simplex_point(s, data.d)
    logX, log1m = data._log_design
    est, _ = core.nw_batch(data.design, data.responses, logX, log1m, s[None, :], b)
    if math.isnan(est[0]):
        raise NoSupportError(f"no effective support at s={s.tolist()} with b={b}")
    return float(est[0])


def predict_batch(data, b, points, method="ll"):
    """Estimates at many locations; returns ``(estimates, degenerate)``.

    Locations with no effective support get NaN estimates instead of
    raising, so one bad grid point cannot abort a whole surface.
    """
    b = _check_bandwidth(b)
    method = _check_method(method)
    pts = as_simplex_points(points, data.d) if len(points) else np.empty((0, data.d))
    if pts.shape[0] == 0:
        return np.empty(0), np.zeros(0, bool)
    logX, log1m = data._log_design
    if method == "ll":
        est, _, deg, _, _ = core.ll_batch(
            data.design, data.responses, logX, log1m, pts, b, PIVOT_TOL
        )
        return est, deg
    est, _ = core.nw_batch(data.design, data.responses, logX, log1m, pts, b)
    return est, np.isnan(est)


def predict_grid(data, b, grid, method="ll"):
    """Elementwise estimates over ``grid`` (order preserving; NaN marks a
    location where the estimator has no support)."""
    est, _ = predict_batch(data, b, grid, method)
    return est
