"""Monte Carlo comparison harness and empirical checks of the asymptotics.

Reproduces the estimator comparison at configurable scale: fixed triangular
mesh or random Dirichlet designs, Gaussian noise, per-replication LSCV
bandwidths, and three integrated-squared-error variants (plain, boundary
region only, design-density weighted).  Replication seeds are pre-assigned
(``base_seed + r``) and all aggregation runs in a fixed order, so a report
is a pure function of its configuration.
"""

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__ as _pkg_version
from .backend import BACKEND
from .bandwidth import BandwidthSearch, _mean_weighted_sq_error, _predict_or_name_failure, h_term, lscv_select
from .estimators import Dataset, _check_method, ll_fit, nw_estimate
from .kernels import (
    DirichletParams,
    as_simplex_point,
    log_dirichlet_density,
    psi,
    sample_dirichlet,
    sample_uniform_simplex,
)
from .targets import get_target

_VARIANTS = ("plain", "boundary", "weighted")

# Design density for the random-design protocol: Dirichlet(2,...,2; 2).
_RANDOM_DESIGN = DirichletParams(np.array([2.0, 2.0]), 2.0)


def mesh(k):
    """Fixed triangular design mesh of k(k+1)/2 points strictly inside S_2.

    Points are ``((w(i-1) + 1/2)/(k+1), (w(k-j) + 1/2)/(k+1))`` over
    ``1 <= i <= j <= k`` with ``w = (k - 1/sqrt(2)) / (k - 1)``.
    """
    k = int(k)
    if k < 2:
        raise ValueError(f"mesh needs k >= 2, got {k}")
    w = (k - 1.0 / math.sqrt(2.0)) / (k - 1.0)
    pts = [
        ((w * (i - 1) + 0.5) / (k + 1), (w * (k - j) + 0.5) / (k + 1))
        for i in range(1, k + 1)
        for j in range(i, k + 1)
    ]
    return np.array(pts, dtype=np.float64)


def gen_responses(target, design, noise_sd, rng):
    """Dataset with responses ``m(x_i) + eps_i``, eps iid Gaussian(0, noise_sd^2).

    The normal draws are consumed even at ``noise_sd=0`` so the stream
    position does not depend on the noise level; the responses are then
    exactly ``m(x_i)``.
    """
    design = np.asarray(design, dtype=np.float64)
    if design.ndim != 2 or design.shape[0] < 1:
        raise ValueError("design must be a nonempty (n, d) array")
    if noise_sd < 0.0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
    value = target.value if hasattr(target, "value") else target
    y = np.asarray(value(design), dtype=np.float64)
    y = y + rng.standard_normal(design.shape[0]) * noise_sd
    return Dataset(design, y)


def sample_boundary_region(d, delta, rng, size=None):
    """Uniform draws on the buffer region of S_d: points with some coordinate
    (or the complement) below ``delta``.  Rejection from the uniform law on
    S_d, capped at 10^6 attempts."""
    d = int(d)
    delta = float(delta)
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if delta >= 1.0 / (d + 1):
        warnings.warn(
            f"delta={delta} >= 1/(d+1): the buffered simplex is empty and the "
            "boundary region is all of S_d",
            stacklevel=2,
        )
    want = 1 if size is None else int(size)
    out = np.empty((want, d))
    got = 0
    attempts = 0
    cap = 10**6
    while got < want:
        chunk = min(max(4 * (want - got), 1024), cap - attempts)
        if chunk <= 0:
            raise RuntimeError(
                f"boundary-region rejection sampling exceeded {cap} attempts "
                f"(delta={delta}, d={d})"
            )
        U = sample_uniform_simplex(d, rng, size=chunk)
        attempts += chunk
        near = (U < delta).any(axis=1) | (1.0 - U.sum(axis=1) < delta)
        take = U[near][: want - got]
        out[got : got + take.shape[0]] = take
        got += take.shape[0]
    return out[0] if size is None else out


def _target_callable(target):
    return target.value if hasattr(target, "value") else target


def ise_plain(method, data, b_hat, target, eval_points):
    """Mean squared error against the target over a uniform evaluation
    sample, divided by d! (Monte Carlo integrated squared error)."""
    pts = np.asarray(eval_points, dtype=np.float64)
    est = _predict_or_name_failure(_check_method(method), data, b_hat, pts)
    truth = _target_callable(target)(pts)
    return _mean_weighted_sq_error(est, truth, math.factorial(data.d))


def ise_boundary(method, data, b_hat, target, boundary_points):
    """Same accumulation as :func:`ise_plain`, over a boundary-region sample."""
    return ise_plain(method, data, b_hat, target, boundary_points)


def design_density(points):
    """Density of the random-design law (Dirichlet(2,2;2)) at S_2 points."""
    return np.exp(log_dirichlet_density(_RANDOM_DESIGN, points))


def ise_weighted(method, data, b_hat, target, eval_points):
    """Design-density weighted variant: each squared error is multiplied by
    the random-design density before averaging."""
    pts = np.asarray(eval_points, dtype=np.float64)
    est = _predict_or_name_failure(_check_method(method), data, b_hat, pts)
    truth = _target_callable(target)(pts)
    return _mean_weighted_sq_error(est, truth, math.factorial(data.d), weights=design_density(pts))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulation run."""

    methods: tuple = ("ll", "nw")
    targets: tuple = (1, 2, 3, 4, 5, 6)
    k_values: tuple = (7,)
    random_design: bool = False
    replications: int = 20
    noise_sd: float = 0.01
    base_seed: int = 20250811
    eval_sample_size: int = 1000
    ise_variant: str = "plain"
    search: BandwidthSearch = field(default_factory=BandwidthSearch)

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(_check_method(m) for m in self.methods))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.noise_sd < 0.0:
            raise ValueError("noise_sd must be >= 0")
        if any(k < 2 for k in self.k_values):
            raise ValueError("mesh sizes k must be >= 2")
        if self.ise_variant not in _VARIANTS:
            raise ValueError(f"ise_variant must be one of {_VARIANTS}")
        if self.eval_sample_size < 1:
            raise ValueError("eval_sample_size must be >= 1")


def _quantile(sorted_vals, p):
    # linear interpolation between order statistics: q(p) at 1 + p(n-1)
    return float(np.quantile(sorted_vals, p, method="linear"))


@dataclass
class CellStats:
    """Summary of the replication ISE values for one (target, n, method)."""

    mean: float
    median: float
    sd: float
    iqr: float
    completed: int
    failed: int

    @classmethod
    def from_values(cls, values, failed):
        v = np.sort(np.asarray(values, dtype=np.float64))
        n = v.size
        mean = float(v.mean())
        sd = float(math.sqrt(((v - mean) ** 2).sum() / (n - 1))) if n > 1 else 0.0
        return cls(
            mean=mean,
            median=_quantile(v, 0.5),
            sd=sd,
            iqr=_quantile(v, 0.75) - _quantile(v, 0.25),
            completed=n,
            failed=int(failed),
        )


@dataclass
class SimulationReport:
    """Cells keyed by (target id, n, method) plus the generating config."""

    config: ExperimentConfig
    cells: dict = field(default_factory=dict)

    def row_keys(self):
        seen = []
        for tid in self.config.targets:
            for k in self.config.k_values:
                key = (tid, k * (k + 1) // 2)
                if key not in seen:
                    seen.append(key)
        return seen

    @property
    def incomplete(self):
        return any(c.failed for c in self.cells.values())


def run_experiment(cfg):
    """Run the full replication study described by ``cfg``.

    Per replication r, a fresh generator seeded ``base_seed + r`` drives, in
    order: the design (random-design protocol only; the mesh is fixed), the
    response noise, the LSCV evaluation sample, and the error evaluation
    sample.  Both methods share those draws within a replication, so the
    comparison is paired.  A failed replication only marks its cell
    incomplete; the rest of the run proceeds.
    """
    report = SimulationReport(config=cfg)
    ise_fn = {"plain": ise_plain, "boundary": ise_boundary, "weighted": ise_weighted}[cfg.ise_variant]
    for tid in cfg.targets:
        target = get_target(tid)
        for k in cfg.k_values:
            n = k * (k + 1) // 2
            fixed_design = None if cfg.random_design else mesh(k)
            values = {m: [] for m in cfg.methods}
            failed = {m: 0 for m in cfg.methods}
            for r in range(cfg.replications):
                rng = np.random.default_rng(cfg.base_seed + r)
                design = (
                    sample_dirichlet(_RANDOM_DESIGN, rng, size=n)
                    if cfg.random_design
                    else fixed_design
                )
                data = gen_responses(target, design, cfg.noise_sd, rng)
                sel_points = sample_uniform_simplex(2, rng, size=cfg.eval_sample_size)
                if cfg.ise_variant == "boundary":
                    delta = n ** (-1.0 / 3.0) / 5.0
                    err_points = sample_boundary_region(2, delta, rng, size=cfg.eval_sample_size)
                else:
                    err_points = sample_uniform_simplex(2, rng, size=cfg.eval_sample_size)
                for m in cfg.methods:
                    try:
                        sel = lscv_select(m, data, target.value, eval_points=sel_points, search=cfg.search)
                        values[m].append(ise_fn(m, data, sel.b_hat, target, err_points))
                    except Exception:
                        failed[m] += 1
            for m in cfg.methods:
                if values[m]:
                    report.cells[(tid, n, m)] = CellStats.from_values(values[m], failed[m])
                else:
                    report.cells[(tid, n, m)] = CellStats(
                        math.nan, math.nan, math.nan, math.nan, 0, failed[m]
                    )
    return report


_STATS = (("Mean", "mean"), ("Median", "median"), ("SD", "sd"), ("IQR", "iqr"))


def _fmt(x):
    return format(x, ".17g")


def _report_header_lines(report):
    cfg = report.config
    lines = [
        "simplexsmooth-report v1",
        f"generated-by = simplexsmooth {_pkg_version} ({BACKEND} backend)",
        f"methods = {','.join(cfg.methods)}",
        f"targets = {','.join(str(t) for t in cfg.targets)}",
        f"k-values = {','.join(str(k) for k in cfg.k_values)}",
        f"design = {'dirichlet-random' if cfg.random_design else 'mesh'}",
        f"replications = {cfg.replications}",
        f"noise-sd = {_fmt(cfg.noise_sd)}",
        f"base-seed = {cfg.base_seed}",
        f"eval-sample-size = {cfg.eval_sample_size}",
        f"ise-variant = {cfg.ise_variant}",
        f"search = [{_fmt(cfg.search.b_min)}, {_fmt(cfg.search.b_max)}] "
        f"grid={cfg.search.coarse_grid_size} tol={_fmt(cfg.search.refine_tolerance)}",
    ]
    marks = [
        f"m{tid}:n={n}:{m}={c.failed}/{c.failed + c.completed}"
        for (tid, n, m), c in sorted(report.cells.items())
        if c.failed
    ]
    if marks:
        lines.append("incomplete = " + "; ".join(marks))
    return lines


def emit_report(report, fmt="csv"):
    """Render a report as CSV (comment-prefixed header) or a markdown table.

    Columns follow the fixed order Function, n, then Mean/Median/SD/IQR for
    each configured method; floats carry full precision so the CSV
    round-trips exactly.
    """
    if fmt not in ("csv", "markdown"):
        raise ValueError(f"format must be 'csv' or 'markdown', got {fmt!r}")
    methods = report.config.methods
    cols = ["Function", "n"]
    for label, _ in _STATS:
        for m in methods:
            cols.append(f"{label}-{m.upper()}")
    rows = []
    for tid, n in report.row_keys():
        row = [f"m{tid}", str(n)]
        for _, attr in _STATS:
            for m in methods:
                cell = report.cells.get((tid, n, m))
                row.append(_fmt(getattr(cell, attr)) if cell is not None else "")
        rows.append(row)
    buf = io.StringIO()
    if fmt == "csv":
        for line in _report_header_lines(report):
            buf.write(f"# {line}\n")
        buf.write(",".join(cols) + "\n")
        for row in rows:
            buf.write(",".join(row) + "\n")
    else:
        for line in _report_header_lines(report):
            buf.write(f"{line}  \n")
        buf.write("\n| " + " | ".join(cols) + " |\n")
        buf.write("|" + "|".join(["---"] * len(cols)) + "|\n")
        for row in rows:
            buf.write("| " + " | ".join(row) + " |\n")
    return buf.getvalue()


def parse_report(text):
    """Parse an emitted CSV report back into ``{(function, n): {col: value}}``.

    Exact inverse of :func:`emit_report` for the CSV format (full-precision
    floats round-trip bitwise).
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        return {}
    header = lines[0].split(",")
    out = {}
    for ln in lines[1:]:
        cells = ln.split(",")
        key = (cells[0], int(cells[1]))
        out[key] = {
            col: float(val) if val else math.nan
            for col, val in zip(header[2:], cells[2:])
        }
    return out


@dataclass
class FirstOrderRow:
    """Measured vs predicted leading bias/variance at one sample size."""

    n: int
    replications: int
    measured_var: float
    predicted_var: float
    var_ratio: float
    measured_bias: float
    predicted_bias: float
    bias_se: float


def verify_first_order(
    s,
    n_values,
    b,
    sigma,
    target,
    replications=2000,
    rng=None,
    method="ll",
):
    """Monte Carlo check of the leading bias/variance predictions at ``s``.

    Each replication draws a fresh uniform design of size n on S_d, adds
    Gaussian(0, sigma^2) noise to the target responses and fits at ``s``.
    The measured variance is compared against
    ``psi_empty(s) sigma^2 / (f(s) n b^(d/2))`` with ``f = d!`` (uniform
    design), and the measured bias against ``b * h_empty(s)`` from the
    target's analytic Hessian.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    s = as_simplex_point(s)
    d = s.size
    target = get_target(target) if not hasattr(target, "value") else target
    method = _check_method(method)
    f_design = float(math.factorial(d))
    truth = float(target.value(s))
    h0 = h_term(target.hessian, s)
    rows = []
    for n in n_values:
        n = int(n)
        est = np.empty(int(replications))
        for r in range(int(replications)):
            design = sample_uniform_simplex(d, rng, size=n)
            data = gen_responses(target, design, sigma, rng)
            if method == "ll":
                est[r] = ll_fit(data, b, s).estimate
            else:
                est[r] = nw_estimate(data, b, s)
        measured_var = float(est.var(ddof=1))
        predicted_var = psi(s) * sigma * sigma / (f_design * n * b ** (d / 2.0))
        measured_bias = float(est.mean() - truth)
        rows.append(
            FirstOrderRow(
                n=n,
                replications=int(replications),
                measured_var=measured_var,
                predicted_var=float(predicted_var),
                var_ratio=measured_var / predicted_var,
                measured_bias=measured_bias,
                predicted_bias=float(b * h0),
                bias_se=float(est.std(ddof=1) / math.sqrt(len(est))),
            )
        )
    return rows
