"""Command-line driver: data ingestion, fitting, bandwidth selection,
the simulation harness, and the asymptotics verification sweeps.

Every output starts with comment lines echoing the fully resolved
configuration (defaults included), so any run can be reproduced from its
own header.  Execution-only settings (--threads, --out) are deliberately
not echoed: reports must be byte-identical across thread counts.

Exit codes: 0 success, 2 usage error, 3 runtime/numerical failure,
4 partial completion.
"""

import argparse
import csv
import math
import sys
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._version import __version__
from .backend import BACKEND, set_threads
from .bandwidth import BandwidthSearch, loocv_select, lscv_select
from .estimators import Dataset, NoSupportError, predict_batch
from .kernels import sample_uniform_simplex
from .simulation import (
    ExperimentConfig,
    emit_report,
    gen_responses,
    mesh,
    run_experiment,
    verify_first_order,
)
from .targets import get_target

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_PARTIAL = 4

_PCT_TOL = 0.5  # sediment compositions must sum to 100 within this


class UsageError(ValueError):
    """Bad combination of otherwise well-formed flags."""


class LoadResult(NamedTuple):
    dataset: Dataset
    notes: list


def load_dataset(path, schema="generic"):
    """Load a CSV dataset.

    ``generic`` expects columns ``x1..xd`` plus ``y``; ``sediment`` expects
    ``sand,silt,clay,depth`` percentages, renormalises each triple to sum
    100 and maps to the (sand, silt) proportions with depth as the
    response (clay is the implicit complement).  Returns the dataset plus a
    list of per-row notes (e.g. renormalised compositions).
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [row for row in reader if any(c.strip() for c in row)]
    if schema == "sediment":
        return _load_sediment(path, header, rows)
    if schema == "generic":
        return _load_generic(path, header, rows)
    raise ValueError(f"unknown schema {schema!r}; expected 'generic' or 'sediment'")


def _cell(path, row_idx, row, header, col):
    j = header.index(col)
    raw = row[j].strip() if j < len(row) else ""
    try:
        val = float(raw)
    except ValueError:
        raise ValueError(f"{path}: row {row_idx}, column '{col}': non-numeric value {raw!r}") from None
    if not math.isfinite(val):
        raise ValueError(f"{path}: row {row_idx}, column '{col}': non-finite value {val}")
    return val


def _load_sediment(path, header, rows):
    wanted = ["sand", "silt", "clay", "depth"]
    lower = [h.lower() for h in header]
    if not all(c in lower for c in wanted):
        raise ValueError(f"{path}: sediment schema needs columns {wanted}, found {header}")
    notes = []
    design = []
    depths = []
    for i, row in enumerate(rows, start=1):
        sand, silt, clay, depth = (_cell(path, i, row, lower, c) for c in wanted)
        for name, v in (("sand", sand), ("silt", silt), ("clay", clay)):
            if v < 0:
                raise ValueError(f"{path}: row {i}, column '{name}': negative percentage {v}")
        if depth <= 0:
            raise ValueError(f"{path}: row {i}, column 'depth': must be > 0, got {depth}")
        total = sand + silt + clay
        if abs(total - 100.0) > _PCT_TOL:
            raise ValueError(
                f"{path}: row {i}: percentages sum to {total}, outside 100 +/- {_PCT_TOL}"
            )
        if abs(total - 100.0) > 1e-9:
            notes.append(f"row {i}: composition sum {total} renormalised to 100")
        design.append((sand / total, silt / total))
        depths.append(depth)
    return LoadResult(Dataset(np.array(design), np.array(depths)), notes)


def _load_generic(path, header, rows):
    lower = [h.lower() for h in header]
    if "y" not in lower:
        raise ValueError(f"{path}: generic schema needs a 'y' column, found {header}")
    d = 0
    while f"x{d + 1}" in lower:
        d += 1
    if d == 0:
        raise ValueError(f"{path}: generic schema needs coordinate columns x1..xd, found {header}")
    design = []
    ys = []
    for i, row in enumerate(rows, start=1):
        design.append([_cell(path, i, row, lower, f"x{j + 1}") for j in range(d)])
        ys.append(_cell(path, i, row, lower, "y"))
    try:
        return LoadResult(Dataset(np.array(design), np.array(ys)), [])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def emit_dataset(dataset):
    """Render a dataset as generic-schema CSV (columns x1..xd, y); floats
    carry full precision so ``load_dataset`` recovers it exactly."""
    cols = [f"x{j + 1}" for j in range(dataset.d)] + ["y"]
    lines = [",".join(cols)]
    for row, y in zip(dataset.design, dataset.responses):
        lines.append(",".join(format(v, ".17g") for v in row) + f",{y:.17g}")
    return "\n".join(lines) + "\n"


def simplex_lattice(spacing, d=2):
    """Regular lattice of pitch ``spacing`` on [0,1]^d intersected with S_d.

    Returns (points, skipped) where ``skipped`` counts lattice nodes outside
    the simplex.
    """
    if spacing <= 0 or spacing > 1:
        raise ValueError(f"grid spacing must be in (0, 1], got {spacing}")
    steps = int(math.floor(1.0 / spacing + 1e-9)) + 1
    axes = np.arange(steps) * spacing
    grid = np.stack(np.meshgrid(*([axes] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = grid.sum(axis=1) <= 1.0 + 1e-12
    return grid[keep], int((~keep).sum())


def _parse_id_list(text):
    """Parse '1..6', '1,3,5' or '2' into a tuple of ints."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty id list: {text!r}")
    return tuple(out)


def _read_config_file(path):
    """Flat key = value file; '#' comments and blank lines ignored."""
    values = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {i}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val.strip("\"'")
    return values


_BOOL_TRUE = ("1", "true", "yes", "on")


def _apply_config_file(parser, args, argv):
    """Merge config-file values under explicit flags (flags win)."""
    if not getattr(args, "config", None):
        return args
    file_vals = _read_config_file(args.config)
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=", 1)[0].replace("-", "_"))
    for key, raw in file_vals.items():
        if key in explicit or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, raw.lower() in _BOOL_TRUE)
        elif isinstance(current, int):
            setattr(args, key, int(raw))
        elif isinstance(current, float):
            setattr(args, key, float(raw))
        else:
            setattr(args, key, raw)
    return args


_ECHO_SKIP = {"command", "threads", "out", "config", "func"}


def _header_lines(args):
    lines = [
        f"simplexsmooth {__version__} ({BACKEND} backend)",
        f"subcommand = {args.command}",
    ]
    for key in sorted(vars(args)):
        if key in _ECHO_SKIP:
            continue
        lines.append(f"{key.replace('_', '-')} = {getattr(args, key)}")
    return lines


def _write_output(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _search_from_args(args):
    return BandwidthSearch(
        b_min=args.b_min,
        b_max=args.b_max,
        coarse_grid_size=args.coarse_grid,
        refine_tolerance=args.refine_tol,
    )


def bundled_sediment_path():
    """Path of the packaged 39-row lake sediment dataset."""
    return resources.files("simplexsmooth.data").joinpath("arctic_lake.csv")


def _resolve_data(args):
    if args.data == "bundled:sediment":
        return load_dataset(bundled_sediment_path(), "sediment")
    return load_dataset(args.data, args.schema)


def cmd_fit(args):
    loaded = _resolve_data(args)
    data = loaded.dataset
    header = _header_lines(args)
    header += [f"load-note: {note}" for note in loaded.notes]
    if args.bandwidth is not None:
        b_hat = float(args.bandwidth)
        if b_hat <= 0:
            raise UsageError(f"--bandwidth must be > 0, got {b_hat}")
    elif args.cv == "loocv":
        sel = loocv_select(data, method=args.method, search=_search_from_args(args))
        b_hat = sel.b_hat
        header.append(f"selected-bandwidth = {b_hat!r} (loocv score {sel.score!r})")
        if sel.boundary_hit:
            header.append("selected-bandwidth-boundary-hit = true")
    else:
        raise UsageError("fit needs --bandwidth or --cv loocv")
    if args.grid_file:
        pts = np.loadtxt(args.grid_file, delimiter=",", skiprows=1, ndmin=2)
        skipped = 0
    else:
        pts, skipped = simplex_lattice(args.grid_spacing, data.d)
    header.append(f"bandwidth = {b_hat!r}")
    header.append(f"grid-points = {len(pts)}")
    header.append(f"grid-points-skipped-outside = {skipped}")
    est, deg = predict_batch(data, b_hat, pts, args.method)
    lines = [f"# {ln}" for ln in header]
    cols = [f"x{j + 1}" for j in range(data.d)] + ["estimate", "degenerate"]
    lines.append(",".join(cols))
    for p, e, g in zip(pts, est, deg):
        lines.append(",".join([format(v, ".17g") for v in p] + [format(e, ".17g"), str(int(g))]))
    _write_output("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_cv(args):
    header = _header_lines(args)
    search = _search_from_args(args)
    if args.cv == "loocv":
        loaded = _resolve_data(args)
        header += [f"load-note: {note}" for note in loaded.notes]
        sel = loocv_select(loaded.dataset, method=args.method, search=search)
    else:
        targets = _parse_id_list(args.targets)
        if len(targets) != 1:
            raise UsageError("lscv mode scores one target at a time")
        target = get_target(targets[0])
        k_list = _parse_id_list(args.k)
        if len(k_list) != 1:
            raise UsageError("lscv mode takes a single mesh size k")
        rng = np.random.default_rng(args.seed)
        data = gen_responses(target, mesh(k_list[0]), args.noise_sd, rng)
        eval_points = sample_uniform_simplex(2, rng, size=1000)
        sel = lscv_select(args.method, data, target.value, eval_points=eval_points, search=search)
    header.append(f"b-hat = {sel.b_hat!r}")
    header.append(f"score = {sel.score!r}")
    header.append(f"boundary-hit = {str(sel.boundary_hit).lower()}")
    lines = [f"# {ln}" for ln in header]
    lines.append("b,score")
    for bb, sc in sel.score_curve:
        lines.append(f"{bb:.17g},{sc:.17g}")
    _write_output("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args):
    cfg = ExperimentConfig(
        methods=("ll", "nw"),
        targets=_parse_id_list(args.targets),
        k_values=_parse_id_list(args.k),
        random_design=args.random_design,
        replications=args.reps,
        noise_sd=args.noise_sd,
        base_seed=args.seed,
        ise_variant=args.variant,
        search=_search_from_args(args),
    )
    report = run_experiment(cfg)
    _write_output(emit_report(report, args.format), args.out)
    return EXIT_PARTIAL if report.incomplete else EXIT_OK


def cmd_verify(args):
    from .kernels import (
        a_b_closed_form,
        a_b_asymptotic,
        exact_central_second_moment,
        exact_mean,
        psi,
        sample_dirichlet,
        kernel_params,
    )

    rng = np.random.default_rng(args.seed)
    out = []
    header = _header_lines(args)
    s = np.array([1.0 / 3.0, 1.0 / 3.0])

    rows = verify_first_order(
        s, [args.n], b=0.05, sigma=0.1, target=3, replications=args.reps, rng=rng
    )
    out.append("section,n,measured,predicted,ratio")
    for row in rows:
        out.append(
            f"variance,{row.n},{row.measured_var:.6g},{row.predicted_var:.6g},{row.var_ratio:.4f}"
        )

    affine = verify_first_order(
        s, [args.n], b=0.05, sigma=0.1, target=0, replications=args.reps, rng=rng
    )
    for row in affine:
        z = row.measured_bias / row.bias_se if row.bias_se else 0.0
        out.append(f"affine-bias,{row.n},{row.measured_bias:.6g},0,{z:.4f}")

    s_fix = np.array([0.3, 0.3])
    for b in (0.1, 0.03, 0.01, 0.003, 0.001):
        ratio = a_b_closed_form(s_fix, b) * b ** (s_fix.size / 2.0) / psi(s_fix)
        out.append(f"squared-kernel-ratio,{b},{a_b_closed_form(s_fix, b):.6g},{psi(s_fix) * b ** -1.0:.6g},{ratio:.6f}")

    draws = sample_dirichlet(kernel_params(s_fix, 0.05), rng, size=100000)
    emp = draws.mean(axis=0)
    exm = exact_mean(s_fix, 0.05)
    out.append(f"moment-mean,100000,{emp[0]:.6g},{exm[0]:.6g},{emp[0] / exm[0]:.6f}")
    emp_cov = float(np.mean((draws[:, 0] - s_fix[0]) * (draws[:, 1] - s_fix[1])))
    exc = exact_central_second_moment(s_fix, 0.05, 0, 1)
    out.append(f"moment-cross,100000,{emp_cov:.6g},{exc:.6g},{emp_cov / exc:.6f}")

    text = "".join(f"# {ln}\n" for ln in header) + "\n".join(out) + "\n"
    _write_output(text, args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="simplexsmooth",
        description="Regression smoothing on the unit simplex with Dirichlet kernel weights.",
    )
    parser.add_argument("--version", action="version", version=f"simplexsmooth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False, sim=False):
        p.add_argument("--config", help="flat key = value config file; flags override")
        p.add_argument("--seed", type=int, default=20250811, help="base seed")
        p.add_argument("--threads", type=int, default=None, help="bound kernel threads")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--b-min", type=float, default=1e-3, help="search window lower edge")
        p.add_argument("--b-max", type=float, default=2.0, help="search window upper edge")
        p.add_argument("--coarse-grid", type=int, default=32, help="coarse log-grid size")
        p.add_argument("--refine-tol", type=float, default=1e-3, help="relative refinement tolerance")
        if data:
            p.add_argument(
                "--data",
                default="bundled:sediment",
                help="CSV path, or bundled:sediment for the packaged lake data",
            )
            p.add_argument("--schema", choices=("generic", "sediment"), default="sediment")
            p.add_argument("--method", choices=("ll", "nw"), default="ll")
        if sim:
            p.add_argument("--targets", default="1..6", help="target ids, e.g. 1..6 or 1,3")
            p.add_argument("--k", default="7", help="mesh sizes, e.g. 7 or 7,10")
            p.add_argument("--noise-sd", type=float, default=0.01)

    p_fit = sub.add_parser("fit", help="fit and predict over a grid")
    common(p_fit, data=True)
    p_fit.add_argument("--bandwidth", type=float, default=None)
    p_fit.add_argument("--cv", choices=("loocv",), default=None, help="select bandwidth by LOOCV")
    p_fit.add_argument("--grid-spacing", type=float, default=1.0 / 199.0)
    p_fit.add_argument("--grid-file", help="CSV of prediction points (header x1..xd)")
    p_fit.set_defaults(func=cmd_fit)

    p_cv = sub.add_parser("cv", help="emit a cross-validation score curve")
    common(p_cv, data=True, sim=True)
    p_cv.add_argument("--cv", choices=("loocv", "lscv"), default="loocv")
    p_cv.set_defaults(func=cmd_cv)

    p_sim = sub.add_parser("simulate", help="run the replication study")
    common(p_sim, sim=True)
    p_sim.add_argument("--reps", type=int, default=20)
    p_sim.add_argument("--variant", choices=("plain", "boundary", "weighted"), default="plain")
    p_sim.add_argument("--random-design", action="store_true")
    p_sim.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="measured vs predicted asymptotics tables")
    common(p_ver)
    p_ver.add_argument("--reps", type=int, default=2000)
    p_ver.add_argument("--n", type=int, default=2000, help="design size per replication")
    p_ver.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _apply_config_file(parser, args, argv)
        set_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoSupportError, RuntimeError, ArithmeticError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
