"""Command line interface: simulate | decompose | fit | fit-probit | predict | plot.

Conventions
-----------
* CSV files carry a mandatory header row; column roles are selected by
  name with ``--y``, ``--coords``, ``--x`` and ``--group``.
* All numbers are written with 12 significant digits, fit summaries as
  JSON, figures as dependency-free SVG 1.1.
* Every command is deterministic given its flags and seed; re-running
  produces byte-identical outputs.
* Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .basis import spread_knots
from .correlation import CorrelationModel, corr_matrix
from .figures import render_fit_figure
from .linalg import SingularMatrixError, sym_eigen
from .mixedlm import ConvergenceError, LinearMixedModel, predict_mean, wald_interval
from .probit import SpatialProbit
from .simulate import simulate_dataset
from .validation import check_full_column_rank
from . import structures as st


class UsageError(Exception):
    """Bad flags or malformed input; maps to exit code 2."""


# ---------------------------------------------------------------------------
# formatting and file helpers

def fmt(value):
    """12-significant-digit text for a number."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def round_floats(obj):
    """Recursively round floats to 12 significant digits for JSON output."""
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not np.isfinite(v):
            return None
        return float(f"{v:.12g}")
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist())
    return obj


def write_json(path, payload):
    try:
        with open(path, "w", newline="\n") as fh:
            json.dump(round_floats(payload), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_table(path, names, columns):
    """RFC-4180-style CSV with 12-significant-digit numbers."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            n = len(columns[0])
            for i in range(n):
                row = []
                for col in columns:
                    v = col[i]
                    row.append(v if isinstance(v, str) else fmt(v))
                writer.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_table(path):
    """Read a headered CSV into {name: array}; numeric columns become float."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise UsageError(f"{path} is empty")
    header, data = rows[0], rows[1:]
    if not data:
        raise UsageError(f"{path} has no data rows")
    table = {}
    for j, name in enumerate(header):
        raw = [row[j] for row in data]
        try:
            table[name] = np.array([float(v) for v in raw])
        except ValueError:
            table[name] = np.array(raw)
    return table


def table_column(table, name, path="input"):
    if name not in table:
        raise UsageError(f"column {name!r} not found in {path} "
                         f"(available: {', '.join(table)})")
    return table[name]


def coords_from_table(table, coord_names, path="input"):
    cols = [table_column(table, name, path) for name in coord_names]
    for name, col in zip(coord_names, cols):
        if col.dtype.kind not in "fi":
            raise UsageError(f"coordinate column {name!r} is not numeric")
    return np.column_stack(cols)


def covariates_from_table(table, x_names, path="input"):
    if not x_names:
        return None
    cols = [table_column(table, name, path) for name in x_names]
    for name, col in zip(x_names, cols):
        if col.dtype.kind not in "fi":
            raise UsageError(f"covariate column {name!r} is not numeric")
    return np.column_stack(cols)


def split_names(text):
    return [s.strip() for s in text.split(",") if s.strip()] if text else []


def parse_phi_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--phi-grid expects LO:HI:N, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"--phi-grid expects LO:HI:N, got {text!r}") from exc
    if not (0 < lo <= hi) or n < 1:
        raise UsageError("--phi-grid needs 0 < LO <= HI and N >= 1")
    return np.linspace(lo, hi, n)


def resolve_knots(knots_arg, coords, coord_names):
    """``--knots`` accepts a count (auto layout) or a CSV of knot locations."""
    if knots_arg is None:
        return None
    try:
        m = int(knots_arg)
    except ValueError:
        table = read_table(knots_arg)
        return coords_from_table(table, coord_names, path=knots_arg)
    if m < 1:
        raise UsageError("--knots count must be positive")
    return spread_knots(coords, m)


def sidecar(path, suffix):
    base, _ = os.path.splitext(path)
    return base + suffix


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args):
    beta = [float(v) for v in split_names(args.beta)]
    if not beta:
        raise UsageError("--beta must list at least the intercept")
    data = simulate_dataset(
        args.n, beta, family=args.family, phi=args.phi,
        sigma2_eps=args.sigma2_eps, sigma2_alpha=args.sigma2_alpha,
        seed=args.seed, dim=args.dim, extent=args.extent, trend=args.trend,
        binary=args.binary, n_groups=args.n_groups,
    )
    names = ["coord"] if args.dim == 1 else ["coord1", "coord2"]
    columns = [data["coords"][:, j] for j in range(args.dim)]
    for j in range(data["X"].shape[1]):
        names.append(f"x{j + 1}")
        columns.append(data["X"][:, j])
    if "group" in data:
        names.append("group")
        columns.append(list(data["group"]))
    names.append("y")
    columns.append(data["y"].astype(float) if not args.binary else data["y"])
    write_table(args.output, names, columns)
    return 0


def cmd_decompose(args):
    table = read_table(args.input)
    coord_names = split_names(args.coords)
    coords = coords_from_table(table, coord_names)
    model = CorrelationModel(args.family, args.phi)
    r = corr_matrix(coords, model)
    values, vectors = sym_eigen(r, "correlation matrix")
    from .basis import eigen_basis

    basis = eigen_basis(r)
    z = basis.matrix
    recon = float(np.abs(basis.gram() - r).max())

    names = list(coord_names) + [f"z{j + 1}" for j in range(z.shape[1])]
    columns = [coords[:, j] for j in range(coords.shape[1])]
    columns += [z[:, j] for j in range(z.shape[1])]
    write_table(args.output, names, columns)
    write_json(sidecar(args.output, ".json"), {
        "command": "decompose",
        "family": args.family,
        "phi": args.phi,
        "n": int(r.shape[0]),
        "eigenvalues": values.tolist(),
        "reconstruction_max_abs_diff": recon,
    })
    return 0


def _model_config(args, coord_names, x_names, knots):
    return {
        "family": args.family,
        "basis": args.basis,
        "phi": args.phi,
        "knots": None if knots is None else knots.tolist(),
        "bandwidth": args.bandwidth,
        "degree": args.degree,
        "fixed_basis": bool(args.fixed_basis),
        "include_nugget": not args.no_nugget,
        "y_column": args.y,
        "coord_columns": coord_names,
        "x_columns": x_names,
        "group_column": args.group,
    }


def _estimator_from_config(cfg):
    knots = None if cfg["knots"] is None else np.asarray(cfg["knots"], dtype=float)
    return LinearMixedModel(
        family=cfg["family"], basis=cfg["basis"], phi=cfg["phi"], knots=knots,
        bandwidth=cfg["bandwidth"], degree=cfg["degree"],
        fixed_basis=cfg["fixed_basis"], include_nugget=cfg["include_nugget"],
    )


def _load_fit_inputs(table, cfg, path="input"):
    y = table_column(table, cfg["y_column"], path)
    if y.dtype.kind not in "fi":
        raise UsageError(f"response column {cfg['y_column']!r} is not numeric")
    coords = None
    if cfg["coord_columns"]:
        coords = coords_from_table(table, cfg["coord_columns"], path)
    X = covariates_from_table(table, cfg["x_columns"], path)
    groups = None
    if cfg["group_column"]:
        groups = table_column(table, cfg["group_column"], path)
    return y, X, coords, groups


def _coef_names(cfg, n_coef, has_intercept=True):
    names = ["intercept"] if has_intercept else []
    names += list(cfg["x_columns"])
    k = 1
    while len(names) < n_coef:
        names.append(f"basis{k}")
        k += 1
    return names[:n_coef]


def cmd_fit(args):
    coord_names = split_names(args.coords)
    x_names = split_names(args.x)
    table = read_table(args.input)
    coords = coords_from_table(table, coord_names) if coord_names else None
    knots = None
    if args.basis in ("gauss-kernel", "uniform-kernel", "pp", "shifted-quadratic"):
        if args.knots is None:
            raise UsageError(f"--basis {args.basis} requires --knots")
        knots = resolve_knots(args.knots, coords, coord_names)
    if args.basis == "shifted-quadratic" and not args.fixed_basis:
        raise UsageError("--basis shifted-quadratic is a fixed-effect "
                         "parameterization; add --fixed-basis")
    cfg = _model_config(args, coord_names, x_names, knots)
    y, X, coords, groups = _load_fit_inputs(table, cfg)

    est = _estimator_from_config(cfg)
    has_intercept = not (cfg["fixed_basis"] and cfg["basis"] == "shifted-quadratic")
    design_probe = est._design(X, y.size, coords)
    check_full_column_rank(design_probe,
                           _coef_names(cfg, design_probe.shape[1], has_intercept))
    est.fit(X, y, coords=coords, groups=groups)

    names = _coef_names(cfg, est.beta_.size, has_intercept)
    se = np.sqrt(np.diag(est.beta_cov_))
    lo, hi = wald_interval(est.beta_, se, args.level)
    coefficients = [
        {"name": names[k], "estimate": float(est.beta_[k]), "se": float(se[k]),
         "ci_low": float(lo[k]), "ci_high": float(hi[k])}
        for k in range(est.beta_.size)
    ]
    max_lag = args.max_lag
    if max_lag is None:
        max_lag = max(1, min(20, y.size // 2 - 1))
    report = est.diagnostics(max_lag=max_lag)

    payload = {
        "command": "fit",
        "model": cfg,
        "n": int(y.size),
        "estimates": {
            "coefficients": coefficients,
            "sigma2_eps": float(est.sigma2_eps_),
            "sigma2_alpha": float(est.sigma2_alpha_),
            "phi": None if est.phi_ is None else float(est.phi_),
            "loglik": float(est.loglik_),
            "converged": bool(est.converged_),
            "level": args.level,
        },
        "diagnostics": report.to_dict(),
    }
    write_json(args.output, payload)

    names_out = list(cfg["coord_columns"]) + ["y", "fitted", "eta", "residual"]
    columns = []
    if coords is not None:
        columns += [coords[:, j] for j in range(coords.shape[1])]
    else:
        names_out = names_out[len(cfg["coord_columns"]):]
    columns += [y, est.fitted_, est.eta_, est.residuals_]
    write_table(sidecar(args.output, ".fitted.csv"), names_out, columns)
    return 0


def cmd_fit_probit(args):
    coord_names = split_names(args.coords)
    x_names = split_names(args.x)
    table = read_table(args.input)
    coords = coords_from_table(table, coord_names)
    y = table_column(table, args.y)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise UsageError(f"response column {args.y!r} must be binary 0/1")
    X = covariates_from_table(table, x_names)
    knots = resolve_knots(args.knots, coords, coord_names)
    phi_grid = parse_phi_grid(args.phi_grid) if args.phi_grid else None

    est = SpatialProbit(
        family=args.family, phi_grid=phi_grid, knots=knots,
        n_iter=args.iters, n_burn=args.burn, seed=args.seed,
        fix_sigma2_alpha=args.fix_sigma2_alpha,
    )
    est.fit(X, y, coords=coords)
    summary = est.summary()
    names = _coef_names({"x_columns": x_names}, summary["beta_mean"].size)

    payload = {
        "command": "fit-probit",
        "model": {
            "family": args.family,
            "knots": None if knots is None else knots.tolist(),
            "phi_grid": est.samples_.phi_grid.tolist(),
            "y_column": args.y,
            "coord_columns": coord_names,
            "x_columns": x_names,
        },
        "n": int(y.size),
        "n_iter": int(args.iters),
        "n_burn": int(args.burn),
        "seed": int(args.seed),
        "posterior": {
            "beta": [
                {"name": names[k], "mean": float(summary["beta_mean"][k]),
                 "sd": float(summary["beta_sd"][k])}
                for k in range(summary["beta_mean"].size)
            ],
            "sigma2_alpha": {"mean": summary["sigma2_alpha_mean"],
                             "sd": summary["sigma2_alpha_sd"]},
            "phi": {"mean": summary["phi_mean"], "sd": summary["phi_sd"]},
        },
    }
    write_json(args.output, payload)

    if args.grid:
        grid_coords = _prediction_grid(coords, args.grid)
        grid_X = np.zeros((grid_coords.shape[0], len(x_names))) if x_names else None
        probs = est.predict_proba(grid_X, coords=grid_coords)
        names_out = list(coord_names) + ["probability"]
        columns = [grid_coords[:, j] for j in range(grid_coords.shape[1])] + [probs]
        write_table(sidecar(args.output, ".pred.csv"), names_out, columns)
    return 0


def _prediction_grid(coords, size):
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    if coords.shape[1] == 1:
        return np.linspace(lo[0], hi[0], size).reshape(-1, 1)
    xs = np.linspace(lo[0], hi[0], size)
    ys = np.linspace(lo[1], hi[1], size)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _load_fit_json(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc
    if payload.get("command") != "fit":
        raise UsageError(f"{path} is not a fit summary")
    return payload


def _rebuild(payload, table):
    """Reconstruct design, structure, and estimates from a fit summary."""
    cfg = payload["model"]
    y, X, coords, groups = _load_fit_inputs(table, cfg)
    est = _estimator_from_config(cfg)
    design = est._design(X, y.size, coords)
    structure = est._build_structure(coords, groups)
    estimates = payload["estimates"]
    beta = np.array([c["estimate"] for c in estimates["coefficients"]])
    return cfg, est, y, coords, groups, design, structure, beta, estimates


def cmd_predict(args):
    payload = _load_fit_json(args.fit)
    table = read_table(args.input)
    cfg, est, y, coords, groups, design, structure, beta, estimates = _rebuild(payload, table)

    new_table = read_table(args.at)
    new_coords = None
    if cfg["coord_columns"]:
        new_coords = coords_from_table(new_table, cfg["coord_columns"], path=args.at)
    new_X = covariates_from_table(new_table, cfg["x_columns"], path=args.at)
    new_groups = None
    if cfg["group_column"] and cfg["group_column"] in new_table:
        new_groups = new_table[cfg["group_column"]]
    n_new = len(next(iter(new_table.values())))
    new_design = est._design(new_X, n_new, new_coords)

    if structure is None:
        pred = new_design @ beta
    else:
        target = new_groups if (cfg["basis"] == "group" and not cfg["fixed_basis"]) else new_coords
        if target is None:
            raise UsageError("prediction needs the model's coordinate (or group) columns")
        pred = predict_mean(y, design, beta, structure, estimates["sigma2_eps"],
                            estimates["sigma2_alpha"], estimates["phi"],
                            new_design, target)

    names_out = list(cfg["coord_columns"]) + ["prediction"]
    columns = []
    if new_coords is not None:
        columns += [new_coords[:, j] for j in range(new_coords.shape[1])]
    else:
        names_out = ["prediction"]
    columns.append(pred)
    write_table(args.output, names_out, columns)
    return 0


def cmd_plot(args):
    payload = _load_fit_json(args.fit)
    table = read_table(args.input)
    cfg, est, y, coords, groups, design, structure, beta, estimates = _rebuild(payload, table)
    if coords is None or coords.shape[1] != 1:
        raise UsageError("plot supports models with 1-D coordinates")
    if cfg["basis"] == "group" and not cfg["fixed_basis"]:
        raise UsageError("plot does not support group-indicator random effects")

    grid = np.linspace(coords.min(), coords.max(), args.grid).reshape(-1, 1)
    components = []  # (label, values) pairs summing to the fitted curve

    # fixed-effect pieces, column by column when they are coordinate-derived
    col = 0
    has_intercept = est.fit_intercept and not (
        cfg["fixed_basis"] and cfg["basis"] == "shifted-quadratic")
    if has_intercept:
        components.append(("intercept", np.full(args.grid, beta[0])))
        col = 1
    for name in cfg["x_columns"]:
        if cfg["coord_columns"] and name == cfg["coord_columns"][0]:
            values = grid[:, 0]
        else:
            raise UsageError(
                f"covariate {name!r} is not coordinate-derived; plot cannot "
                "evaluate it between observations"
            )
        components.append((name, beta[col] * values))
        col += 1
    if cfg["fixed_basis"] and cfg["basis"] is not None:
        fixed_b = est._fixed_basis_expansion(coords)
        z_grid = fixed_b.evaluate(grid)
        if has_intercept and fixed_b.kind == "polynomial-power":
            z_grid = z_grid[:, 1:]
        for j in range(z_grid.shape[1]):
            components.append((f"basis{j + 1}", beta[col] * z_grid[:, j]))
            col += 1

    # random-effect pieces
    if structure is not None:
        s2e = estimates["sigma2_eps"]
        s2a = estimates["sigma2_alpha"]
        phi = estimates["phi"]
        if isinstance(structure, st.BasisStructure):
            from .mixedlm import blup_alpha

            alpha = blup_alpha(y, design, beta, structure, s2e, s2a, phi)
            z_grid = structure.basis(phi).evaluate(grid)
            for j in range(z_grid.shape[1]):
                components.append((f"z{j + 1}", alpha[j] * z_grid[:, j]))
        else:
            zero_X = np.zeros((args.grid, design.shape[1]))
            eta_grid = predict_mean(y, design, beta, structure, s2e, s2a, phi,
                                    zero_X, grid)
            components.append(("spatial-effect", eta_grid))

    if args.curves >= 0 and args.curves < len(components):
        order = np.argsort([-float(np.abs(v).max()) for _, v in components])
        keep = sorted(order[: args.curves])
        rest = [components[i][1] for i in range(len(components)) if i not in keep]
        kept = [components[i] for i in keep]
        if rest:
            kept.append(("remainder", np.sum(rest, axis=0)))
        components = kept

    fitted = np.sum([v for _, v in components], axis=0)
    svg = render_fit_figure(coords[:, 0], y, grid[:, 0], fitted, components,
                            title=args.title)
    try:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(svg)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {args.output}: {exc}") from exc
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="corrbasis",
        description="Basis-function and correlation-matrix modeling of "
                    "autocorrelated data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, output_help):
        p.add_argument("--input", required=True, help="input CSV (headered)")
        p.add_argument("--output", required=True, help=output_help)

    def add_columns(p):
        p.add_argument("--y", default="y", help="response column (default: y)")
        p.add_argument("--coords", default="coord",
                       help="comma-separated coordinate columns (default: coord)")
        p.add_argument("--x", default="", help="comma-separated covariate columns")
        p.add_argument("--group", default=None, help="group label column")

    p = sub.add_parser("simulate", help="write a synthetic dataset CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", choices=("ar1", "gaussian", "exponential"), default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--sigma2-eps", type=float, default=1.0)
    p.add_argument("--sigma2-alpha", type=float, default=1.0)
    p.add_argument("--beta", default="0", help="comma-separated coefficients, intercept first")
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--extent", type=float, default=10.0)
    p.add_argument("--trend", action="store_true",
                   help="use the coordinate as the single covariate")
    p.add_argument("--binary", action="store_true", help="draw 0/1 responses (probit)")
    p.add_argument("--n-groups", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decompose", help="eigen basis of a correlation matrix")
    add_io(p, "basis matrix CSV (eigenvalue summary goes to *.json)")
    p.add_argument("--coords", default="coord")
    p.add_argument("--family", choices=("ar1", "gaussian", "exponential"), required=True)
    p.add_argument("--phi", type=float, required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("fit", help="maximum-likelihood mixed-model fit")
    add_io(p, "fit summary JSON (per-row values go to *.fitted.csv)")
    add_columns(p)
    p.add_argument("--family", choices=("ar1", "gaussian", "exponential"), default=None)
    p.add_argument("--basis", choices=("eigen", "gauss-kernel", "uniform-kernel",
                                       "poly", "shifted-quadratic", "group", "pp"),
                   default=None)
    p.add_argument("--phi", type=float, default=None, help="fix the range parameter")
    p.add_argument("--knots", default=None, help="knot count or CSV of knot locations")
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--fixed-basis", action="store_true",
                   help="treat basis columns as fixed effects")
    p.add_argument("--no-nugget", action="store_true",
                   help="drop the independent error variance")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--max-lag", type=int, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fit-probit", help="Bayesian binary spatial regression")
    add_io(p, "posterior summary JSON (grid predictions go to *.pred.csv)")
    add_columns(p)
    p.add_argument("--family", choices=("ar1", "gaussian", "exponential"),
                   default="exponential")
    p.add_argument("--phi-grid", default=None, help="LO:HI:N grid for the range parameter")
    p.add_argument("--knots", default=None,
                   help="knot count or CSV; enables the reduced-rank model")
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--burn", type=int, default=2_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fix-sigma2-alpha", type=float, default=None)
    p.add_argument("--grid", type=int, default=32,
                   help="prediction grid resolution (0 to skip)")
    p.set_defaults(func=cmd_fit_probit)

    p = sub.add_parser("predict", help="predict from a saved fit at new locations")
    p.add_argument("--input", required=True, help="training CSV used for the fit")
    p.add_argument("--fit", required=True, help="fit summary JSON")
    p.add_argument("--at", required=True, help="CSV of new locations/covariates")
    p.add_argument("--output", required=True, help="prediction CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("plot", help="SVG figure of data, fit, and component curves")
    p.add_argument("--input", required=True, help="training CSV used for the fit")
    p.add_argument("--fit", required=True, help="fit summary JSON")
    p.add_argument("--output", required=True, help="SVG path")
    p.add_argument("--grid", type=int, default=200, help="curve sampling points")
    p.add_argument("--curves", type=int, default=-1,
                   help="component curves to draw (-1 for all; the rest are "
                        "aggregated so curves still sum to the fit)")
    p.add_argument("--title", default="")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SingularMatrixError, ConvergenceError, np.linalg.LinAlgError) as exc:
        # LinAlgError subclasses ValueError, so numerical failures go first
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


def entry_point():
    sys.exit(main())
