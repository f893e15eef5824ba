"""Command-line interface: fit, simulate, mp, and weights subcommands.

Results are emitted as line-delimited JSON records by default (one record per
result) for scriptability; ``--format table`` renders them as aligned
key/value text.  Exit codes: 0 on success, 2 on usage errors, 1 on data or
solver errors (the error record on stderr carries a machine-readable
category).
"""

import argparse
import json
import os
import sys

import numpy as np

from . import dataio
from .core_model import (
    CovarianceSpec,
    Dataset,
    spectral_decompose,
    split_sample,
    standardize_columns,
    whiten,
)
from .errors import EigenPrismError
from .estimators import (
    REGRESSION_ERROR,
    SIGMA_SQUARED,
    SNR,
    THETA_SQUARED,
    EigenPrismOptions,
    bootstrap_t1_interval,
    eigenprism_with_solution,
    regression_error_interval,
    snr_interval,
    t1_interval,
    two_step_interval,
)
from .mp_tools import are_upper_bound, mp_model
from .sim_harness import (
    BETA_FAMILIES,
    DESIGN_FAMILIES,
    METHODS,
    SimulationScenario,
    run_scenario,
)
from .weight_solver import ConstraintSet, solve_minmax, solve_weighted_quadratic

_TARGET_CHOICES = {"theta2": THETA_SQUARED, "sigma2": SIGMA_SQUARED,
                   "snr": SNR, "error": REGRESSION_ERROR}


def _emit(records, fmt, out):
    if fmt == "jsonl":
        for rec in records:
            out.write(json.dumps(rec) + "\n")
        return
    for rec in records:
        for key, value in rec.items():
            if isinstance(value, list):
                value = " ".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in value)
            out.write(f"{key}\t{value}\n")
        out.write("\n")


def _interval_record(est, **extra):
    rec = {
        "estimand": est.estimand,
        "point": est.point,
        "lower": est.lower,
        "upper": est.upper,
        "alpha": est.alpha,
        "sd_bound": est.sd_bound,
        "clipped_lower": est.clipped_lower,
        "clipped_upper": est.clipped_upper,
    }
    rec.update(extra)
    return rec


def _solution_diagnostics(sol):
    return {
        "objective": sol.objective,
        "delta": sol.delta,
        "kappa1": sol.kappa1,
        "kappa2": sol.kappa2,
    }


def _add_output_flags(sub):
    sub.add_argument("--format", choices=("jsonl", "table"), default="jsonl")
    sub.add_argument("--output", help="write records here instead of stdout")
    sub.add_argument("--verbose", "-v", action="store_true")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="eigenprism",
        description="Confidence intervals for signal magnitude, noise level, "
        "SNR, and regression error in p > n linear models.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="estimate from a dataset on disk")
    fit.add_argument("--design", required=True, help="delimited design matrix")
    fit.add_argument("--response", help="single-column response file")
    fit.add_argument("--response-col", help="response column name inside the design file")
    fit.add_argument("--target", choices=sorted(_TARGET_CHOICES), default="theta2")
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument("--sigma2", type=float, help="known noise level: use the exact chi-square interval")
    fit.add_argument("--bootstrap", type=int, metavar="B",
                     help="with --sigma2: BCa bootstrap with B resamples")
    fit.add_argument("--seed", type=int, default=0, help="bootstrap / split seed")
    fit.add_argument("--two-step", action="store_true")
    fit.add_argument("--zero-first", type=int, default=0, metavar="K")
    fit.add_argument("--keep-null-eigenvalues", action="store_true",
                     help="do not pin weights on zero eigenvalues")
    fit.add_argument("--covariance", help="explicit column covariance matrix file")
    fit.add_argument("--beta-hat", help="coefficient estimate file (error target)")
    fit.add_argument("--subset", help="0-based coefficient indices file (error target)")
    fit.add_argument("--standardize", action="store_true",
                     help="standardize design columns to mean 0, variance 1")
    fit.add_argument("--split", type=float, metavar="FRACTION",
                     help="estimate on the second part of a deterministic row split")
    fit.add_argument("--standardize-order", choices=("before", "after"), default="after",
                     help="standardize before or after the split (with --split)")
    _add_output_flags(fit)

    sim = subs.add_parser("simulate", help="Monte-Carlo coverage experiment")
    sim.add_argument("--config", help="JSON file with scenario fields")
    sim.add_argument("--n", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--theta2", type=float)
    sim.add_argument("--sigma2", type=float)
    sim.add_argument("--rho", type=float, help="signal fraction (with --total-variance)")
    sim.add_argument("--total-variance", type=float, help="theta2 + sigma2 (with --rho)")
    sim.add_argument("--rho-grid", help="comma-separated signal fractions: one record per cell")
    sim.add_argument("--n-grid", help="comma-separated sample sizes: one record per cell")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--design", choices=DESIGN_FAMILIES)
    sim.add_argument("--design-param", type=float)
    sim.add_argument("--beta-family", choices=BETA_FAMILIES)
    sim.add_argument("--beta-param", type=float)
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--target", choices=("theta2", "sigma2", "snr"))
    sim.add_argument("--method", choices=METHODS)
    sim.add_argument("--bootstrap-b", type=int)
    sim.add_argument("--two-step", action="store_true")
    sim.add_argument("--zero-first", type=int)
    sim.add_argument("--allow-failures", action="store_true")
    sim.add_argument("--threads", type=int,
                     default=int(os.environ.get("EIGENPRISM_THREADS", "1")))
    _add_output_flags(sim)

    mp = subs.add_parser("mp", help="Marchenko-Pastur constants")
    mp.add_argument("--gamma", type=float)
    mp.add_argument("--are-curve", action="store_true",
                    help="emit a gamma-grid table of constants and width bounds")
    mp.add_argument("--gamma-min", type=float, default=0.05)
    mp.add_argument("--gamma-max", type=float, default=0.95)
    mp.add_argument("--gamma-steps", type=int, default=19)
    mp.add_argument("--empirical-n", type=int, metavar="N",
                    help="also solve the weight program on a sampled spectrum "
                    "of this size and report sqrt(N * objective), the "
                    "solver-based width ratio the closed-form bound dominates")
    _add_output_flags(mp)

    wts = subs.add_parser("weights", help="solve the weight program directly")
    src = wts.add_mutually_exclusive_group(required=True)
    src.add_argument("--eigenvalues", metavar="FILE",
                     help="eigenvalue vector file (sorted non-increasing internally)")
    src.add_argument("--design", metavar="FILE", help="compute eigenvalues from a design matrix")
    wts.add_argument("--target", choices=("theta2", "sigma2"), default="theta2")
    wts.add_argument("--zero-first", type=int, default=0, metavar="K")
    wts.add_argument("--zero-last", type=int, default=0, metavar="K")
    wts.add_argument("--two-step-rho", type=float, metavar="R",
                     help="solve the rho-weighted quadratic instead of the min-max")
    _add_output_flags(wts)

    return parser


def _cmd_fit(args, parser):
    if args.target != "theta2" and args.sigma2 is not None:
        parser.error("--sigma2 applies only to --target theta2")
    if args.bootstrap is not None and args.sigma2 is None:
        parser.error("--bootstrap requires --sigma2")
    if args.two_step and args.sigma2 is not None:
        parser.error("--two-step does not apply to the known-noise path")
    if args.target == "error" and not args.beta_hat:
        parser.error("--target error requires --beta-hat")
    if args.subset and args.target != "error":
        parser.error("--subset applies only to --target error")
    if args.response is None and args.response_col is None:
        parser.error("provide --response or --response-col")

    data = dataio.load_dataset(args.design, args.response, args.response_col)
    if args.split is not None:
        if args.standardize and args.standardize_order == "before":
            data = standardize_columns(data)
        _, data = split_sample(data, args.split, args.seed)
        if args.standardize and args.standardize_order == "after":
            data = standardize_columns(data)
    elif args.standardize:
        data = standardize_columns(data)

    cov = CovarianceSpec.identity()
    if args.covariance:
        cov = CovarianceSpec.explicit(dataio.load_matrix(args.covariance))

    opts = EigenPrismOptions(
        zero_first=args.zero_first,
        zero_last_if_null=not args.keep_null_eigenvalues,
        alpha=args.alpha,
        two_step=args.two_step,
    )
    extra = {"n": data.n, "p": data.p}

    if args.sigma2 is not None:
        if args.bootstrap is not None:
            est = bootstrap_t1_interval(data.y, args.sigma2, args.alpha,
                                        B=args.bootstrap, seed=args.seed)
            return [_interval_record(est, method="t1-bootstrap", B=args.bootstrap, **extra)]
        est = t1_interval(data.y, args.sigma2, args.alpha)
        return [_interval_record(est, method="t1", **extra)]

    if args.target == "error":
        beta_hat = dataio.load_vector(args.beta_hat)
        subset = dataio.load_index_set(args.subset) if args.subset else None
        est = regression_error_interval(data, beta_hat, subset=subset, cov=cov, opts=opts)
        return [_interval_record(est, method="eigenprism", **extra)]

    spec = spectral_decompose(whiten(data, cov))
    if args.target == "snr":
        est = snr_interval(spec, opts)
        return [_interval_record(est, method="eigenprism", **extra)]
    target = _TARGET_CHOICES[args.target]
    if args.two_step:
        est = two_step_interval(spec, target, opts)
        return [_interval_record(est, method="two-step", **extra)]
    est, sol = eigenprism_with_solution(spec, target, opts)
    return [_interval_record(est, method="eigenprism", **extra,
                             **_solution_diagnostics(sol))]


def _cmd_simulate(args, parser):
    fields = {}
    if args.config:
        with open(args.config) as fh:
            fields.update(json.load(fh))
    if args.rho is not None or args.total_variance is not None:
        if args.rho is None or args.total_variance is None:
            parser.error("--rho and --total-variance must be given together")
        if args.theta2 is not None or args.sigma2 is not None:
            parser.error("--rho/--total-variance conflict with --theta2/--sigma2")
        fields["theta2"] = args.rho * args.total_variance
        fields["sigma2"] = (1.0 - args.rho) * args.total_variance
    # explicit flags take precedence over config values
    for name in ("n", "p", "theta2", "sigma2", "trials", "seed", "design",
                 "design_param", "beta_family", "beta_param", "alpha", "target",
                 "method", "bootstrap_b"):
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    fields.setdefault("trials", 1000)
    fields.setdefault("seed", 0)
    if fields.get("n") is None or fields.get("p") is None:
        parser.error("--n and --p are required (or supply --config)")
    if fields.get("theta2") is None or fields.get("sigma2") is None:
        parser.error("supply --theta2/--sigma2 or --rho/--total-variance")
    fields["target"] = _TARGET_CHOICES.get(fields.get("target", "theta2"),
                                           fields.get("target"))
    config_zero_first = int(fields.pop("zero_first", 0))
    config_two_step = bool(fields.pop("two_step", False))
    options = EigenPrismOptions(
        zero_first=args.zero_first if args.zero_first is not None else config_zero_first,
        alpha=fields.get("alpha", 0.05),
        two_step=args.two_step or config_two_step,
    )

    # grid sweeps cross the base scenario and emit one record per cell
    total = fields["theta2"] + fields["sigma2"]
    rho_values = [fields["theta2"] / total]
    if args.rho_grid:
        rho_values = [float(v) for v in args.rho_grid.split(",")]
    n_values = [fields["n"]]
    if args.n_grid:
        n_values = [int(v) for v in args.n_grid.split(",")]

    records = []
    for n_cell in n_values:
        for rho_cell in rho_values:
            cell = dict(fields)
            cell["n"] = n_cell
            cell["theta2"] = rho_cell * total
            cell["sigma2"] = (1.0 - rho_cell) * total
            scenario = SimulationScenario(options=options, **cell)
            report = run_scenario(scenario, threads=max(args.threads, 1),
                                  allow_failures=args.allow_failures)
            records.append({
                "n": scenario.n,
                "p": scenario.p,
                "design": scenario.design,
                "beta_family": scenario.beta_family,
                "theta2": scenario.theta2,
                "sigma2": scenario.sigma2,
                "rho": scenario.rho,
                "target": scenario.target,
                "method": scenario.method,
                "alpha": scenario.alpha,
                "trials": scenario.trials,
                "seed": scenario.seed,
                "two_step": scenario.options.two_step,
                "empirical_coverage": report.empirical_coverage,
                "mean_width": report.mean_width,
                "mean_point": report.mean_point,
                "se_coverage": report.se_coverage,
                "failure_count": report.failure_count,
            })
    return records


def _mp_record(gamma, empirical_n=None):
    model = mp_model(gamma)
    rec = {
        "gamma": model.gamma,
        "support_lo": model.support_lo,
        "support_hi": model.support_hi,
        "median": model.median,
        "A": model.A,
        "B": model.B,
        "are_bound": are_upper_bound(gamma),
    }
    if empirical_n is not None:
        n = empirical_n
        p = max(int(round(n / gamma)), n)
        rng = np.random.default_rng((1_000_003, int(round(1e6 * gamma)), n))
        x = rng.standard_normal((n, p))
        lam = np.sort(np.linalg.eigvalsh(x @ x.T / p))[::-1]
        sol = solve_minmax(lam, ConstraintSet.for_theta2())
        rec["are_empirical"] = float(np.sqrt(n * sol.objective))
        rec["empirical_n"] = n
    return rec


def _cmd_mp(args, parser):
    if args.gamma is None and not args.are_curve:
        parser.error("provide --gamma or --are-curve")
    records = []
    if args.gamma is not None:
        records.append(_mp_record(args.gamma, args.empirical_n))
    if args.are_curve:
        for g in np.linspace(args.gamma_min, args.gamma_max, args.gamma_steps):
            records.append(_mp_record(float(g), args.empirical_n))
    return records


def _cmd_weights(args, parser):
    if args.eigenvalues:
        lam = np.sort(dataio.load_vector(args.eigenvalues))[::-1]
    else:
        table = dataio.load_matrix(args.design)
        dummy_y = np.zeros(table.shape[0])
        lam = spectral_decompose(Dataset(table, dummy_y)).lam
    n = lam.size
    if args.zero_first < 0 or args.zero_last < 0:
        parser.error("--zero-first/--zero-last must be non-negative")
    forced = set(range(args.zero_first)) | set(range(n - args.zero_last, n))
    make = (ConstraintSet.for_theta2 if args.target == "theta2"
            else ConstraintSet.for_sigma2)
    constraints = make(forced)
    if args.two_step_rho is not None:
        rho = args.two_step_rho
        if not 0.0 <= rho <= 1.0:
            parser.error("--two-step-rho must lie in [0, 1]")
        cvec = np.maximum((lam * rho + 1.0 - rho) ** 2, 1e-12)
        sol = solve_weighted_quadratic(lam, cvec, constraints)
        mode = "quadratic"
    else:
        sol = solve_minmax(lam, constraints)
        mode = "minmax"
    rec = {"target": args.target, "mode": mode, "n": int(n)}
    rec.update(_solution_diagnostics(sol))
    rec["w"] = [float(v) for v in sol.w]
    return [rec]


def run_cli(argv) -> int:
    """Parse argv, run a subcommand, emit records; returns the exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "fit": _cmd_fit,
        "simulate": _cmd_simulate,
        "mp": _cmd_mp,
        "weights": _cmd_weights,
    }[args.command]
    try:
        records = handler(args, parser)
    except EigenPrismError as exc:
        sys.stderr.write(json.dumps({"error": exc.category, "message": str(exc)}) + "\n")
        return 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    if args.output:
        with open(args.output, "w") as fh:
            _emit(records, args.format, fh)
    else:
        _emit(records, args.format, sys.stdout)
    return 0


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
