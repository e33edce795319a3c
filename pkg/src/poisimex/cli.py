"""Command-line front end.

Subcommands: ``fit`` (model fitting with or without the SIMEX correction),
``simulate`` (Monte Carlo studies from the scenario catalog or a spec
file), ``km`` (Kaplan-Meier curves and log-rank test), ``attenuation``
(closed-form naive-slope attenuation) and ``gen-synthetic`` (application-
shaped synthetic survival data).

Exit codes: 0 success, 1 validation error, 2 numerical failure.  Every
report is CSV plus a ``.provenance.txt`` side-car carrying the seed and a
hash of the resolved configuration; equal invocations produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np
from scipy.stats import norm

from . import __version__
from .catalog import catalog_names, load_study, parse_study_document
from .errors import (
    CorrectedMatrixError,
    ExtrapolantFitError,
    ExtrapolationPoleError,
    ParameterError,
    SchemaError,
    SimexReplicateError,
    SingularDesignError,
    VarianceDifferenceError,
)
from .estimators import AttenuationInputs, attenuation_factor, fit_aft_lognormal, fit_ols
from .harness import emit_table, run_study
from .io import InputSchema, read_dataset, read_table, write_csv
from .rng import RngStream
from .simex import SimexConfig, run_simex, simex_variance_bootstrap
from .survival import km_curve, logrank_test
from .synthetic import COLUMNS, generate_application_cohort

_NUMERIC_ERRORS = (
    SingularDesignError,
    CorrectedMatrixError,
    SimexReplicateError,
    VarianceDifferenceError,
    ExtrapolantFitError,
    ExtrapolationPoleError,
    np.linalg.LinAlgError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the interface reserves 2
    # for numerical failures, so remap to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._validation_exit(message))

    def _validation_exit(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return 1


def _config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_provenance(output_path, command, seed, payload):
    digest = _config_hash(payload)
    with open(str(output_path) + ".provenance.txt", "w", encoding="utf-8") as fh:
        fh.write(f"tool: poisimex {__version__}\n")
        fh.write(f"command: {command}\n")
        fh.write(f"seed: {seed}\n")
        fh.write(f"config_hash: {digest}\n")
        fh.write("config: " + json.dumps(payload, sort_keys=True) + "\n")
    return digest


def _fmt(value):
    return "" if value is None or not np.isfinite(value) else f"{value:.4f}"


def _wald_p(estimate, se):
    if se is None or not np.isfinite(se) or se <= 0:
        return None
    return float(2.0 * norm.sf(abs(estimate) / se))


def _simex_config_from_args(args) -> SimexConfig:
    grid = tuple(float(x) for x in args.lambda_grid.split(","))
    variance = {
        "difference": "difference-extrapolation",
        "bootstrap": "bootstrap",
        "none": "none",
    }[args.variance]
    return SimexConfig(
        lambda_grid=grid,
        b=args.simex_b,
        extrapolant=args.extrapolant,
        variance_method=variance,
        bootstrap_reps=args.bootstrap_reps,
        seed=args.seed,
    )


def _schema_from_args(args, survival: bool) -> InputSchema:
    covariates = tuple(c for c in (args.covariates or "").split(",") if c)
    return InputSchema(
        count=args.count,
        response=None if survival else args.response,
        time=args.time if survival else None,
        event=args.event if survival else None,
        area=args.area,
        area_value=args.area_value,
        covariates=covariates,
    )


def cmd_fit(args) -> int:
    survival = args.model == "aft"
    if survival and (args.time is None or args.event is None):
        raise SchemaError("aft model needs --time and --event bindings")
    if not survival and args.response is None:
        raise SchemaError("lm model needs a --response binding")
    schema = _schema_from_args(args, survival)
    dataset, _ = read_dataset(args.input, schema)

    if survival:
        naive = fit_aft_lognormal(dataset, "surrogate-density")
        fitter = "aft-lognormal"
    else:
        naive = fit_ols(dataset, "surrogate-density")
        fitter = "linear-model"

    param_names = naive.names + ("scale",)
    naive_est = np.concatenate([naive.coef, [naive.scale]])
    naive_se = np.sqrt(
        np.concatenate(
            [naive.coef_var, [np.nan if naive.scale_var is None else naive.scale_var]]
        )
    )

    boot_se = None
    if args.correction == "poi-simex":
        config = _simex_config_from_args(args)
        result = run_simex(dataset, fitter, config)
        simex_est = result.estimate
        simex_var = result.variance
        simex_se = None if simex_var is None else np.sqrt(simex_var)
        if args.with_bootstrap_se and config.variance_method != "bootstrap":
            boot_var = simex_variance_bootstrap(
                dataset, fitter, config, rng=RngStream(config.seed, ("cli-bootstrap",))
            )
            boot_se = np.sqrt(boot_var)
        elif config.variance_method == "bootstrap":
            boot_se = simex_se
    else:
        # no correction requested: the corrected columns restate the naive fit
        simex_est = naive_est
        simex_se = naive_se
        config = None

    header = (
        "parameter",
        "naive_estimate",
        "naive_se",
        "naive_p",
        "simex_estimate",
        "simex_se",
        "simex_se_bootstrap",
        "simex_p",
        "abs_rel_pct_change",
    )
    rows = []
    for j, name in enumerate(param_names):
        n_est, n_se = float(naive_est[j]), float(naive_se[j])
        s_est = float(simex_est[j])
        s_se = None if simex_se is None else float(simex_se[j])
        b_se = None if boot_se is None else float(boot_se[j])
        is_coef = name != "scale"
        rel = (
            100.0 * abs((s_est - n_est) / n_est) if n_est != 0 else None
        )
        rows.append(
            (
                name,
                _fmt(n_est),
                _fmt(n_se),
                _fmt(_wald_p(n_est, n_se)) if is_coef else "",
                _fmt(s_est),
                _fmt(s_se),
                _fmt(b_se),
                _fmt(_wald_p(s_est, s_se)) if is_coef and s_se is not None else "",
                _fmt(rel),
            )
        )
    write_csv(args.output, header, rows)

    payload = {
        "input": args.input,
        "model": args.model,
        "correction": args.correction,
        "schema": {
            "count": args.count,
            "response": args.response,
            "time": args.time,
            "event": args.event,
            "area": args.area,
            "area_value": args.area_value,
            "covariates": args.covariates,
        },
        "simex": None
        if config is None
        else {
            "lambda_grid": list(config.lambda_grid),
            "B": config.b,
            "extrapolant": config.extrapolant,
            "variance_method": config.variance_method,
            "bootstrap_reps": config.bootstrap_reps,
        },
        "seed": args.seed,
    }
    _write_provenance(args.output, "fit", args.seed, payload)

    if not naive.converged:
        print("warning: fit did not converge; report is partial", file=sys.stderr)
        return 2
    return 0


def cmd_simulate(args) -> int:
    methods = args.methods.split(",") if args.methods else None
    if args.spec_file:
        with open(args.spec_file, encoding="utf-8") as fh:
            doc = json.load(fh)
        spec = parse_study_document(
            doc,
            scenario_id=args.scenario or "spec-file",
            n=args.n,
            replicates=args.reps,
            seed=args.seed,
            methods=methods,
        )
    else:
        if not args.scenario:
            raise ParameterError(
                "give a scenario id or --spec-file; catalog entries: "
                + ", ".join(catalog_names())
            )
        spec = load_study(
            args.scenario, n=args.n, replicates=args.reps, seed=args.seed, methods=methods
        )

    summary = run_study(spec, workers=args.workers)
    report = emit_table(summary, format=args.format)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(report)

    payload = {
        "scenario_id": spec.scenario_id,
        "n": spec.scenario.n,
        "replicates": spec.replicates,
        "batches": spec.batches,
        "methods": list(spec.methods),
        "simex": {
            "lambda_grid": list(spec.simex.lambda_grid),
            "B": spec.simex.b,
            "extrapolant": spec.simex.extrapolant,
        },
        "spec_hash": summary.spec_hash,
    }
    _write_provenance(args.output, "simulate", spec.seed, payload)
    return 0


def _read_survival_columns(path, time_col, event_col, group_col):
    header, rows = read_table(path)
    index = {name: i for i, name in enumerate(header)}
    for name in filter(None, (time_col, event_col, group_col)):
        if name not in index:
            raise SchemaError(f"column {name!r} not found in header", line=1, column=name)
    times = np.empty(len(rows))
    events = np.empty(len(rows), dtype=int)
    groups = []
    for i, row in enumerate(rows):
        line = i + 2
        try:
            t = float(row[index[time_col]])
        except ValueError:
            raise SchemaError(
                f"expected a number, got {row[index[time_col]]!r}",
                line=line,
                column=time_col,
            ) from None
        if not t > 0:
            raise SchemaError(
                f"survival time must be positive, got {t}", line=line, column=time_col
            )
        times[i] = t
        e = row[index[event_col]].strip()
        if e not in ("0", "1"):
            raise SchemaError(
                f"event flag must be 0 or 1, got {e!r}", line=line, column=event_col
            )
        events[i] = int(e)
        groups.append(row[index[group_col]].strip() if group_col else "all")
    return times, events, groups


def _safe_label(label):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label) or "group"


def cmd_km(args) -> int:
    times, events, groups = _read_survival_columns(
        args.input, args.time, args.event, args.group
    )
    labels = sorted(set(groups))
    by_group = {
        label: (times[np.array(groups) == label], events[np.array(groups) == label])
        for label in labels
    }

    curve_header = ("time", "n_risk", "n_event", "survival", "lower95", "upper95")
    medians = {}
    for label in labels:
        curve = km_curve(*by_group[label])
        medians[label] = curve.median
        rows = [
            (
                repr(float(t)),
                str(int(nr)),
                str(int(ne)),
                f"{s:.6f}",
                f"{lo:.6f}",
                f"{hi:.6f}",
            )
            for t, nr, ne, s, lo, hi in zip(
                curve.times,
                curve.at_risk,
                curve.events,
                curve.survival,
                curve.lower95,
                curve.upper95,
            )
        ]
        write_csv(f"{args.output}.curve-{_safe_label(label)}.csv", curve_header, rows)

    stat = p = None
    if len(labels) >= 2:
        stat, p = logrank_test(by_group)
    else:
        print("warning: single group; log-rank test skipped", file=sys.stderr)

    report_path = f"{args.output}.logrank.csv"
    with open(report_path, "w", encoding="utf-8") as fh:
        if stat is not None:
            fh.write(f"# logrank_statistic={stat:.6f}\n")
            fh.write(f"# logrank_p={p:.6g}\n")
        fh.write("group,n,n_events,median\n")
        for label in labels:
            t, e = by_group[label]
            med = "" if medians[label] is None else repr(float(medians[label]))
            fh.write(f"{label},{t.size},{int(e.sum())},{med}\n")

    payload = {
        "input": args.input,
        "time": args.time,
        "event": args.event,
        "group": args.group,
        "groups": labels,
    }
    _write_provenance(args.output, "km", args.seed, payload)
    return 0


def cmd_attenuation(args) -> int:
    inputs = AttenuationInputs.from_gamma(args.shape, args.scale, args.area)
    omega = attenuation_factor(inputs)
    print(f"attenuation_factor: {omega:.6f}")
    print(
        f"naive slope for beta_x={args.beta_x:g}: {omega * args.beta_x:.6f} "
        f"(true density law Gamma(shape={args.shape:g}, scale={args.scale:g}), "
        f"area={args.area:g})"
    )
    return 0


def cmd_gen_synthetic(args) -> int:
    cohort = generate_application_cohort(n=args.n, seed=args.seed, beta_x=args.beta_x)
    write_csv(args.output, COLUMNS, list(cohort.rows()))
    payload = {
        "n": args.n,
        "beta_x": args.beta_x,
        "truth": cohort.truth,
        "censoring_observed": float(1.0 - cohort.dataset.event.mean()),
    }
    _write_provenance(args.output, "gen-synthetic", args.seed, payload)
    return 0


def _add_simex_flags(p):
    p.add_argument("--lambda-grid", default="0.5,1.0,1.5,2.0",
                   help="comma-separated positive noise levels")
    p.add_argument("--simex-b", type=int, default=100,
                   help="pseudo-replicates per lambda")
    p.add_argument("--extrapolant", default="quadratic",
                   choices=("linear", "quadratic", "nonlinear-rational"))
    p.add_argument("--variance", default="difference",
                   choices=("difference", "bootstrap", "none"))
    p.add_argument("--bootstrap-reps", type=int, default=200)
    p.add_argument("--with-bootstrap-se", action="store_true",
                   help="add a bootstrap SE column next to the primary SE")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="poisimex",
                     description="measurement-error-corrected regression for "
                                 "count-based biomarker densities")
    parser.add_argument("--version", action="version", version=f"poisimex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model with or without the SIMEX correction")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--model", required=True, choices=("lm", "aft"))
    p_fit.add_argument("--correction", default="none", choices=("none", "poi-simex"))
    p_fit.add_argument("--response", help="response column (lm)")
    p_fit.add_argument("--time", help="survival time column (aft)")
    p_fit.add_argument("--event", help="event flag column (aft)")
    p_fit.add_argument("--count", required=True, help="biomarker count column")
    p_fit.add_argument("--area", help="core area column")
    p_fit.add_argument("--area-value", type=float, help="constant core area")
    p_fit.add_argument("--covariates", help="comma-separated error-free covariates")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--output", required=True)
    _add_simex_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    p_sim.add_argument("scenario", nargs="?", help="catalog scenario id")
    p_sim.add_argument("--spec-file", help="JSON study specification")
    p_sim.add_argument("--n", type=int, help="sample size override")
    p_sim.add_argument("--reps", type=int, help="replicate count override")
    p_sim.add_argument("--seed", type=int, help="seed override")
    p_sim.add_argument("--methods", help="comma-separated method subset")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--format", default="csv", choices=("csv", "aligned-text"))
    p_sim.add_argument("--output", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_km = sub.add_parser("km", help="Kaplan-Meier curves and log-rank test")
    p_km.add_argument("--input", required=True)
    p_km.add_argument("--time", required=True)
    p_km.add_argument("--event", required=True)
    p_km.add_argument("--group")
    p_km.add_argument("--seed", type=int, default=0)
    p_km.add_argument("--output", required=True, help="output path prefix")
    p_km.set_defaults(func=cmd_km)

    p_att = sub.add_parser("attenuation", help="closed-form naive-slope attenuation")
    p_att.add_argument("--shape", type=float, required=True)
    p_att.add_argument("--scale", type=float, required=True)
    p_att.add_argument("--area", type=float, default=1.0)
    p_att.add_argument("--beta-x", type=float, default=1.0)
    p_att.set_defaults(func=cmd_attenuation)

    p_gen = sub.add_parser("gen-synthetic", help="application-shaped synthetic data")
    p_gen.add_argument("--n", type=int, default=716)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--beta-x", type=float, default=0.015)
    p_gen.add_argument("--output", required=True)
    p_gen.set_defaults(func=cmd_gen_synthetic)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    try:
        return args.func(args)
    except (SchemaError, ParameterError) as exc:
        print(f"poisimex: error: {exc}", file=sys.stderr)
        return 1
    except _NUMERIC_ERRORS as exc:
        print(f"poisimex: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
