"""Monte Carlo study runner.

Replicates are independent work items keyed by (scenario id, replicate
index), so a study gives identical results whether it runs serially or on
a process pool.  Summaries report the mean estimate, bias and MSE per
(parameter, method) with Monte Carlo standard errors from the batch-means
method.
"""

from __future__ import annotations

import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .estimators import fit_aft_lognormal, fit_corrected_lm, fit_ols
from .rng import RngStream
from .scenarios import ScenarioSpec, generate_dataset
from .simex import SimexConfig, run_simex

LM_METHODS = ("Adj-LM", "Naive-LM", "POI-SIMEX", "True-LM")
AFT_METHODS = ("Naive-AFT", "SIMEX-AFT", "True-AFT")
ALL_METHODS = LM_METHODS + AFT_METHODS
_CANONICAL = {m.lower(): m for m in ALL_METHODS}


def canonical_method(name: str) -> str:
    try:
        return _CANONICAL[name.strip().lower()]
    except KeyError:
        raise ParameterError(
            f"unknown method {name!r}; pick from {', '.join(ALL_METHODS)}"
        ) from None


@dataclass(frozen=True)
class StudySpec:
    """One Monte Carlo study: scenario, methods, replication plan."""

    scenario: ScenarioSpec
    methods: tuple
    replicates: int = 1000
    batches: int = 10
    simex: SimexConfig = field(default_factory=SimexConfig)
    seed: int = 0
    scenario_id: str = "scenario"

    def __post_init__(self):
        methods = tuple(canonical_method(m) for m in self.methods)
        object.__setattr__(self, "methods", methods)
        if self.replicates < 1:
            raise ParameterError("replicates must be >= 1")
        if self.batches < 2:
            raise ParameterError("at least 2 batches are required")
        if self.replicates % self.batches != 0:
            raise ParameterError(
                f"replicates ({self.replicates}) must be divisible by "
                f"batches ({self.batches})"
            )
        aft_scenario = self.scenario.response_kind == "lognormal-aft"
        for m in methods:
            if (m in AFT_METHODS) != aft_scenario:
                raise ParameterError(
                    f"method {m} does not match response kind "
                    f"{self.scenario.response_kind!r}"
                )


@dataclass
class SummaryRow:
    parameter: str
    method: str
    estimate: float
    mse: float
    mse_mcse: float
    bias: float
    bias_mcse: float
    n_excluded: int


@dataclass
class MCSummary:
    """Aggregated study results, one row per (parameter, method)."""

    rows: list
    seed: int
    spec_hash: str
    replicates: int
    scenario_id: str
    exclusions: dict

    def row(self, parameter, method) -> SummaryRow:
        for r in self.rows:
            if r.parameter == parameter and r.method == method:
                return r
        raise KeyError((parameter, method))


def batch_mean_mcse(per_replicate_values, batches: int):
    """Batch-means Monte Carlo standard error of a replicate-level mean.

    Partitions the values in replicate order into equal batches, takes the
    mean of each batch, and returns (batch means, sd(batch means)/sqrt(B)).
    """
    values = np.asarray(per_replicate_values, dtype=float)
    if batches < 2:
        raise ParameterError("at least 2 batches are required")
    if values.ndim != 1 or values.size % batches != 0:
        raise ParameterError(
            f"value count ({values.size}) must be divisible by batches ({batches})"
        )
    stats = values.reshape(batches, -1).mean(axis=1)
    mcse = float(np.std(stats, ddof=1) / np.sqrt(batches))
    return stats, mcse


def _nan_batch_mcse(values, batches):
    """Batch MCSE tolerating excluded (NaN) replicates within batches."""
    groups = np.asarray(values, dtype=float).reshape(batches, -1)
    with np.errstate(invalid="ignore"):
        stats = np.nanmean(groups, axis=1)
    stats = stats[np.isfinite(stats)]
    if stats.size < 2:
        return float("nan")
    return float(np.std(stats, ddof=1) / np.sqrt(stats.size))


def _scenario_params(spec: StudySpec):
    truth = spec.scenario.truth
    names = ["intercept", "x"]
    values = [truth.beta0, truth.beta_x]
    q = len(truth.beta_z)
    for j, b in enumerate(truth.beta_z):
        names.append("z" if q == 1 else f"z{j + 1}")
        values.append(b)
    if spec.scenario.response_kind == "lognormal-aft":
        names.append("scale")
        values.append(truth.sigma_eps)
    return tuple(names), dict(zip(names, values))


def _fit_one_method(method, dataset, spec, rep_stream):
    if method == "Naive-LM":
        return fit_ols(dataset, "surrogate-density").as_dict()
    if method == "True-LM":
        return fit_ols(dataset, "hidden-truth").as_dict()
    if method == "Adj-LM":
        return fit_corrected_lm(dataset).as_dict()
    if method == "POI-SIMEX":
        res = run_simex(dataset, "linear-model", spec.simex, rng=rep_stream.child("simex"))
        return dict(zip(res.param_names, res.estimate))
    if method == "Naive-AFT":
        fit = fit_aft_lognormal(dataset, "surrogate-density")
        return {**fit.as_dict(), "scale": fit.scale}
    if method == "True-AFT":
        fit = fit_aft_lognormal(dataset, "hidden-truth")
        return {**fit.as_dict(), "scale": fit.scale}
    if method == "SIMEX-AFT":
        res = run_simex(dataset, "aft-lognormal", spec.simex, rng=rep_stream.child("simex"))
        return dict(zip(res.param_names, res.estimate))
    raise ParameterError(f"unknown method {method!r}")


def _run_replicate(spec: StudySpec, r: int):
    """All requested fits for replicate r; failures come back as messages."""
    rep_stream = RngStream(spec.seed, (spec.scenario_id, r))
    dataset = generate_dataset(spec.scenario, rep_stream.child("data"))
    out = {}
    for method in spec.methods:
        try:
            out[method] = _fit_one_method(method, dataset, spec, rep_stream)
        except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            out[method] = str(exc)
    return out


def _replicate_worker(args):
    spec, r = args
    return _run_replicate(spec, r)


def spec_digest(spec) -> str:
    """Stable hash of a study/scenario specification."""
    blob = json.dumps(_jsonable(spec), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {
            "__type__": type(obj).__name__,
            **{k: _jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__},
        }
    if isinstance(obj, (tuple, list)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    return obj


def run_study(spec: StudySpec, workers: int = 1) -> MCSummary:
    """Run every replicate, fit every method, aggregate bias/MSE/MCSE.

    A method failure on one replicate excludes that replicate from the
    method's aggregates and is counted in the summary; other methods keep
    the replicate.
    """
    tasks = [(spec, r) for r in range(spec.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_worker, tasks, chunksize=8))
    else:
        results = [_run_replicate(spec, r) for r in range(spec.replicates)]

    param_names, truth = _scenario_params(spec)
    rows = []
    exclusions = {}
    for method in spec.methods:
        per_rep = {p: np.full(spec.replicates, np.nan) for p in param_names}
        failed = 0
        for r, res in enumerate(results):
            got = res[method]
            if isinstance(got, str):
                failed += 1
                continue
            for p in param_names:
                per_rep[p][r] = got[p]
        exclusions[method] = failed
        for p in param_names:
            values = per_rep[p]
            ok = np.isfinite(values)
            if not ok.any():
                rows.append(
                    SummaryRow(p, method, np.nan, np.nan, np.nan, np.nan, np.nan, failed)
                )
                continue
            err = values - truth[p]
            mean_est = float(np.mean(values[ok]))
            bias = float(np.mean(err[ok]))
            mse = float(np.mean(err[ok] ** 2))
            bias_mcse = _nan_batch_mcse(err, spec.batches)
            mse_mcse = _nan_batch_mcse(err**2, spec.batches)
            rows.append(
                SummaryRow(p, method, mean_est, mse, mse_mcse, bias, bias_mcse, failed)
            )

    return MCSummary(
        rows=rows,
        seed=spec.seed,
        spec_hash=spec_digest(spec),
        replicates=spec.replicates,
        scenario_id=spec.scenario_id,
        exclusions=exclusions,
    )


_CSV_HEADER = "parameter,method,estimate,mse,mse_mcse,bias,bias_mcse,n_excluded"


def emit_table(summary: MCSummary, format: str = "csv") -> str:
    """Render a summary as CSV or as paper-style aligned text.

    Numbers are written to 4 decimals.  The CSV carries the seed, the spec
    hash and per-method exclusion counts as leading comment lines.
    """
    if format == "csv":
        out = io.StringIO()
        out.write(f"# seed={summary.seed}\n")
        out.write(f"# spec_hash={summary.spec_hash}\n")
        out.write(f"# replicates={summary.replicates}\n")
        excl = ", ".join(f"{m}={c}" for m, c in summary.exclusions.items())
        out.write(f"# excluded: {excl}\n")
        out.write(_CSV_HEADER + "\n")
        for r in summary.rows:
            out.write(
                f"{r.parameter},{r.method},{r.estimate:.4f},{r.mse:.4f},"
                f"{r.mse_mcse:.4f},{r.bias:.4f},{r.bias_mcse:.4f},{r.n_excluded}\n"
            )
        return out.getvalue()
    if format == "aligned-text":
        header = ("parameter", "method", "estimate", "mse(mcse)", "bias(mcse)", "excl")
        lines = [
            (
                r.parameter,
                r.method,
                f"{r.estimate:.4f}",
                f"{r.mse:.4f}({r.mse_mcse:.4f})",
                f"{r.bias:.4f}({r.bias_mcse:.4f})",
                str(r.n_excluded),
            )
            for r in summary.rows
        ]
        widths = [max(len(h), *(len(l[i]) for l in lines)) if lines else len(h)
                  for i, h in enumerate(header)]
        def fmt(row):
            return "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
        text = [fmt(header), fmt(tuple("-" * w for w in widths))]
        text += [fmt(l) for l in lines]
        text.append("")
        text.append(f"seed={summary.seed}  spec_hash={summary.spec_hash}  "
                    f"replicates={summary.replicates}")
        return "\n".join(text) + "\n"
    raise ParameterError(f"unknown table format: {format!r}")


def parse_table(text: str):
    """Parse ``emit_table`` CSV output back into summary rows."""
    rows = []
    for line in text.splitlines():
        if not line or line.startswith("#") or line == _CSV_HEADER:
            continue
        parts = line.split(",")
        rows.append(
            SummaryRow(
                parameter=parts[0],
                method=parts[1],
                estimate=float(parts[2]),
                mse=float(parts[3]),
                mse_mcse=float(parts[4]),
                bias=float(parts[5]),
                bias_mcse=float(parts[6]),
                n_excluded=int(parts[7]),
            )
        )
    return rows
