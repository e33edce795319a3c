"""Simulation-extrapolation for conditionally Poisson surrogate densities.

The procedure: estimate each unit's measurement-error variance from the
observed counts alone (``estimate_sigma``: sigma_i^2 = Vbar / A_i, strongly
consistent under the Poisson count law), simulate pseudo data with inflated
noise over a grid of lambda values, refit at each level, fit an extrapolant
to the estimate-versus-lambda curve and evaluate it at lambda = -1, where
the total measurement-error variance sigma_i^2 (1 + lambda) vanishes.

Two variance estimators are provided: extrapolating the difference between
model-based and sampling variances of the per-lambda estimates, and a
nonparametric case-resampling bootstrap over the whole procedure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .data import Dataset
from .errors import (
    ExtrapolantFitError,
    ExtrapolationPoleError,
    ParameterError,
    SimexReplicateError,
    VarianceDifferenceError,
)
from .estimators import ModelFit, aft_warm_start, fit_aft_lognormal, fit_ols
from .rng import RngStream

_EXTRAPOLANT_ARITY = {"linear": 2, "quadratic": 3, "nonlinear-rational": 3}
_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class SimexConfig:
    """Tuning knobs for one SIMEX run.

    ``lambda_grid`` holds the positive noise levels; the lambda = 0 anchor
    is implicit and always taken from the plain fit of the unperturbed
    data.  ``b`` is the number of pseudo-replicates per level.
    """

    lambda_grid: tuple = (0.5, 1.0, 1.5, 2.0)
    b: int = 100
    extrapolant: str = "quadratic"
    variance_method: str = "none"
    bootstrap_reps: int = 200
    seed: int = 0

    def __post_init__(self):
        grid = tuple(float(l) for l in self.lambda_grid)
        object.__setattr__(self, "lambda_grid", grid)
        if not grid or any(l <= 0 for l in grid):
            raise ParameterError("lambda grid entries must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ParameterError("lambda grid must be strictly ascending")
        if self.b < 2:
            raise ParameterError("at least 2 pseudo-replicates per lambda are required")
        if self.extrapolant not in _EXTRAPOLANT_ARITY:
            raise ParameterError(f"unknown extrapolant: {self.extrapolant!r}")
        if len(grid) + 1 < _EXTRAPOLANT_ARITY[self.extrapolant]:
            raise ParameterError(
                f"{self.extrapolant} extrapolant needs at least "
                f"{_EXTRAPOLANT_ARITY[self.extrapolant]} lambda points including the anchor"
            )
        if self.variance_method not in ("none", "difference-extrapolation", "bootstrap"):
            raise ParameterError(f"unknown variance method: {self.variance_method!r}")
        if self.bootstrap_reps < 2:
            raise ParameterError("bootstrap needs at least 2 resamples")


@dataclass
class SimexResult:
    """Everything produced by one SIMEX run.

    Row 0 of the per-lambda arrays is the lambda = 0 anchor and equals the
    naive fit exactly.  Parameters are the regression coefficients plus the
    residual scale as the last entry.
    """

    param_names: tuple
    lambdas: np.ndarray
    per_lambda_mean: np.ndarray
    per_lambda_var_sampling: np.ndarray
    per_lambda_var_model: np.ndarray
    extrapolant_fits: list
    estimate: np.ndarray
    variance: np.ndarray | None
    sigma: np.ndarray
    naive_fit: ModelFit
    n_failed: np.ndarray
    config: SimexConfig

    def __getitem__(self, name):
        return float(self.estimate[self.param_names.index(name)])

    def variance_of(self, name):
        if self.variance is None:
            raise ParameterError("no variance was requested for this run")
        return float(self.variance[self.param_names.index(name)])


def estimate_sigma(dataset: Dataset) -> np.ndarray:
    """Per-unit measurement-error variance estimates Vbar / A_i.

    Strongly consistent for Var[W_i/A_i - X_i] under the conditionally
    Poisson count law, using only the single observed replicate.
    """
    vbar = float(np.mean(dataset.w / dataset.a))
    return vbar / dataset.a


def generate_pseudo_dataset(dataset: Dataset, lam: float, sigma, rng: RngStream) -> Dataset:
    """Copy of the dataset with sqrt(lambda) * sigma_i * U_i added to the density.

    U_i are i.i.d. standard normal.  Perturbed densities may be negative;
    no truncation is applied (the consistency argument needs untruncated
    Gaussian pseudo errors).
    """
    if lam < 0:
        raise ParameterError(f"lambda must be non-negative, got {lam}")
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (dataset.n,))
    if np.any(sigma < 0):
        raise ParameterError("sigma entries must be non-negative")
    u = rng.generator().standard_normal(dataset.n)
    v = dataset.densities + np.sqrt(lam) * sigma * u
    return dataset.with_densities(v)


@dataclass(frozen=True)
class ExtrapolantCurve:
    """Fitted extrapolant: curve kind plus its coefficients."""

    kind: str
    coef: tuple

    def __call__(self, lam):
        return extrapolate(self, lam)


def fit_extrapolant(points, kind: str = "quadratic") -> ExtrapolantCurve:
    """Least-squares fit of value(lambda) for one parameter.

    ``points`` are (lambda, value) pairs including the lambda = 0 anchor.
    Kinds: ``linear`` c0 + c1*l, ``quadratic`` c0 + c1*l + c2*l^2, and
    ``nonlinear-rational`` c0 + c1/(c2 + l) fitted by nonlinear least
    squares (the shape of the exact large-sample estimate curve).
    """
    if kind not in _EXTRAPOLANT_ARITY:
        raise ParameterError(f"unknown extrapolant: {kind!r}")
    pts = [(float(l), float(v)) for l, v in points]
    lams = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])
    arity = _EXTRAPOLANT_ARITY[kind]
    if np.unique(lams).size < arity:
        raise ParameterError(
            f"{kind} extrapolant needs at least {arity} distinct lambda values, "
            f"got {np.unique(lams).size}"
        )

    if kind == "linear":
        c = np.polynomial.polynomial.polyfit(lams, vals, 1)
        return ExtrapolantCurve(kind, (float(c[0]), float(c[1])))
    if kind == "quadratic":
        c = np.polynomial.polynomial.polyfit(lams, vals, 2)
        return ExtrapolantCurve(kind, (float(c[0]), float(c[1]), float(c[2])))
    return _fit_rational(lams, vals)


def _rational_init(lams, vals):
    """Closed-form pass through three spread-out points, with guards."""
    spread = float(vals.max() - vals.min())
    if spread < 1e-12 * max(1.0, float(np.abs(vals).max())):
        return np.array([float(vals.mean()), 0.0, 1.0 + lams.max()])
    i, j, k = 0, len(lams) // 2, len(lams) - 1
    l1, l2, l3 = lams[i], lams[j], lams[k]
    y1, y2, y3 = vals[i], vals[j], vals[k]
    d12, d23 = y1 - y2, y2 - y3
    if abs(d23) > 1e-300:
        ratio = d12 / d23
        denom = (l2 - l1) - ratio * (l3 - l2)
        if abs(denom) > 1e-12:
            c2 = (ratio * (l3 - l2) * l1 - (l2 - l1) * l3) / denom
            if np.isfinite(c2) and all(abs(c2 + l) > 1e-9 for l in (l1, l2, l3)):
                c1 = d12 * (c2 + l1) * (c2 + l2) / (l2 - l1)
                c0 = y1 - c1 / (c2 + l1)
                return np.array([c0, c1, c2])
    # fall back to a generic start past the grid
    c2 = 1.0 + lams.max()
    c1 = (vals[0] - vals[-1]) * (c2 + lams[0]) * (c2 + lams[-1]) / (lams[-1] - lams[0] + 1e-12)
    c0 = vals[-1] - c1 / (c2 + lams[-1])
    return np.array([c0, c1, c2])


def _fit_rational(lams, vals) -> ExtrapolantCurve:
    start = _rational_init(lams, vals)
    if np.allclose(start[1], 0.0):
        return ExtrapolantCurve("nonlinear-rational", tuple(float(c) for c in start))

    def resid(c):
        return c[0] + c[1] / (c[2] + lams) - vals

    sol = least_squares(resid, start, method="lm", max_nfev=2000)
    good = sol.success and np.all(np.abs(sol.x[2] + lams) > 1e-9)
    if not good:
        lin = fit_extrapolant(list(zip(lams, vals)), "linear")
        raise ExtrapolantFitError(
            "nonlinear rational extrapolant did not converge; a linear fallback "
            "fit is attached",
            fallback=lin,
        )
    return ExtrapolantCurve("nonlinear-rational", tuple(float(c) for c in sol.x))


def extrapolate(curve: ExtrapolantCurve, lam: float = -1.0) -> float:
    """Evaluate a fitted extrapolant, by default at lambda = -1."""
    c = curve.coef
    if curve.kind == "linear":
        return c[0] + c[1] * lam
    if curve.kind == "quadratic":
        return c[0] + c[1] * lam + c[2] * lam**2
    if curve.kind == "nonlinear-rational":
        if c[1] == 0.0:
            return c[0]
        denom = c[2] + lam
        if abs(denom) < 1e-12:
            raise ExtrapolationPoleError(
                f"rational extrapolant has a pole at lambda = {lam} (c2 = {c[2]})"
            )
        return c[0] + c[1] / denom
    raise ParameterError(f"unknown extrapolant: {curve.kind!r}")


def _resolve_fitter(fitter, need_model_var):
    """Map a fitter name to (anchor_fit, pseudo_fit) callables.

    Custom callables taking a dataset and returning a ModelFit are accepted
    as-is, which is what lets the procedure wrap any regression model.
    """
    if callable(fitter):
        return fitter, lambda ds, warm: fitter(ds)
    if fitter == "linear-model":
        return (
            lambda ds: fit_ols(ds, "surrogate-density"),
            lambda ds, warm: fit_ols(ds, "surrogate-density"),
        )
    if fitter == "aft-lognormal":
        return (
            lambda ds: fit_aft_lognormal(ds, "surrogate-density"),
            lambda ds, warm: fit_aft_lognormal(
                ds, "surrogate-density", init=warm, with_variances=need_model_var
            ),
        )
    raise ParameterError(f"unknown fitter: {fitter!r}")


def _param_vector(fit: ModelFit):
    values = np.concatenate([fit.coef, [fit.scale]])
    model_var = np.concatenate(
        [fit.coef_var, [np.nan if fit.scale_var is None else fit.scale_var]]
    )
    return values, model_var


def run_simex(
    dataset: Dataset,
    fitter="linear-model",
    config: SimexConfig = SimexConfig(),
    rng: RngStream | None = None,
    sigma=None,
) -> SimexResult:
    """Full SIMEX pass: simulate, refit, extrapolate to lambda = -1.

    Parameters
    ----------
    dataset : the observed data.
    fitter : ``"linear-model"``, ``"aft-lognormal"``, or any callable
        mapping a dataset to a :class:`ModelFit`.
    config : grid, replicate count, extrapolant and variance choices.
    rng : stream for the pseudo-noise draws; defaults to a stream derived
        from ``config.seed``.  Each (lambda, b) cell uses its own child
        stream, so results do not depend on execution order.
    sigma : per-unit error variances; estimated from the counts when None.
        Passing zeros reproduces the no-measurement-error identity, and
        passing known variances matches the known-sigma consistency setup.

    Individual pseudo-fit failures are dropped and counted; more than 10%
    failures at any lambda aborts the run.
    """
    if rng is None:
        rng = RngStream(config.seed, ("simex",))
    need_model_var = config.variance_method == "difference-extrapolation"
    anchor_fit, pseudo_fit = _resolve_fitter(fitter, need_model_var)

    sigma = estimate_sigma(dataset) if sigma is None else np.asarray(sigma, dtype=float)
    sigma = np.broadcast_to(sigma, (dataset.n,))

    naive = anchor_fit(dataset)
    if not naive.converged:
        raise SimexReplicateError("the lambda = 0 anchor fit did not converge")
    anchor_values, anchor_model_var = _param_vector(naive)
    names = tuple(naive.names) + ("scale",)
    n_params = anchor_values.size
    warm = aft_warm_start(naive) if fitter == "aft-lognormal" else None

    grid = config.lambda_grid
    lambdas = np.array((0.0,) + grid)
    means = np.empty((len(lambdas), n_params))
    var_sampling = np.zeros((len(lambdas), n_params))
    var_model = np.empty((len(lambdas), n_params))
    means[0] = anchor_values
    var_model[0] = anchor_model_var
    n_failed = np.zeros(len(lambdas), dtype=int)

    for li, lam in enumerate(grid, start=1):
        draws = []
        model_vars = []
        failures = []
        for b in range(config.b):
            pseudo = generate_pseudo_dataset(
                dataset, lam, sigma, rng.child("pseudo", li, b)
            )
            try:
                fit = pseudo_fit(pseudo, warm)
            except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
                failures.append(str(exc))
                continue
            if not fit.converged:
                failures.append("pseudo-fit did not converge")
                continue
            values, mv = _param_vector(fit)
            draws.append(values)
            model_vars.append(mv)
        n_failed[li] = len(failures)
        if len(failures) > _FAILURE_FRACTION * config.b:
            raise SimexReplicateError(
                f"{len(failures)}/{config.b} pseudo-fits failed at lambda = {lam} "
                f"(first failure: {failures[0]})"
            )
        draws = np.asarray(draws)
        means[li] = draws.mean(axis=0)
        var_sampling[li] = draws.var(axis=0, ddof=1)
        var_model[li] = np.asarray(model_vars).mean(axis=0)

    curves = []
    estimate = np.empty(n_params)
    for j in range(n_params):
        curve = fit_extrapolant(list(zip(lambdas, means[:, j])), config.extrapolant)
        curves.append(curve)
        estimate[j] = extrapolate(curve, -1.0)
    if not np.all(np.isfinite(estimate)):
        raise SimexReplicateError("extrapolated estimate is not finite")

    result = SimexResult(
        param_names=names,
        lambdas=lambdas,
        per_lambda_mean=means,
        per_lambda_var_sampling=var_sampling,
        per_lambda_var_model=var_model,
        extrapolant_fits=curves,
        estimate=estimate,
        variance=None,
        sigma=np.array(sigma),
        naive_fit=naive,
        n_failed=n_failed,
        config=config,
    )
    if config.variance_method == "difference-extrapolation":
        result.variance = simex_variance_difference(result, config)
    elif config.variance_method == "bootstrap":
        result.variance = simex_variance_bootstrap(
            dataset, fitter, config, rng=rng.child("bootstrap")
        )
    return result


def simex_variance_difference(result: SimexResult, config: SimexConfig) -> np.ndarray:
    """Variance by extrapolating model-minus-sampling variance differences.

    At each lambda the model-based variance of the estimates exceeds their
    pure simulation scatter by the sampling variance of the estimator
    itself; extrapolating the positive differences to lambda = -1 recovers
    the variance of the SIMEX estimate.  Negative extrapolations are
    floored at zero with a warning.
    """
    diffs = result.per_lambda_var_model - result.per_lambda_var_sampling
    out = np.empty(result.estimate.size)
    for j in range(result.estimate.size):
        keep = diffs[:, j] > 0
        if np.isnan(diffs[:, j]).all():
            out[j] = np.nan
            continue
        if int(keep.sum()) < 3:
            raise VarianceDifferenceError(
                "fewer than 3 positive variance differences for parameter "
                f"{result.param_names[j]!r}; use the bootstrap variance instead"
            )
        curve = fit_extrapolant(
            list(zip(result.lambdas[keep], diffs[keep, j])), config.extrapolant
        )
        value = extrapolate(curve, -1.0)
        if value < 0:
            warnings.warn(
                f"extrapolated variance for {result.param_names[j]!r} is negative; "
                "flooring at 0",
                RuntimeWarning,
                stacklevel=2,
            )
            value = 0.0
        out[j] = value
    return out


def simex_variance_bootstrap(
    dataset: Dataset,
    fitter,
    config: SimexConfig,
    rng: RngStream | None = None,
) -> np.ndarray:
    """Case-resampling bootstrap variance of the SIMEX estimate.

    Units are resampled with replacement and the full procedure is re-run
    per resample.  All resamples share one pseudo-noise stream (common
    random numbers), so identical resamples produce identical estimates
    and the variance reflects the data resampling alone.
    """
    if rng is None:
        rng = RngStream(config.seed, ("bootstrap",))
    inner = replace(config, variance_method="none")
    pseudo_stream = rng.child("common-pseudo")
    estimates = []
    failures = []
    for j in range(config.bootstrap_reps):
        idx = rng.child("resample", j).generator().integers(0, dataset.n, dataset.n)
        resample = dataset.take(idx)
        try:
            res = run_simex(resample, fitter, inner, rng=pseudo_stream)
        except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            failures.append(str(exc))
            continue
        estimates.append(res.estimate)
    if len(failures) > _FAILURE_FRACTION * config.bootstrap_reps:
        raise SimexReplicateError(
            f"{len(failures)}/{config.bootstrap_reps} bootstrap resamples failed "
            f"(first failure: {failures[0]})"
        )
    return np.asarray(estimates).var(axis=0, ddof=1)
