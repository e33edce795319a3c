"""Single-dataset estimators.

Four fitting routes are provided:

* ``fit_ols`` — least squares on either the observed surrogate density or
  the hidden true density (the naive and truth benchmarks).
* ``fit_corrected_lm`` — corrected-score linear estimator for conditionally
  Poisson counts: every occurrence of the true density X in the normal
  equations is replaced by an unbiased surrogate statistic
  (X -> V = W/A, X^2 -> V^2 - V/A, since E[W^2|X] = XA + X^2 A^2).
* ``fit_aft_lognormal`` — maximum likelihood for the right-censored
  log-normal accelerated failure time model.
* ``attenuation_factor`` — the closed-form multiplicative asymptotic bias
  of the naive slope, Var[X] / (Var[X] + E[X/A]).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_ndtr

from .data import Dataset
from .errors import CorrectedMatrixError, ParameterError, SingularDesignError

_LOG_2PI = float(np.log(2.0 * np.pi))
_GRAD_TOL = 1e-8
_MAX_ITER = 500


@dataclass
class ModelFit:
    """Fitted coefficients with their variance estimates.

    ``scale`` is the residual scale (sigma_eps for the linear model, the
    AFT sigma otherwise); ``loglik`` is populated for likelihood fits only.
    A ``converged=False`` fit is still returned so callers can decide how
    to degrade, but downstream consumers must not treat it as reliable.
    """

    names: tuple
    coef: np.ndarray
    coef_var: np.ndarray
    scale: float
    scale_var: float | None = None
    loglik: float | None = None
    converged: bool = True
    iterations: int = 0

    def __getitem__(self, name):
        return float(self.coef[self.names.index(name)])

    def variance(self, name):
        return float(self.coef_var[self.names.index(name)])

    def as_dict(self):
        return dict(zip(self.names, (float(c) for c in self.coef)))


@dataclass(frozen=True)
class AttenuationInputs:
    """Moments entering the naive-slope attenuation formula."""

    mean_x: float
    var_x: float
    mean_x_over_a: float

    def __post_init__(self):
        if self.var_x < 0:
            raise ParameterError(f"Var[X] must be >= 0, got {self.var_x}")
        if not self.mean_x_over_a > 0:
            raise ParameterError(f"E[X/A] must be > 0, got {self.mean_x_over_a}")

    @classmethod
    def from_gamma(cls, shape, scale, area=1.0):
        if not (shape > 0 and scale > 0 and area > 0):
            raise ParameterError("shape, scale and area must all be positive")
        mean = shape * scale
        return cls(mean_x=mean, var_x=shape * scale**2, mean_x_over_a=mean / area)


def attenuation_factor(inputs: AttenuationInputs) -> float:
    """Asymptotic ratio of the naive slope to the true slope, in (0, 1).

    For X ~ Gamma(a, b) observed with area 1 this reduces to b / (1 + b).
    """
    return inputs.var_x / (inputs.var_x + inputs.mean_x_over_a)


def _covariate_column(dataset: Dataset, source: str, column=None) -> np.ndarray:
    if source == "surrogate-density":
        return dataset.densities
    if source == "hidden-truth":
        if not dataset.has_truth:
            raise ParameterError("dataset carries no hidden truth column")
        return dataset.x
    if source == "supplied-column":
        if column is None:
            raise ParameterError("supplied-column source needs an explicit column")
        column = np.asarray(column, dtype=float)
        if column.shape != (dataset.n,):
            raise ParameterError("supplied column must match the number of units")
        return column
    raise ParameterError(f"unknown covariate source: {source!r}")


def _design(dataset: Dataset, v: np.ndarray):
    names = ["intercept", "x"]
    cols = [np.ones(dataset.n), v]
    q = dataset.z_dim
    for j in range(q):
        names.append("z" if q == 1 else f"z{j + 1}")
        cols.append(dataset.z[:, j])
    return tuple(names), np.column_stack(cols)


def _collinear_columns(design, names):
    """Name the columns participating in a rank deficiency."""
    full_rank = np.linalg.matrix_rank(design)
    involved = []
    for j in range(design.shape[1]):
        reduced = np.delete(design, j, axis=1)
        if np.linalg.matrix_rank(reduced) == full_rank:
            involved.append(names[j])
    return involved or list(names)


def _check_rank(design, names):
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise SingularDesignError(_collinear_columns(design, names))


def fit_ols(dataset: Dataset, covariate_source: str = "surrogate-density") -> ModelFit:
    """Least squares of y on (1, covariate, z).

    The covariate column is the surrogate density W/A for the naive fit or
    the hidden truth X for the truth benchmark.  Variances come from the
    classical homoscedastic OLS formula with residual denominator N - p.
    """
    v = _covariate_column(dataset, covariate_source)
    names, design = _design(dataset, v)
    return _lm_solve(design, dataset.y, names)


def _lm_solve(design, y, names) -> ModelFit:
    n, p = design.shape
    _check_rank(design, names)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rss = float(resid @ resid)
    dof = n - p
    s2 = rss / dof if dof > 0 else 0.0
    xtx_inv = np.linalg.inv(design.T @ design)
    coef_var = np.clip(np.diag(xtx_inv) * s2, 0.0, None)
    scale = float(np.sqrt(s2))
    # delta-method variance of sigma-hat from Var[s^2] = 2 sigma^4 / dof
    scale_var = s2 / (2 * dof) if dof > 0 else 0.0
    return ModelFit(
        names=names,
        coef=coef,
        coef_var=coef_var,
        scale=scale,
        scale_var=scale_var,
    )


def fit_corrected_lm(dataset: Dataset) -> ModelFit:
    """Corrected-score linear fit for conditionally Poisson counts.

    Solves the normal equations with the (x, x) cross-product entry
    replaced by sum(V^2 - V/A), which is unbiased for sum(X^2) under the
    Poisson error law; all other occurrences of X use V = W/A directly.
    """
    v = dataset.w / dataset.a
    names, design = _design(dataset, v)
    _check_rank(design, names)
    n, p = design.shape
    m = design.T @ design
    m[1, 1] -= float(np.sum(v / dataset.a))
    rhs = design.T @ dataset.y
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise CorrectedMatrixError(
            "corrected cross-product matrix is not positive definite; "
            "the corrected-score solution is unstable at this sample size - "
            "a larger N is needed"
        ) from None
    coef = np.linalg.solve(m, rhs)
    # rss analogue via the normal-equation identity y'y - beta'rhs; it can
    # go negative in small samples, in which case the scale is floored.
    rss = max(float(dataset.y @ dataset.y - coef @ rhs), 0.0)
    dof = n - p
    s2 = rss / dof if dof > 0 else 0.0
    m_inv = np.linalg.inv(m)
    del chol
    return ModelFit(
        names=names,
        coef=coef,
        coef_var=np.clip(np.diag(m_inv) * s2, 0.0, None),
        scale=float(np.sqrt(s2)),
        scale_var=s2 / (2 * dof) if dof > 0 else 0.0,
    )


def _aft_value_and_grad(theta, design, y, event):
    """Negative log-likelihood and gradient for the censored lognormal AFT.

    Parameters are (beta, log sigma); censored units contribute the normal
    upper tail through log_ndtr for numerical stability.
    """
    beta = theta[:-1]
    log_s = theta[-1]
    s = np.exp(log_s)
    r = (y - design @ beta) / s
    cens = 1.0 - event

    log_sf = log_ndtr(-r)
    nll = float(
        np.sum(event * (0.5 * r * r + log_s + 0.5 * _LOG_2PI)) - np.sum(cens * log_sf)
    )

    # hazard of the standard normal at r: phi(r) / Phi(-r)
    log_pdf = -0.5 * r * r - 0.5 * _LOG_2PI
    hazard = np.exp(log_pdf - log_sf)
    weight = event * r + cens * hazard
    g_beta = -(design.T @ weight) / s
    g_logs = float(np.sum(event * (1.0 - r * r)) - np.sum(cens * hazard * r))
    return nll, np.concatenate([g_beta, [g_logs]])


def _aft_hessian(theta, design, y, event):
    """Observed information by central differences of the analytic gradient."""
    k = theta.size
    hess = np.empty((k, k))
    for j in range(k):
        h = 1e-5 * (1.0 + abs(theta[j]))
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        _, gp = _aft_value_and_grad(tp, design, y, event)
        _, gm = _aft_value_and_grad(tm, design, y, event)
        hess[:, j] = (gp - gm) / (2 * h)
    return 0.5 * (hess + hess.T)


def fit_aft_lognormal(
    dataset: Dataset,
    covariate_source: str = "surrogate-density",
    column=None,
    init=None,
    with_variances: bool = True,
) -> ModelFit:
    """Right-censored log-normal AFT fit by maximum likelihood.

    The dataset's ``y`` holds log survival times; ``event`` marks observed
    deaths.  Optimization runs a derivative-free simplex from an OLS start
    on the uncensored units, then polishes with gradient-based quasi-Newton
    steps until the gradient norm drops below 1e-8 (500 iteration cap).
    Passing ``init`` skips the simplex stage, which is how warm-started
    pseudo-noise refits stay cheap.  ``with_variances=False`` skips the
    observed-information matrix when only point estimates are needed.
    """
    if not np.any(dataset.event == 1):
        raise ParameterError("AFT fit requires at least one uncensored unit")
    v = _covariate_column(dataset, covariate_source, column)
    names, design = _design(dataset, v)
    _check_rank(design, names)
    y = dataset.y
    event = dataset.event.astype(float)
    p = design.shape[1]

    iterations = 0
    if init is not None:
        theta = np.asarray(init, dtype=float)
        if theta.shape != (p + 1,):
            raise ParameterError(f"init must have length {p + 1} (beta..., log sigma)")
        theta = theta.copy()
    else:
        theta = _aft_start(design, y, event)
        simplex = minimize(
            lambda t: _aft_value_and_grad(t, design, y, event)[0],
            theta,
            method="Nelder-Mead",
            options={"maxiter": 200, "xatol": 1e-6, "fatol": 1e-10},
        )
        theta = simplex.x
        iterations += simplex.nit

    polish = minimize(
        _aft_value_and_grad,
        theta,
        args=(design, y, event),
        jac=True,
        method="BFGS",
        options={"gtol": _GRAD_TOL, "maxiter": _MAX_ITER},
    )
    iterations += polish.nit
    theta = polish.x
    nll, grad = _aft_value_and_grad(theta, design, y, event)
    converged = bool(polish.success or np.linalg.norm(grad) < 1e-6)

    coef = theta[:-1]
    scale = float(np.exp(theta[-1]))
    if with_variances:
        hess = _aft_hessian(theta, design, y, event)
        try:
            cov = np.linalg.inv(hess)
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(hess)
        diag = np.diag(cov)
        if np.any(diag[:-1] <= 0):
            converged = False
        coef_var = np.clip(diag[:p], 0.0, None)
        scale_var = float(max(diag[p], 0.0) * scale**2)
    else:
        coef_var = np.full(p, np.nan)
        scale_var = None

    return ModelFit(
        names=names,
        coef=coef,
        coef_var=coef_var,
        scale=scale,
        scale_var=scale_var,
        loglik=-nll,
        converged=converged,
        iterations=iterations,
    )


def _aft_start(design, y, event):
    """OLS on the uncensored units, padded with a small floor on sigma."""
    obs = event > 0
    d_obs = design[obs]
    y_obs = y[obs]
    if np.linalg.matrix_rank(d_obs) < design.shape[1]:
        beta = np.zeros(design.shape[1])
        beta[0] = float(np.mean(y_obs))
        resid = y_obs - beta[0]
    else:
        beta, _, _, _ = np.linalg.lstsq(d_obs, y_obs, rcond=None)
        resid = y_obs - d_obs @ beta
    s = float(np.sqrt(np.mean(resid**2)))
    return np.concatenate([beta, [np.log(max(s, 1e-3))]])


def aft_warm_start(fit: ModelFit) -> np.ndarray:
    """Parameter vector (beta..., log sigma) for warm-starting a refit."""
    return np.concatenate([fit.coef, [np.log(max(fit.scale, 1e-8))]])
