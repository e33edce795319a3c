"""Kaplan-Meier curves and the log-rank test.

Ties follow the standard convention: events precede censorings at the same
time.  Confidence bands use the log-minus-log transform on the Greenwood
variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .errors import ParameterError


@dataclass
class SurvivalCurve:
    """Product-limit estimate over the distinct observed times."""

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    censored: np.ndarray
    greenwood_var: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray
    median: float | None

    def survival_at(self, t) -> float:
        """Step-function value of S at time t."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        return 1.0 if idx < 0 else float(self.survival[idx])


def _check_times_events(times, events):
    times = np.asarray(times, dtype=float)
    events = np.asarray(events)
    if times.size == 0:
        raise ParameterError("survival input must be non-empty")
    if times.shape != events.shape:
        raise ParameterError("times and event flags must have equal length")
    if not np.all(times > 0):
        raise ParameterError("survival times must be positive")
    if not np.all(np.isin(events, (0, 1))):
        raise ParameterError("event flags must be 0 or 1")
    return times, events.astype(int)


def km_curve(times, events) -> SurvivalCurve:
    """Kaplan-Meier estimator with Greenwood variance and 95% bands.

    The median is the first time at which S(t) drops to 0.5 or below, or
    None if the curve never reaches it.
    """
    times, events = _check_times_events(times, events)
    order = np.argsort(times, kind="stable")
    t_sorted = times[order]
    e_sorted = events[order]

    uniq = np.unique(t_sorted)
    n = times.size
    at_risk = np.empty(uniq.size, dtype=int)
    d = np.empty(uniq.size, dtype=int)
    c = np.empty(uniq.size, dtype=int)
    risk = n
    for i, ut in enumerate(uniq):
        mask = t_sorted == ut
        at_risk[i] = risk
        d[i] = int(e_sorted[mask].sum())
        c[i] = int(mask.sum()) - d[i]
        risk -= int(mask.sum())

    frac = np.where(at_risk > 0, 1.0 - d / at_risk, 1.0)
    surv = np.cumprod(frac)
    # Greenwood: Var[S] = S^2 * cumsum(d / (n (n - d)))
    with np.errstate(divide="ignore", invalid="ignore"):
        inc = np.where((at_risk > 0) & (at_risk > d), d / (at_risk * (at_risk - d)), 0.0)
        # at S = 0 the remaining increments are moot; keep a finite cumsum
        inc = np.where(at_risk == d, 0.0, inc)
    gw = surv**2 * np.cumsum(inc)

    lower, upper = _loglog_band(surv, gw)
    below = np.nonzero(surv <= 0.5)[0]
    median = float(uniq[below[0]]) if below.size else None

    return SurvivalCurve(
        times=uniq,
        survival=surv,
        at_risk=at_risk,
        events=d,
        censored=c,
        greenwood_var=gw,
        lower95=lower,
        upper95=upper,
        median=median,
    )


def _loglog_band(surv, gw_var):
    """95% band via the log(-log S) transform; degenerate where S is 0 or 1."""
    z = norm.ppf(0.975)
    lower = np.array(surv)
    upper = np.array(surv)
    interior = (surv > 0) & (surv < 1) & (gw_var > 0)
    s = surv[interior]
    se_loglog = np.sqrt(gw_var[interior]) / (s * np.abs(np.log(s)))
    theta = np.exp(z * se_loglog)
    lower[interior] = s ** theta
    upper[interior] = s ** (1.0 / theta)
    return lower, upper


def logrank_test(groups):
    """Log-rank test across two or more labeled survival samples.

    ``groups`` maps label -> (times, events).  Returns (statistic, p-value)
    with the usual chi-square reference on (#groups - 1) degrees of
    freedom; the variance uses the hypergeometric form, which reduces to
    the familiar (O-E)^2/V statistic for two groups.
    """
    if len(groups) < 2:
        raise ParameterError("log-rank test needs at least two groups")
    labels = list(groups)
    samples = []
    for label in labels:
        times, events = groups[label]
        samples.append(_check_times_events(times, events))

    all_times = np.concatenate([t for t, _ in samples])
    all_events = np.concatenate([e for _, e in samples])
    event_times = np.unique(all_times[all_events == 1])
    if event_times.size == 0:
        raise ParameterError("log-rank test needs at least one observed event")

    k = len(labels)
    observed = np.zeros(k)
    expected = np.zeros(k)
    cov = np.zeros((k, k))
    for ut in event_times:
        n_at = np.array([np.sum(t >= ut) for t, _ in samples], dtype=float)
        d_at = np.array(
            [np.sum((t == ut) & (e == 1)) for t, e in samples], dtype=float
        )
        n_tot = n_at.sum()
        d_tot = d_at.sum()
        if n_tot <= 0 or d_tot == 0:
            continue
        observed += d_at
        expected += d_tot * n_at / n_tot
        if n_tot > 1:
            scale = d_tot * (n_tot - d_tot) / (n_tot - 1)
            frac = n_at / n_tot
            cov += scale * (np.diag(frac) - np.outer(frac, frac))

    diff = (observed - expected)[:-1]
    v = cov[:-1, :-1]
    try:
        sol = np.linalg.solve(v, diff)
    except np.linalg.LinAlgError:
        sol = np.linalg.pinv(v) @ diff
    stat = float(max(diff @ sol, 0.0))
    df = k - 1
    p = float(chi2.sf(stat, df))
    return stat, p
