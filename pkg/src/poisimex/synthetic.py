"""Application-shaped synthetic survival data.

The real cohort behind the application workflow is not public, so this
generator produces a stand-in with the same column structure: a count
biomarker on a small tissue core, binary clinical covariates (age group,
debulking status with an unknown level, late FIGO stage), and a censored
survival outcome.  The regression truth is known, which is what makes the
end-to-end correction measurable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ParameterError
from .rng import RngStream

COLUMNS = (
    "time",
    "event",
    "marker_count",
    "core_area",
    "age_60plus",
    "debulk_suboptimal",
    "debulk_unknown",
    "figo_stage_34",
)

COVARIATE_COLUMNS = COLUMNS[4:]

# marker density law: strongly right-skewed cell densities per mm^2
_X_SHAPE = 7.0
_X_SCALE = 6.5
_AREA_LO, _AREA_HI = 0.26, 0.30
_SIGMA = 1.1
_CENSOR_TARGET = 0.29


@dataclass
class SyntheticCohort:
    dataset: Dataset
    times: np.ndarray
    truth: dict

    def rows(self):
        """Formatted CSV rows matching COLUMNS."""
        ds = self.dataset
        for i in range(ds.n):
            yield (
                repr(float(self.times[i])),
                str(int(ds.event[i])),
                str(int(ds.w[i])),
                repr(float(ds.a[i])),
            ) + tuple(str(int(v)) for v in ds.z[i])


def generate_application_cohort(
    n: int = 716, seed: int = 0, beta_x: float = 0.015
) -> SyntheticCohort:
    """Simulate one cohort with known truth.

    The biomarker coefficient ``beta_x`` acts on the true cell density per
    mm^2; the observed count on a ~0.28 mm^2 core is conditionally Poisson
    around density times area.
    """
    if n < 2:
        raise ParameterError("cohort size must be at least 2")
    truth = {
        "intercept": 4.8,
        "x": float(beta_x),
        "age_60plus": -0.21,
        "debulk_suboptimal": -0.60,
        "debulk_unknown": -0.47,
        "figo_stage_34": -0.66,
        "scale": _SIGMA,
    }
    g = RngStream(seed, ("synthetic-cohort",)).generator()

    x = g.gamma(_X_SHAPE, _X_SCALE, size=n)
    area = g.uniform(_AREA_LO, _AREA_HI, size=n)
    w = g.poisson(x * area)

    age = (g.uniform(size=n) < 0.58).astype(int)
    debulk_draw = g.uniform(size=n)
    debulk_sub = (debulk_draw < 0.40).astype(int)
    debulk_unknown = ((debulk_draw >= 0.40) & (debulk_draw < 0.63)).astype(int)
    figo = (g.uniform(size=n) < 0.82).astype(int)
    z = np.column_stack([age, debulk_sub, debulk_unknown, figo]).astype(float)

    log_t = (
        truth["intercept"]
        + truth["x"] * x
        + z @ np.array([truth[c] for c in COVARIATE_COLUMNS])
        + _SIGMA * g.standard_normal(n)
    )

    # exponential censoring calibrated on the realized times
    t = np.exp(log_t)
    scale = _calibrate_censoring(t, _CENSOR_TARGET)
    c = g.exponential(scale, size=n)
    obs_t = np.minimum(t, c)
    event = (t <= c).astype(int)

    ds = Dataset(y=np.log(obs_t), w=w, a=area, z=z, event=event, x=x)
    return SyntheticCohort(dataset=ds, times=obs_t, truth=truth)


def _calibrate_censoring(t, target):
    def frac(scale):
        return float(np.mean(-np.expm1(-t / scale)))

    lo = hi = float(np.median(t))
    while frac(lo) < target:
        lo /= 10.0
    while frac(hi) > target:
        hi *= 10.0
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if frac(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-12:
            break
    return float(np.sqrt(lo * hi))
