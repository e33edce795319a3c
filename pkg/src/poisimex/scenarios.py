"""Simulation scenario recipes and dataset generators.

A scenario fully specifies one simulation setting: the law of the true
density X, an optional error-free covariate Z, the conditional law of the
observed count W given X, the regression truth, the response kind and the
censoring level.  ``generate_dataset`` turns a scenario plus an RNG stream
into a dataset, keeping the hidden truth for truth-using fits.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .distributions import Gamma, PointMass, Uniform
from .errors import ParameterError
from .rng import RngStream

_MAX_REJECTION_ROUNDS = 1000
# Internal seed for censoring-rate calibration pilots; a constant so the
# calibrated rate is a pure function of the scenario parameters.
_PILOT_SEED = 0x5EED_CA1B
_PILOT_SIZE = 100_000


@dataclass(frozen=True)
class RegressionTruth:
    """True regression parameters behind a simulated scenario."""

    beta0: float
    beta_x: float
    beta_z: tuple = ()
    sigma_eps: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta_z", tuple(float(b) for b in self.beta_z))
        # sigma_eps == 0 is allowed for degenerate noiseless test scenarios
        if self.sigma_eps < 0:
            raise ParameterError(f"sigma_eps must be >= 0, got {self.sigma_eps}")


@dataclass(frozen=True)
class GammaScaledByZ:
    """Gamma law whose scale parameter is the unit's own Z value."""

    shape: float

    def __post_init__(self):
        if not self.shape > 0:
            raise ParameterError(f"Gamma shape must be positive, got {self.shape}")


@dataclass(frozen=True)
class PoissonSurrogate:
    """W | X ~ Poisson(X * A): the working error model."""

    def draw(self, x, area, g):
        return g.poisson(x * area)

    def max_x(self):
        return np.inf


@dataclass(frozen=True)
class BinomialSurrogate:
    """W | X ~ Binomial(m, X/m); misspecification study generator.

    The success probability X/m requires X <= m; draws of X violating this
    are rejected and redrawn by the dataset generator.
    """

    m: int

    def __post_init__(self):
        if not (isinstance(self.m, (int, np.integer)) and self.m > 0):
            raise ParameterError(f"Binomial m must be a positive integer, got {self.m}")

    def draw(self, x, area, g):
        return g.binomial(self.m, x / self.m)

    def max_x(self):
        return float(self.m)


@dataclass(frozen=True)
class NegBinomialSurrogate:
    """W | X ~ NegBinomial(r, r/(r+X)); mean X, overdispersed."""

    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError(f"NegBinomial r must be positive, got {self.r}")

    def draw(self, x, area, g):
        return g.negative_binomial(self.r, self.r / (self.r + x))

    def max_x(self):
        return np.inf


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete recipe for one simulation setting."""

    x_law: object
    truth: RegressionTruth
    n: int
    z_law: Uniform | None = None
    surrogate_law: object = field(default_factory=PoissonSurrogate)
    response_kind: str = "linear"
    censoring_rate: float = 0.0
    censoring_scheme: str = "exponential"
    area: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"sample size must be >= 1, got {self.n}")
        if not self.area > 0:
            raise ParameterError(f"area must be positive, got {self.area}")
        if self.response_kind not in ("linear", "lognormal-aft"):
            raise ParameterError(f"unknown response kind: {self.response_kind!r}")
        if self.censoring_scheme not in ("exponential", "random-flag"):
            raise ParameterError(
                f"unknown censoring scheme: {self.censoring_scheme!r}"
            )
        if not 0 <= self.censoring_rate < 1:
            raise ParameterError(
                f"censoring rate must be in [0, 1), got {self.censoring_rate}"
            )
        if self.response_kind == "linear" and self.censoring_rate != 0:
            raise ParameterError("linear-response scenarios cannot be censored")
        n_z = 1 if self.z_law is not None else 0
        if len(self.truth.beta_z) != n_z:
            raise ParameterError(
                f"truth.beta_z has {len(self.truth.beta_z)} entries but the "
                f"scenario draws {n_z} error-free covariate(s)"
            )
        if isinstance(self.x_law, GammaScaledByZ) and self.z_law is None:
            raise ParameterError("z-tied Gamma scale requires a z law")
        if not isinstance(
            self.surrogate_law, (PoissonSurrogate, BinomialSurrogate, NegBinomialSurrogate)
        ):
            raise ParameterError(f"unknown surrogate law: {self.surrogate_law!r}")
        if isinstance(self.x_law, PointMass) and self.x_law.value > self.surrogate_law.max_x():
            raise ParameterError("point-mass X exceeds the binomial support bound")


def _draw_z(spec, n, g):
    if spec.z_law is None:
        return None
    return spec.z_law.sample(n, g)


def _draw_x(spec, z, n, g):
    """Draw true densities, rejecting draws outside the surrogate support."""
    law = spec.x_law
    if isinstance(law, GammaScaledByZ):
        x = g.gamma(law.shape, 1.0, size=n) * z
    else:
        x = law.sample(n, g)
    bound = spec.surrogate_law.max_x()
    if np.isfinite(bound):
        bad = x > bound
        rounds = 0
        while np.any(bad):
            rounds += 1
            if rounds > _MAX_REJECTION_ROUNDS:
                raise ParameterError(
                    "could not draw X within the binomial support bound "
                    f"(m = {bound}); the X law puts too much mass above it"
                )
            k = int(bad.sum())
            if isinstance(law, GammaScaledByZ):
                x[bad] = g.gamma(law.shape, 1.0, size=k) * z[bad]
            else:
                x[bad] = law.sample(k, g)
            bad = x > bound
    return x


def _linear_predictor(spec, x, z):
    t = spec.truth
    mu = t.beta0 + t.beta_x * x
    if z is not None:
        mu = mu + t.beta_z[0] * z
    return mu


_censoring_cache: dict = {}


def calibrated_censoring_scale(spec: ScenarioSpec) -> float:
    """Scale of the exponential censoring-time law hitting the target rate.

    Calibrated once per (x law, z law, truth, rate) by bisection against a
    deterministic pilot sample of survival times, then cached.  The pilot
    seed is fixed, so the calibrated scale is a pure function of the
    scenario parameters.
    """
    if spec.censoring_rate <= 0:
        raise ParameterError("no censoring to calibrate")
    key = (spec.x_law, spec.z_law, spec.surrogate_law, spec.truth, spec.censoring_rate)
    if key in _censoring_cache:
        return _censoring_cache[key]

    g = np.random.default_rng(np.random.SeedSequence(_PILOT_SEED))
    z = _draw_z(spec, _PILOT_SIZE, g)
    x = _draw_x(spec, z, _PILOT_SIZE, g)
    log_t = _linear_predictor(spec, x, z) + spec.truth.sigma_eps * g.standard_normal(
        _PILOT_SIZE
    )
    t = np.exp(log_t)
    target = spec.censoring_rate

    def censored_fraction(scale):
        # P(C < T | T) = 1 - exp(-T/scale) for C ~ Exp(scale)
        return float(np.mean(-np.expm1(-t / scale)))

    lo = hi = float(np.median(t))
    while censored_fraction(lo) < target:
        lo /= 10.0
    while censored_fraction(hi) > target:
        hi *= 10.0
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if censored_fraction(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-12:
            break
    scale = float(np.sqrt(lo * hi))
    _censoring_cache[key] = scale
    return scale


def generate_dataset(spec: ScenarioSpec, rng: RngStream) -> Dataset:
    """Simulate one dataset; the hidden truth X is retained on the result.

    Draw order is fixed (Z, X, W, response noise, censoring times) so equal
    (seed, stream) pairs are bit-identical across runs and schedulers.
    """
    g = rng.generator()
    n = spec.n
    z = _draw_z(spec, n, g)
    x = _draw_x(spec, z, n, g)
    w = spec.surrogate_law.draw(x, spec.area, g)
    mu = _linear_predictor(spec, x, z)
    noise = spec.truth.sigma_eps * g.standard_normal(n) if spec.truth.sigma_eps > 0 else 0.0

    if spec.response_kind == "linear":
        y = mu + noise
        event = np.ones(n, dtype=int)
    else:
        log_t = mu + noise
        if spec.censoring_rate > 0 and spec.censoring_scheme == "exponential":
            # independent right censoring: observed time = min(T, C)
            scale = calibrated_censoring_scale(spec)
            log_c = np.log(g.exponential(scale, size=n))
            y = np.minimum(log_t, log_c)
            event = (log_t <= log_c).astype(int)
        elif spec.censoring_rate > 0:
            # random-flag: a Bernoulli(rate) subset is marked censored at its
            # realized event time; reproduces the published AFT tables
            y = np.asarray(log_t, dtype=float)
            event = (g.uniform(size=n) >= spec.censoring_rate).astype(int)
        else:
            y = np.asarray(log_t, dtype=float)
            event = np.ones(n, dtype=int)

    return Dataset(
        y=y,
        w=w,
        a=np.full(n, float(spec.area)),
        z=None if z is None else z,
        event=event,
        x=x,
    )


def with_sample_size(spec: ScenarioSpec, n: int) -> ScenarioSpec:
    """Same scenario at a different sample size."""
    return replace(spec, n=n)
