"""Sampling laws used by the simulation generators.

Each law is a small frozen dataclass validating its parameters on
construction and drawing through a :class:`numpy.random.Generator`.
``sample_distribution`` is the uniform entry point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import RngStream


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ParameterError(
                f"Gamma requires shape > 0 and scale > 0, got ({self.shape}, {self.scale})"
            )

    @property
    def mean(self):
        return self.shape * self.scale

    @property
    def variance(self):
        return self.shape * self.scale**2

    def sample(self, n, g):
        return g.gamma(self.shape, self.scale, size=n)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ParameterError(f"Uniform requires lo < hi, got ({self.lo}, {self.hi})")

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def sample(self, n, g):
        return g.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd >= 0:
            raise ParameterError(f"Normal requires sd >= 0, got {self.sd}")

    def sample(self, n, g):
        return self.mean + self.sd * g.standard_normal(n)


@dataclass(frozen=True)
class Poisson:
    mean: float

    def __post_init__(self):
        if not self.mean >= 0:
            raise ParameterError(f"Poisson requires mean >= 0, got {self.mean}")

    def sample(self, n, g):
        return g.poisson(self.mean, size=n)


@dataclass(frozen=True)
class Binomial:
    m: int
    p: float

    def __post_init__(self):
        if not (isinstance(self.m, (int, np.integer)) and self.m > 0):
            raise ParameterError(f"Binomial requires a positive integer m, got {self.m}")
        if not 0 <= self.p <= 1:
            raise ParameterError(f"Binomial requires p in [0, 1], got {self.p}")

    def sample(self, n, g):
        return g.binomial(self.m, self.p, size=n)


@dataclass(frozen=True)
class NegBinomial:
    """Number-of-failures negative binomial with r successes.

    Mean is r(1-p)/p, so p = r/(r+mu) gives mean mu.
    """

    r: float
    p: float

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError(f"NegBinomial requires r > 0, got {self.r}")
        if not 0 < self.p <= 1:
            raise ParameterError(f"NegBinomial requires p in (0, 1], got {self.p}")

    def sample(self, n, g):
        return g.negative_binomial(self.r, self.p, size=n)


@dataclass(frozen=True)
class PointMass:
    """Degenerate distribution at a single value (test scaffolding)."""

    value: float

    @property
    def mean(self):
        return self.value

    @property
    def variance(self):
        return 0.0

    def sample(self, n, g):
        return np.full(n, float(self.value))


def sample_distribution(law, n, rng: RngStream) -> np.ndarray:
    """Draw ``n`` i.i.d. values from ``law`` on the given stream."""
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise ParameterError(f"sample size must be a non-negative integer, got {n}")
    if not hasattr(law, "sample"):
        raise ParameterError(f"unknown distribution law: {law!r}")
    return np.asarray(law.sample(int(n), rng.generator()))
