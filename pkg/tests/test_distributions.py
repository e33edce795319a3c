import numpy as np
import pytest

from poisimex import (
    Binomial,
    Gamma,
    NegBinomial,
    Normal,
    PointMass,
    Poisson,
    RngStream,
    Uniform,
    sample_distribution,
)
from poisimex.errors import ParameterError


def test_gamma_mean_large_sample():
    draws = sample_distribution(Gamma(1, 2), 10**6, RngStream(1, ("gamma",)))
    assert abs(draws.mean() - 2.0) < 0.02


def test_poisson_zero_rate_is_degenerate():
    draws = sample_distribution(Poisson(0.0), 5, RngStream(1, ("poi0",)))
    assert draws.tolist() == [0, 0, 0, 0, 0]


def _negbin_mean_by_summation(r, p, kmax=4000):
    # independent oracle: direct sum of k * pmf(k) for the failure-count
    # parameterization, pmf(k) = C(k+r-1, k) p^r (1-p)^k
    from math import lgamma, exp, log

    total = 0.0
    for k in range(1, kmax):
        log_pmf = (
            lgamma(k + r) - lgamma(k + 1) - lgamma(r) + r * log(p) + k * log(1 - p)
        )
        total += k * exp(log_pmf)
    return total


def test_negbinomial_mean_matches_analytic():
    x = 2.0
    r = 5
    p = r / (r + x)
    # oracle first: summation confirms the analytic mean r(1-p)/p = x
    assert abs(_negbin_mean_by_summation(r, p) - x) < 1e-9
    draws = sample_distribution(NegBinomial(r, p), 10**6, RngStream(1, ("nb",)))
    assert abs(draws.mean() - x) < 0.02


def test_point_mass_and_normal():
    draws = sample_distribution(PointMass(3.5), 4, RngStream(1, ("pm",)))
    assert np.all(draws == 3.5)
    draws = sample_distribution(Normal(1.0, 0.0), 3, RngStream(1, ("nrm",)))
    assert np.all(draws == 1.0)


def test_uniform_range():
    draws = sample_distribution(Uniform(0.5, 9.0), 1000, RngStream(1, ("uni",)))
    assert draws.min() >= 0.5 and draws.max() <= 9.0


@pytest.mark.parametrize(
    "bad",
    [
        lambda: Gamma(0, 2),
        lambda: Gamma(1, -1),
        lambda: Uniform(2, 2),
        lambda: Poisson(-0.5),
        lambda: Binomial(0, 0.5),
        lambda: Binomial(10, 1.5),
        lambda: NegBinomial(5, 0.0),
        lambda: NegBinomial(-1, 0.5),
        lambda: Normal(0, -1),
    ],
)
def test_invalid_parameters_raise(bad):
    with pytest.raises(ParameterError):
        bad()


def test_sample_distribution_rejects_bad_count():
    with pytest.raises(ParameterError):
        sample_distribution(Gamma(1, 1), -3, RngStream(0))


def test_identical_streams_reproduce():
    a = sample_distribution(Gamma(2, 3), 100, RngStream(9, ("s", 4)))
    b = sample_distribution(Gamma(2, 3), 100, RngStream(9, ("s", 4)))
    c = sample_distribution(Gamma(2, 3), 100, RngStream(9, ("s", 5)))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
