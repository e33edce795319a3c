import math

import numpy as np
import pytest

from poisimex import (
    Dataset,
    Gamma,
    GammaScaledByZ,
    ObservedUnit,
    PointMass,
    RegressionTruth,
    RngStream,
    ScenarioSpec,
    Uniform,
    generate_dataset,
    surrogate_density,
)
from poisimex.scenarios import BinomialSurrogate, NegBinomialSurrogate
from poisimex.errors import ParameterError


def scenario1(n=50, sigma_eps=5.0):
    return ScenarioSpec(
        x_law=Gamma(1, 2),
        z_law=Uniform(0.5, 9),
        truth=RegressionTruth(2.0, 1.0, (0.5,), sigma_eps),
        n=n,
    )


class TestObservedUnit:
    def test_surrogate_density_values(self):
        assert surrogate_density(ObservedUnit(y=0, w=4, a=2)) == 2.0
        assert surrogate_density(ObservedUnit(y=0, w=0, a=1)) == 0.0
        # 0.6 mm diameter core: area pi * 0.3^2
        area = math.pi * 0.3**2
        unit = ObservedUnit(y=0, w=7, a=area)
        assert abs(unit.surrogate_density - 24.758) < 1e-3

    def test_invariants(self):
        with pytest.raises(ParameterError):
            ObservedUnit(y=0, w=-1, a=1)
        with pytest.raises(ParameterError):
            ObservedUnit(y=0, w=1, a=0)
        with pytest.raises(ParameterError):
            ObservedUnit(y=0, w=1, a=1, event=2)


class TestDataset:
    def test_from_units_and_back(self):
        units = [
            ObservedUnit(y=1.5, w=3, a=2.0, z=(0.7,), event=1),
            ObservedUnit(y=-0.5, w=0, a=1.0, z=(2.0,), event=0),
        ]
        ds = Dataset.from_units(units)
        assert len(ds) == 2
        assert list(ds)[1] == units[1]
        assert np.allclose(ds.densities, [1.5, 0.0])

    def test_mismatched_z_dims_rejected(self):
        units = [ObservedUnit(y=0, w=1, a=1, z=(1.0,)), ObservedUnit(y=0, w=1, a=1)]
        with pytest.raises(ParameterError):
            Dataset.from_units(units)

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            Dataset.from_units([])

    def test_density_override(self):
        ds = Dataset(y=[1.0, 2.0], w=[2, 4], a=[1.0, 2.0])
        pseudo = ds.with_densities([-0.3, 5.0])
        assert np.allclose(ds.densities, [2.0, 2.0])
        assert np.allclose(pseudo.densities, [-0.3, 5.0])
        assert np.array_equal(pseudo.w, ds.w)

    def test_take_resamples_rows(self):
        ds = Dataset(y=[1, 2, 3], w=[1, 2, 3], a=[1, 1, 1], x=[9, 8, 7])
        sub = ds.take([2, 0, 2])
        assert sub.y.tolist() == [3, 1, 3]
        assert sub.x.tolist() == [7, 9, 7]


class TestGenerateDataset:
    def test_scenario1_shape(self):
        ds = generate_dataset(scenario1(), RngStream(3, ("sc1", 0)))
        assert ds.n == 50
        assert np.all(ds.event == 1)
        assert ds.z_dim == 1
        assert np.all(ds.z >= 0.5) and np.all(ds.z <= 9.0)
        assert ds.has_truth
        assert np.all(ds.w >= 0)

    def test_degenerate_noiseless_point_mass(self):
        c = 4.0
        spec = ScenarioSpec(
            x_law=PointMass(c),
            truth=RegressionTruth(0.0, 1.0, (), 0.0),
            n=20,
        )
        ds = generate_dataset(spec, RngStream(5, ("pm", 0)))
        assert np.all(ds.y == c)

    def test_determinism_bit_identical(self):
        a = generate_dataset(scenario1(), RngStream(11, ("det", 7)))
        b = generate_dataset(scenario1(), RngStream(11, ("det", 7)))
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.w, b.w)
        assert np.array_equal(a.x, b.x)
        c = generate_dataset(scenario1(), RngStream(11, ("det", 8)))
        assert not np.array_equal(a.y, c.y)

    def test_binomial_mode_respects_support(self):
        spec = ScenarioSpec(
            x_law=Gamma(1, 10),
            z_law=Uniform(0.5, 9),
            truth=RegressionTruth(2.0, 1.0, (0.5,), 5.0),
            surrogate_law=BinomialSurrogate(m=40),
            n=2000,
        )
        ds = generate_dataset(spec, RngStream(2, ("bin", 0)))
        assert np.all(ds.x <= 40)
        assert np.all(ds.w <= 40)

    def test_scenario3_scale_tied_to_z(self):
        spec = ScenarioSpec(
            x_law=GammaScaledByZ(shape=2.0),
            z_law=Uniform(0.5, 9),
            truth=RegressionTruth(2.0, 1.0, (0.5,), 5.0),
            n=200_000,
        )
        ds = generate_dataset(spec, RngStream(13, ("sc3", 0)))
        # E[X | Z] = 2 Z: regression of x on z has slope 2, intercept 0
        slope, intercept = np.polyfit(ds.z[:, 0], ds.x, 1)
        assert abs(slope - 2.0) < 0.05
        assert abs(intercept) < 0.15


class TestCountLaws:
    def test_poisson_conditional_mean_and_variance(self):
        # Monte Carlo check of E[W|X] = Var[W|X] = X*A within 3 SE
        x, a, n = 3.0, 2.0, 10**6
        g = RngStream(17, ("poimv",)).generator()
        w = g.poisson(x * a, size=n)
        mean_se = np.sqrt(x * a / n)
        assert abs(w.mean() - x * a) < 3 * mean_se
        # SE of the sample variance of a Poisson: sqrt((mu + 2 mu^2)/n)
        var_se = np.sqrt((x * a + 2 * (x * a) ** 2) / n)
        assert abs(w.var(ddof=1) - x * a) < 3 * var_se

    @pytest.mark.parametrize(
        "shape,scale,ratio", [(0.1, 9.0, 0.9), (2.0 / 3.0, 3.0, 0.75), (2.0, 1.0, 0.5)]
    )
    def test_variance_ratio_law(self, shape, scale, ratio):
        # Var(X)/Var(W) = b/(1+b) for Gamma(a,b) truth with unit area
        spec = ScenarioSpec(
            x_law=Gamma(shape, scale),
            truth=RegressionTruth(0.0, 1.0, (), 1.0),
            n=10**6,
        )
        ds = generate_dataset(spec, RngStream(23, ("ratio", int(shape * 100))))
        assert abs(ds.x.var() / ds.w.var() - ratio) < 0.01

    def test_binomial_misspecification_mean_is_x(self):
        # E[W | X] = m * (X/m) = X exactly; Monte Carlo within 3 SE
        x, m, n = 5.0, 40, 10**6
        g = RngStream(29, ("binmean",)).generator()
        w = g.binomial(m, x / m, size=n)
        se = np.sqrt(x * (1 - x / m) / n)
        assert abs(w.mean() - x) < 3 * se

    def test_negbinomial_misspecification_mean_is_x(self):
        spec = ScenarioSpec(
            x_law=Gamma(1, 2),
            truth=RegressionTruth(0.0, 1.0, (), 1.0),
            surrogate_law=NegBinomialSurrogate(r=5.0),
            n=10**6,
        )
        ds = generate_dataset(spec, RngStream(31, ("nbmean",)))
        # unconditionally E[W] = E[X] = 2
        assert abs(ds.w.mean() - 2.0) < 0.02


class TestCensoring:
    def test_aft_censoring_fraction_exponential(self):
        spec = ScenarioSpec(
            x_law=Gamma(1, 2),
            z_law=Uniform(0.5, 9),
            truth=RegressionTruth(2.0, 1.0, (0.5,), 2.0),
            response_kind="lognormal-aft",
            censoring_rate=0.2,
            censoring_scheme="exponential",
            n=10**4,
        )
        ds = generate_dataset(spec, RngStream(37, ("cens", 0)))
        assert abs((1 - ds.event.mean()) - 0.20) < 0.02

    def test_aft_censoring_fraction_random_flag(self):
        spec = ScenarioSpec(
            x_law=Gamma(1, 2),
            z_law=Uniform(0.5, 9),
            truth=RegressionTruth(2.0, 1.0, (0.5,), 2.0),
            response_kind="lognormal-aft",
            censoring_rate=0.2,
            censoring_scheme="random-flag",
            n=10**4,
        )
        ds = generate_dataset(spec, RngStream(37, ("cens", 1)))
        assert abs((1 - ds.event.mean()) - 0.20) < 0.02

    def test_linear_cannot_be_censored(self):
        with pytest.raises(ParameterError):
            ScenarioSpec(
                x_law=Gamma(1, 2),
                truth=RegressionTruth(2.0, 1.0, (), 5.0),
                censoring_rate=0.2,
                n=10,
            )
