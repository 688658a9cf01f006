from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from scipy import stats

from lsfield.covmodels import PurePower, WhiteNoise
from lsfield.exceptions import (
    LSFieldCostGuardError,
    LSFieldDegenerateDistanceError,
    LSFieldInsufficientPointsError,
    LSFieldNegativeDensityError,
    LSFieldParameterError,
)
from lsfield.infotheory import FinitePMF, discrete_mi, gaussian_mi_exact, gaussian_orthant_probability
from lsfield.lsmodel import (
    FiniteLevels,
    Indicator,
    LSModel,
    MICurve,
    bivariate_density,
    fit_slope,
    mi_bounds,
    mi_curve,
    negativity_diagnostic,
    renyi_mi_multinomial,
    renyi_mi_quadrature,
    shannon_mi_quadrature,
    shannon_mi_series,
    subordinated_joint_pmf,
    subordinated_mi,
    subordinated_renyi_mi,
)
from lsfield.polybasis import MarginalDensity, make_basis

NU = 0.95


def distance_for(gamma: float, rho: float = 0.5) -> float:
    """Distance at which PurePower(rho) reaches the given correlation."""
    return gamma ** (-1.0 / rho)


def orthant_table(nu: float, gamma: float) -> np.ndarray:
    a = stats.norm.sf(nu)
    p11 = gaussian_orthant_probability(nu, nu, gamma)
    return np.array([[1 - 2 * a + p11, a - p11], [a - p11, p11]])


class TestConstruction:
    def test_invalid_parameters(self, gaussian: MarginalDensity, gamma5: MarginalDensity) -> None:
        corr = PurePower(0.5)
        with pytest.raises(LSFieldParameterError):
            LSModel(gaussian, corr, 0)
        with pytest.raises(LSFieldParameterError):
            LSModel(gaussian, corr, 5, basis=make_basis(gaussian, 3))
        with pytest.raises(LSFieldParameterError):
            LSModel(gaussian, corr, 3, basis=make_basis(gamma5, 3))
        with pytest.raises(LSFieldParameterError):
            LSModel(gaussian, corr, 3, negativity_policy="ignore")  # type: ignore[arg-type]

    def test_describe(self, chisq_m5: LSModel) -> None:
        info = chisq_m5.describe()
        assert info["basis"] == "laguerre"
        assert info["truncation"] == 5
        assert math.isclose(info["rho"], 0.08)


class TestBivariateDensity:
    def test_independent_at_zero_correlation(self, gaussian: MarginalDensity) -> None:
        model = LSModel(gaussian, WhiteNoise(), 5)
        u = np.linspace(-3, 3, 7)
        np.testing.assert_array_equal(bivariate_density(model, u, u[::-1], 2.0), stats.norm.pdf(u) * stats.norm.pdf(u[::-1]))

    def test_mehler_limit(self, gaussian_m10: LSModel) -> None:
        value = bivariate_density(gaussian_m10, 0.0, 0.0, distance_for(0.5))
        np.testing.assert_allclose(value, 1 / (2 * math.pi * math.sqrt(0.75)), atol=2e-3)

    def test_first_order(self, gaussian: MarginalDensity) -> None:
        model = LSModel(gaussian, PurePower(0.5), 1)
        np.testing.assert_allclose(bivariate_density(model, 1.0, 1.0, 4.0), 1.5 * stats.norm.pdf(1.0) ** 2, rtol=1e-12)

    def test_symmetric(self, chisq_m5: LSModel, rng: np.random.Generator) -> None:
        u, v = rng.gamma(5.0, size=(2, 50))
        np.testing.assert_array_equal(bivariate_density(chisq_m5, u, v, 3.0), bivariate_density(chisq_m5, v, u, 3.0))

    @pytest.mark.parametrize("family", ["gaussian", "gamma"])
    @pytest.mark.parametrize("truncation", [1, 5, 10])
    @pytest.mark.parametrize("gamma", [0.0, 0.3, 0.7])
    def test_normalized_and_marginalizes(self, family: str, truncation: int, gamma: float) -> None:
        marginal = MarginalDensity.gaussian() if family == "gaussian" else MarginalDensity.gamma(5.0, 1.0)
        model = LSModel(marginal, PurePower(0.5), truncation)
        _, w = marginal.gauss_rule(model.quad_nodes)
        bracket = 1.0 + model.kernel(gamma)
        ww = np.outer(w, w)
        np.testing.assert_allclose(np.sum(ww * bracket), 1.0, atol=1e-6)
        bulk = w > 1e-10
        np.testing.assert_allclose((bracket @ w)[bulk], 1.0, atol=1e-6)

    def test_reject_policy(self, gaussian: MarginalDensity) -> None:
        model = LSModel(gaussian, PurePower(0.5), 5, negativity_policy="reject")
        with pytest.raises(LSFieldNegativeDensityError) as info:
            bivariate_density(model, 4.0, -4.0, 4.0)
        assert info.value.details["value"] < 0
        with pytest.raises(LSFieldNegativeDensityError):
            shannon_mi_quadrature(model, distance_for(0.7))

    def test_clamp_policy(self, gaussian_m5: LSModel) -> None:
        assert bivariate_density(gaussian_m5, 4.0, -4.0, 4.0) > 0
        assert negativity_diagnostic(gaussian_m5, distance_for(0.7)) >= 0
        assert negativity_diagnostic(gaussian_m5, 1e12) == 0


class TestShannon:
    def test_zero_correlation(self, gaussian_m10: LSModel) -> None:
        assert gaussian_m10.shannon_mi_at(0.0) == 0.0

    @pytest.mark.parametrize("gamma", [0.1, 0.2, 0.3, 0.4, 0.5])
    def test_gaussian_oracle(self, gaussian_m10: LSModel, gamma: float) -> None:
        value = shannon_mi_quadrature(gaussian_m10, distance_for(gamma))
        np.testing.assert_allclose(value, gaussian_mi_exact(gamma), atol=2e-3)

    def test_chi_square_regression(self, chisq_m5: LSModel) -> None:
        value = shannon_mi_quadrature(chisq_m5, 1000.0)
        assert 0 < value < 1
        assert value == shannon_mi_quadrature(chisq_m5, 1000.0)

    def test_non_increasing(self, gaussian_m5: LSModel, chisq_m5: LSModel) -> None:
        gammas = np.linspace(0.7, 0.0, 15)
        spec = gaussian_m5.subordinate(Indicator(NU))
        for model in (gaussian_m5, chisq_m5):
            assert np.all(np.diff([model.shannon_mi_at(g) for g in gammas]) <= 1e-9)
            assert np.all(np.diff([model.renyi_mi_at(g, 2.0) for g in gammas]) <= 1e-9)
        assert np.all(np.diff([gaussian_m5.subordinated_mi_at(spec, g) for g in gammas]) <= 1e-9)


class TestSeriesAndBounds:
    def test_density_coefficients(self, gaussian_m10: LSModel, chisq_m5: LSModel) -> None:
        coeffs = gaussian_m10.density_coeffs
        np.testing.assert_allclose(coeffs[1::2], 0.0, atol=1e-12)
        np.testing.assert_allclose(coeffs[0], 1 / (2 * math.sqrt(math.pi)), atol=1e-12)
        assert abs(chisq_m5.density_coeffs[1]) > 1e-3

    def test_series_values(self, gaussian_m10: LSModel, chisq_m5: LSModel) -> None:
        assert gaussian_m10.shannon_mi_series_at(0.0) == 0.0
        c2 = gaussian_m10.density_coeffs[2]
        gamma = 1e-3
        np.testing.assert_allclose(gaussian_m10.shannon_mi_series_at(gamma), gamma**2 * (1 + c2**2), rtol=1e-5)
        c1 = chisq_m5.density_coeffs[1]
        np.testing.assert_allclose(chisq_m5.shannon_mi_series_at(1e-8) / 1e-8, c1**2, rtol=1e-4)

    def test_series_to_quadrature_ratio_settles(self, gaussian_m5: LSModel) -> None:
        ratios = [gaussian_m5.shannon_mi_series_at(g) / gaussian_m5.shannon_mi_at(g) for g in (0.01, 0.02, 0.05)]
        np.testing.assert_allclose(ratios[0], ratios[1], rtol=1e-2)
        np.testing.assert_allclose(ratios[0], ratios[2], rtol=2e-2)

    def test_degenerate_distance(self, gaussian_m5: LSModel) -> None:
        with pytest.raises(LSFieldDegenerateDistanceError):
            shannon_mi_series(gaussian_m5, 0.5)
        with pytest.raises(LSFieldDegenerateDistanceError):
            mi_bounds(gaussian_m5, 1.0)

    def test_bounds(self, gaussian_m10: LSModel, chisq_m5: LSModel) -> None:
        assert gaussian_m10.mi_bounds_at(0.0) == (0.0, 0.0)
        lower, upper = gaussian_m10.mi_bounds_at(0.3)
        assert lower == pytest.approx(0.0, abs=1e-20)
        assert upper >= gaussian_m10.shannon_mi_at(0.3)
        lower, upper = chisq_m5.mi_bounds_at(0.5)
        assert upper > lower > 0


class TestRenyi:
    @pytest.mark.parametrize(("q", "gamma"), [(1.5, 0.2), (1.5, 0.4), (2.0, 0.2), (2.0, 0.4), (3.0, 0.2), (3.0, 0.3)])
    def test_gaussian_oracle(self, gaussian_m10: LSModel, q: float, gamma: float) -> None:
        value = renyi_mi_quadrature(gaussian_m10, distance_for(gamma), q)
        np.testing.assert_allclose(value, gaussian_mi_exact(gamma, q), atol=5e-3)

    def test_shannon_limit(self, gaussian_m10: LSModel) -> None:
        gamma = 0.3
        assert abs(gaussian_m10.renyi_mi_at(gamma, 1.001) - gaussian_m10.shannon_mi_at(gamma)) < 1e-3

    def test_order_validated(self, gaussian_m5: LSModel) -> None:
        with pytest.raises(LSFieldParameterError):
            gaussian_m5.renyi_mi_at(0.3, 1.0)
        with pytest.raises(LSFieldParameterError):
            gaussian_m5.renyi_mi_at(0.3, -2.0)
        with pytest.raises(LSFieldDegenerateDistanceError):
            gaussian_m5.renyi_mi_at(1.0, 2.0)

    def test_zero_correlation(self, gaussian_m5: LSModel) -> None:
        assert gaussian_m5.renyi_mi_at(0.0, 2.5) == 0.0
        assert gaussian_m5.renyi_mi_multinomial_at(0.0, 2) == 0.0


class TestMultinomial:
    @pytest.mark.parametrize("gamma", [0.1, 0.3, 0.4])
    def test_partial_geometric_sum(self, gaussian_m5: LSModel, gamma: float) -> None:
        expected = math.log1p(sum(gamma ** (2 * k) for k in range(1, 6)))
        np.testing.assert_allclose(gaussian_m5.renyi_mi_multinomial_at(gamma, 2), expected, rtol=0, atol=1e-12)

    def test_fixture(self, gaussian_m5: LSModel) -> None:
        np.testing.assert_allclose(renyi_mi_multinomial(gaussian_m5, distance_for(0.3), 2), 0.094310, atol=5e-7)

    def test_matches_quadrature(self, gaussian_m5: LSModel) -> None:
        np.testing.assert_allclose(
            gaussian_m5.renyi_mi_multinomial_at(0.3, 2), gaussian_m5.renyi_mi_at(0.3, 2.0), atol=5e-3
        )
        np.testing.assert_allclose(
            gaussian_m5.renyi_mi_multinomial_at(0.2, 3), gaussian_m5.renyi_mi_at(0.2, 3.0), atol=1e-4
        )

    def test_guards(self, gaussian_m10: LSModel) -> None:
        with pytest.raises(LSFieldParameterError):
            gaussian_m10.renyi_mi_multinomial_at(0.3, 2.5)  # type: ignore[arg-type]
        with pytest.raises(LSFieldCostGuardError):
            gaussian_m10.renyi_mi_multinomial_at(0.3, 8)


class TestSubordination:
    def test_indicator_spec(self, gaussian_m10: LSModel) -> None:
        spec = gaussian_m10.subordinate(Indicator(NU))
        assert spec.states == (0.0, 1.0)
        assert spec.coeffs.rank == 1
        np.testing.assert_allclose(spec.cell_coeffs[:, 0], [stats.norm.cdf(NU), stats.norm.sf(NU)], atol=1e-12)
        np.testing.assert_allclose(spec.cell_coeffs[:, 1:].sum(axis=0), 0.0, atol=1e-15)

    def test_finite_levels_validated(self) -> None:
        with pytest.raises(LSFieldParameterError):
            FiniteLevels((0.0,), (1.0, 2.0, 3.0))
        with pytest.raises(LSFieldParameterError):
            FiniteLevels((1.0, 0.0), (1.0, 2.0, 3.0))
        with pytest.raises(LSFieldParameterError):
            FiniteLevels((0.0,), (1.0, 1.0))
        levels = FiniteLevels((-1.0, 1.0), (1.0, -1.0, 1.0))
        np.testing.assert_array_equal(levels(np.array([-2.0, -1.0, 0.0, 1.0, 2.0])), [1.0, -1.0, -1.0, 1.0, 1.0])

    def test_independent_table(self, gaussian_m10: LSModel) -> None:
        spec = gaussian_m10.subordinate(Indicator(NU))
        pmf = gaussian_m10.subordinated_joint_pmf_at(spec, 0.0)
        np.testing.assert_allclose(pmf.probabilities[1, 1], stats.norm.sf(NU) ** 2, atol=1e-12)
        np.testing.assert_allclose(pmf.probabilities[1, 1], 0.029262, atol=5e-6)
        assert gaussian_m10.subordinated_mi_at(spec, 0.0) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("gamma", [0.2, 0.5])
    def test_orthant_oracle(self, gaussian_m10: LSModel, gamma: float) -> None:
        spec = gaussian_m10.subordinate(Indicator(NU))
        pmf = subordinated_joint_pmf(gaussian_m10, spec, distance_for(gamma))
        oracle = orthant_table(NU, gamma)
        np.testing.assert_allclose(pmf.probabilities, oracle, atol=1e-4)
        np.testing.assert_allclose(
            subordinated_mi(gaussian_m10, spec, distance_for(gamma)), discrete_mi(FinitePMF(oracle)), atol=1e-3
        )

    def test_constant_transform(self, gaussian_m10: LSModel) -> None:
        spec = gaussian_m10.subordinate(Indicator(-40.0))
        assert gaussian_m10.subordinated_mi_at(spec, 0.5) == 0.0

    @pytest.mark.parametrize("gamma", [0.1, 0.3, 0.5])
    def test_data_processing(self, gaussian_m10: LSModel, gamma: float) -> None:
        spec = gaussian_m10.subordinate(Indicator(NU))
        assert gaussian_m10.subordinated_mi_at(spec, gamma) <= gaussian_m10.shannon_mi_at(gamma) + 1e-6

    def test_renyi(self, gaussian_m10: LSModel) -> None:
        spec = gaussian_m10.subordinate(Indicator(NU))
        r = distance_for(0.5)
        shannon = subordinated_mi(gaussian_m10, spec, r)
        assert abs(subordinated_renyi_mi(gaussian_m10, spec, r, 1.001) - shannon) < 1e-3
        assert subordinated_renyi_mi(gaussian_m10, spec, r, 2.0) > shannon

    def test_rank_two_levels(self, gaussian_m5: LSModel) -> None:
        spec = gaussian_m5.subordinate(FiniteLevels((-1.0, 1.0), (1.0, -1.0, 1.0)))
        assert spec.states == (-1.0, 1.0)
        assert spec.coeffs.rank == 2

    def test_gamma_marginal(self, chisq_m5: LSModel) -> None:
        spec = chisq_m5.subordinate(Indicator(float(stats.gamma.isf(0.05, 5.0))))
        np.testing.assert_allclose(spec.cell_coeffs[1, 0], 0.05, atol=1e-12)
        assert chisq_m5.subordinated_mi_at(spec, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert chisq_m5.subordinated_mi_at(spec, 0.5) > 0


class TestFitSlope:
    def test_exact_power_law(self) -> None:
        d = np.geomspace(1, 100, 20)
        fit = fit_slope(d, 3 * d**-2.0, (1, 100))
        assert fit.ok
        np.testing.assert_allclose([fit.slope, fit.intercept], [-2.0, math.log(3)], atol=1e-10)
        assert fit.points == 20

    def test_default_window_is_last_decade(self) -> None:
        d = np.arange(1.0, 101.0)
        fit = fit_slope(d, d**-1.0)
        assert fit.window == (10.0, 100.0)
        assert fit.points == 91

    def test_underflow_shrinks_window(self, caplog: pytest.LogCaptureFixture) -> None:
        d = np.arange(1.0, 21.0)
        values = np.where(d <= 15, d**-2.0, 0.0)
        with caplog.at_level(logging.WARNING, logger="lsfield"):
            fit = fit_slope(d, values, (1, 20))
        assert fit.window == (1, 15.0)
        np.testing.assert_allclose(fit.slope, -2.0, atol=1e-10)
        assert caplog.records[-1].event == "window-shrunk"  # type: ignore[attr-defined]

    def test_insufficient_points(self) -> None:
        d = np.arange(1.0, 6.0)
        fit = fit_slope(d, np.zeros(5))
        assert not fit.ok
        assert math.isnan(fit.slope)
        with pytest.raises(LSFieldInsufficientPointsError):
            fit_slope(d, np.zeros(5), strict=True)


class TestMICurve:
    def test_lengths_checked(self) -> None:
        fit = fit_slope(np.arange(1.0, 5.0), np.ones(4))
        with pytest.raises(LSFieldParameterError):
            MICurve(np.arange(1.0, 5.0), np.ones(3), np.ones(4), fit, "shannon")

    def test_distances_validated(self, gaussian_m5: LSModel) -> None:
        with pytest.raises(LSFieldParameterError):
            mi_curve(gaussian_m5, [3.0, 2.0, 1.0])
        with pytest.raises(LSFieldParameterError):
            mi_curve(gaussian_m5, [1.0, 2.0, 3.0], fit_window=(1.0, 10.0))

    def test_shannon_with_bounds(self, gaussian_m5: LSModel) -> None:
        d = np.arange(1.0, 51.0)
        curve = mi_curve(gaussian_m5, d)
        assert curve.variant == "shannon"
        assert curve.lower_bound is not None
        assert curve.upper_bound is not None
        # gamma(1) = 1, bounds undefined
        assert math.isnan(curve.upper_bound[0])
        valid = curve.gammas <= 0.5
        assert np.all(curve.mi_values[valid] <= curve.upper_bound[valid] * 1.1)
        assert np.all(np.diff(curve.mi_values[1:]) <= 1e-9)

    def test_variants(self, gaussian_m5: LSModel) -> None:
        d = np.arange(2.0, 12.0)
        spec = gaussian_m5.subordinate(Indicator(NU))
        assert mi_curve(gaussian_m5, d, q=2.0).variant == "renyi"
        assert mi_curve(gaussian_m5, d, spec=spec).variant == "subordinated"
        curve = mi_curve(gaussian_m5, d, spec=spec, q=1.5)
        assert curve.variant == "subordinated-renyi"
        assert curve.q == 1.5
        assert curve.lower_bound is None

    def test_workers_match_serial(self, gaussian_m5: LSModel) -> None:
        d = np.arange(2.0, 30.0)
        np.testing.assert_array_equal(mi_curve(gaussian_m5, d, workers=4).mi_values, mi_curve(gaussian_m5, d).mi_values)

    def test_zero_correlation_flags_fit(self, gaussian: MarginalDensity) -> None:
        model = LSModel(gaussian, WhiteNoise(), 5)
        curve = mi_curve(model, [1.0, 2.0, 3.0, 4.0, 5.0])
        np.testing.assert_array_equal(curve.mi_values, 0.0)
        assert not curve.slope_fit.ok


class TestDecayOrders:
    @pytest.fixture(scope="class")
    def pure(self) -> LSModel:
        return LSModel(MarginalDensity.gaussian(), PurePower(1.5), 5)

    def test_gaussian_slope(self, pure: LSModel) -> None:
        d = np.geomspace(100, 3000, 60)
        curve = mi_curve(pure, d, fit_window=(100, 3000))
        np.testing.assert_allclose(curve.slope_fit.slope, -3.0, atol=0.15)
        oracle = np.array([gaussian_mi_exact(g) for g in curve.gammas])
        np.testing.assert_allclose(curve.mi_values, oracle, rtol=1e-3)

    def test_indicator_slope(self, pure: LSModel) -> None:
        d = np.geomspace(100, 3000, 60)
        curve = mi_curve(pure, d, spec=pure.subordinate(Indicator(NU)), fit_window=(100, 3000))
        np.testing.assert_allclose(curve.slope_fit.slope, -3.0, atol=0.21)

    def test_rank_two_envelope(self, gaussian_m5: LSModel) -> None:
        d = np.geomspace(10, 1000, 40)
        spec = gaussian_m5.subordinate(FiniteLevels((-1.0, 1.0), (1.0, -1.0, 1.0)))
        curve = mi_curve(gaussian_m5, d, spec=spec, fit_window=(100, 1000))
        rho, rank = 0.5, spec.coeffs.rank
        assert curve.slope_fit.slope <= -rho * rank
        np.testing.assert_allclose(curve.slope_fit.slope, -2 * rho * rank, atol=0.1)
        tail = d >= 100
        ratio = curve.mi_values[tail] / curve.gammas[tail] ** rank
        assert np.all(np.diff(ratio) <= 0)
