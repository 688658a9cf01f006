from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from lsfield.exceptions import (
    LSFieldDegreeError,
    LSFieldNotSquareIntegrableError,
    LSFieldParameterError,
    LSFieldRankError,
    LSFieldSupportError,
)
from lsfield.polybasis import (
    HermiteBasis,
    LaguerreBasis,
    MarginalDensity,
    eval_basis,
    expand,
    indicator_coeffs,
    indicator_hermite_coeffs,
    make_basis,
    rank_of,
)


class TestMarginalDensity:
    def test_gauss_rule_integrates_moments(self, gaussian: MarginalDensity, gamma5: MarginalDensity) -> None:
        x, w = gaussian.gauss_rule(40)
        np.testing.assert_allclose([w.sum(), w @ x, w @ x**2, w @ x**4], [1.0, 0.0, 1.0, 3.0], atol=1e-12)
        x, w = gamma5.gauss_rule(40)
        np.testing.assert_allclose([w.sum(), w @ x, w @ x**2], [1.0, 5.0, 30.0], rtol=1e-10)

    def test_gamma_parameters_validated(self) -> None:
        with pytest.raises(LSFieldParameterError):
            MarginalDensity.gamma(0.0)
        with pytest.raises(LSFieldParameterError):
            MarginalDensity.gamma(2.0, -1.0)

    def test_make_basis_picks_family(self, gaussian: MarginalDensity, gamma5: MarginalDensity) -> None:
        assert isinstance(make_basis(gaussian, 3), HermiteBasis)
        assert isinstance(make_basis(gamma5, 3), LaguerreBasis)
        with pytest.raises(LSFieldParameterError):
            LaguerreBasis(gaussian, 3)


class TestEvalBasis:
    def test_constant_mode(self, gaussian: MarginalDensity) -> None:
        basis = HermiteBasis(gaussian, 5)
        np.testing.assert_allclose(eval_basis(basis, 0, [-3.7, 0.0, 3.7]), 1.0)

    def test_hermite_values(self, gaussian: MarginalDensity) -> None:
        basis = HermiteBasis(gaussian, 5)
        np.testing.assert_allclose(eval_basis(basis, 2, 0.0), -1 / math.sqrt(2), atol=1e-12)
        np.testing.assert_allclose(eval_basis(basis, 3, 2.0), (8 - 6) / math.sqrt(6), atol=1e-12)

    def test_laguerre_values(self, gamma5: MarginalDensity) -> None:
        basis = LaguerreBasis(gamma5, 5)
        # L_1^(4)(x) = 5 - x
        np.testing.assert_allclose(eval_basis(basis, 1, 5.0), 0.0, atol=1e-12)
        np.testing.assert_allclose(eval_basis(basis, 1, 0.0), 5 / math.sqrt(5), atol=1e-12)

    @pytest.mark.parametrize("family", ["gaussian", "gamma"])
    def test_orthonormal_on_gauss_rule(self, family: str) -> None:
        marginal = MarginalDensity.gaussian() if family == "gaussian" else MarginalDensity.gamma(5.0, 2.0)
        basis = make_basis(marginal, 10)
        x, w = marginal.gauss_rule(64)
        table = basis.table(x)
        np.testing.assert_allclose((table * w) @ table.T, np.eye(11), atol=1e-8)

    def test_degree_out_of_range(self, gaussian: MarginalDensity) -> None:
        with pytest.raises(LSFieldDegreeError):
            eval_basis(HermiteBasis(gaussian, 3), 4, 0.0)

    def test_outside_support(self, gamma5: MarginalDensity) -> None:
        with pytest.raises(LSFieldSupportError):
            eval_basis(LaguerreBasis(gamma5, 3), 1, [1.0, -1.0])

    @pytest.mark.parametrize("family", ["gaussian", "gamma"])
    def test_recurrence_stable_to_degree_40(self, family: str) -> None:
        marginal = MarginalDensity.gaussian() if family == "gaussian" else MarginalDensity.gamma(5.0, 1.0)
        x = np.linspace(-8.0, 8.0, 161) if family == "gaussian" else np.linspace(0.0, 8.0, 81)
        assert np.all(np.isfinite(make_basis(marginal, 40).table(x)))

    def test_hermite_matches_monomials(self, gaussian: MarginalDensity) -> None:
        monomials = [[1], [1, 0], [1, 0, -1], [1, 0, -3, 0], [1, 0, -6, 0, 3], [1, 0, -10, 0, 15, 0]]
        x = np.linspace(-8.0, 8.0, 161)
        table = HermiteBasis(gaussian, 5).table(x)
        for k, coeffs in enumerate(monomials):
            exact = np.polyval(coeffs, x) / math.sqrt(math.factorial(k))
            scale = np.polyval(np.abs(coeffs), np.abs(x)) / math.sqrt(math.factorial(k))
            assert np.all(np.abs(table[k] - exact) <= 1e-12 * scale), k


class TestExpand:
    def test_constant_function(self, gaussian: MarginalDensity) -> None:
        coeffs = expand(np.ones_like, HermiteBasis(gaussian, 6))
        np.testing.assert_allclose(coeffs.values, np.eye(7)[0], atol=1e-12)
        assert coeffs.rank is None
        with pytest.raises(LSFieldRankError):
            rank_of(coeffs)

    def test_rank_two_polynomial(self, gaussian: MarginalDensity) -> None:
        coeffs = expand(lambda u: u**2 - 1, HermiteBasis(gaussian, 6))
        np.testing.assert_allclose(coeffs.values[2], math.sqrt(2), atol=1e-10)
        np.testing.assert_allclose(coeffs.norm_sq, 2.0, atol=1e-10)
        assert rank_of(coeffs) == 2

    def test_not_square_integrable(self, gaussian: MarginalDensity) -> None:
        with pytest.raises(LSFieldNotSquareIntegrableError):
            expand(lambda u: np.exp(u**2), HermiteBasis(gaussian, 4))

    def test_parseval_bounded(self, gaussian: MarginalDensity) -> None:
        coeffs = expand(np.tanh, HermiteBasis(gaussian, 12))
        assert np.all(np.diff(coeffs.parseval()) >= 0)
        assert coeffs.parseval()[-1] <= coeffs.norm_sq + 1e-10

    def test_odd_cubic_has_rank_one(self, gaussian: MarginalDensity) -> None:
        # u^3 = He_3 + 3 He_1
        coeffs = expand(lambda u: u**3, HermiteBasis(gaussian, 6))
        np.testing.assert_allclose(coeffs.values[[1, 3]], [3.0, math.sqrt(6)], atol=1e-10)
        assert rank_of(coeffs) == 1


class TestIndicatorCoefficients:
    def test_hermite_closed_form(self) -> None:
        coeffs = indicator_hermite_coeffs(0.95, 10)
        np.testing.assert_allclose(coeffs.values[0], stats.norm.sf(0.95), atol=1e-12)
        np.testing.assert_allclose(coeffs.values[:3], [0.17106, 0.25406, 0.17066], atol=5e-6)
        assert coeffs.rank == 1

    @pytest.mark.parametrize("nu", [-1.0, 0.0, 0.95, 2.0])
    def test_hermite_matches_piecewise_quadrature(self, gaussian: MarginalDensity, nu: float) -> None:
        basis = HermiteBasis(gaussian, 10)
        closed = indicator_coeffs(basis, nu)
        numeric = expand(lambda u: (u >= nu).astype(float), basis, breakpoints=(nu,))
        np.testing.assert_allclose(closed.values, numeric.values, atol=1e-8)

    def test_far_threshold_saturates(self) -> None:
        with np.errstate(over="raise", invalid="raise"):
            coeffs = indicator_hermite_coeffs(-40.0, 10)
        assert coeffs.values[0] == pytest.approx(1.0)
        assert np.all(np.isfinite(coeffs.values))
        np.testing.assert_allclose(coeffs.values[1:], 0.0, atol=1e-300)
        assert coeffs.rank is None

    def test_laguerre_matches_piecewise_quadrature(self) -> None:
        basis = LaguerreBasis(MarginalDensity.gamma(5.0, 1.0), 6)
        closed = indicator_coeffs(basis, 3.0)
        numeric = expand(lambda u: (u >= 3.0).astype(float), basis, breakpoints=(3.0,))
        np.testing.assert_allclose(closed.values, numeric.values, atol=1e-8)

    def test_threshold_below_support(self, gamma5: MarginalDensity) -> None:
        coeffs = indicator_coeffs(LaguerreBasis(gamma5, 4), -1.0)
        np.testing.assert_allclose(coeffs.values, np.eye(5)[0], atol=1e-15)
