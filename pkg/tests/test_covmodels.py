from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from lsfield.covmodels import (
    GneitingCovariance,
    PowerLawBG,
    PurePower,
    Squared,
    WhiteNoise,
    correlation,
    gneiting_cov,
    lrd_exponent,
    non_separability,
)
from lsfield.exceptions import LSFieldParameterError


class TestPowerLawBG:
    def test_values(self, bg: PowerLawBG) -> None:
        np.testing.assert_allclose(correlation(bg, [0.0, 1.0, 1000.0]), [1.0, 2**-0.2, 0.72534], atol=5e-6)

    def test_squared(self, bg: PowerLawBG) -> None:
        sq = Squared(bg)
        np.testing.assert_allclose(correlation(sq, 1000.0), 0.52612, atol=5e-6)
        assert math.isclose(lrd_exponent(sq), 2 * lrd_exponent(bg))
        assert math.isclose(lrd_exponent(bg), 0.04)

    def test_monotone(self, bg: PowerLawBG) -> None:
        values = correlation(bg, np.linspace(0, 500, 200))
        assert np.all(np.diff(values) < 0)

    def test_invalid(self) -> None:
        with pytest.raises(LSFieldParameterError):
            PowerLawBG(2.5, 0.2)
        with pytest.raises(LSFieldParameterError):
            PowerLawBG(0.5, 0.0)

    def test_negative_distance(self, bg: PowerLawBG) -> None:
        with pytest.raises(LSFieldParameterError):
            bg.correlation(-1.0)

    def test_power_law_asymptote(self) -> None:
        model = PowerLawBG(1.0, 1.5)
        r = 1e8
        assert r**model.lrd_exponent * float(model.correlation(r)) == pytest.approx(1.0, rel=0.15)


class TestPurePower:
    def test_values(self) -> None:
        model = PurePower(1.5)
        np.testing.assert_allclose(model([0.0, 0.5, 1.0, 10.0]), [1.0, 1.0, 1.0, 10**-1.5])

    def test_exponent_beyond_dimension(self) -> None:
        with pytest.raises(LSFieldParameterError):
            PurePower(2.5, dim=2)
        with pytest.raises(LSFieldParameterError):
            PurePower(0.0)

    def test_outside_covariance_class_warns(self, caplog: pytest.LogCaptureFixture) -> None:
        with caplog.at_level(logging.WARNING, logger="lsfield"):
            PurePower(1.5)
        assert [getattr(r, "event", None) for r in caplog.records] == ["covariance-range"]

    def test_inside_covariance_class_is_quiet(self, caplog: pytest.LogCaptureFixture) -> None:
        with caplog.at_level(logging.WARNING, logger="lsfield"):
            PurePower(0.5)
        assert not caplog.records


class TestWhiteNoise:
    def test_values(self) -> None:
        model = WhiteNoise()
        np.testing.assert_array_equal(model([0.0, 1e-9, 3.0]), [1.0, 0.0, 0.0])
        assert math.isinf(model.lrd_exponent)


class TestGneiting:
    def test_values(self) -> None:
        gc = GneitingCovariance()
        np.testing.assert_allclose(gneiting_cov(gc, 0.0, 0.0), 1.0)
        np.testing.assert_allclose(gneiting_cov(gc, 0.0, 1.0), 0.61557, atol=5e-6)
        np.testing.assert_allclose(gneiting_cov(gc, 1.0, 0.0), 0.78458, atol=5e-6)

    def test_broadcast(self) -> None:
        gc = GneitingCovariance(sigma2=2.0)
        out = gc.covariance(np.array([0.0, 1.0, 2.0])[:, None], np.array([0.0, 1.0])[None, :])
        assert out.shape == (3, 2)
        assert out[0, 0] == 2.0
        assert np.all(np.diff(out, axis=0) < 0)
        assert np.all(np.diff(out, axis=1) < 0)

    def test_non_separability(self) -> None:
        ratio = non_separability(GneitingCovariance(), [0.0, 1.0, 5.0], [0.0, 1.0, 5.0])
        np.testing.assert_allclose(ratio[0], 1.0)
        np.testing.assert_allclose(ratio[:, 0], 1.0)
        assert not np.allclose(ratio[1:, 1:], 1.0)

    def test_invalid(self) -> None:
        with pytest.raises(LSFieldParameterError):
            GneitingCovariance(alpha=1.0, beta_psi=0.7)
        with pytest.raises(LSFieldParameterError):
            GneitingCovariance(gamma_phi=1.5)
        with pytest.raises(LSFieldParameterError):
            GneitingCovariance(delta=1.1, gamma_phi=1.0)

    def test_monotone_in_distance_and_lag(self) -> None:
        gc = GneitingCovariance()
        z = np.linspace(0.0, 20.0, 50)
        tau = np.linspace(0.0, 20.0, 50)
        grid = gneiting_cov(gc, z[:, None], tau[None, :])
        assert np.all(np.diff(grid, axis=0) <= 0)
        assert np.all(np.diff(grid, axis=1) <= 0)
        np.testing.assert_array_equal(gneiting_cov(gc, z[:, None], -tau[None, :]), grid)

    def test_to_dict_round_trip(self) -> None:
        gc = GneitingCovariance(sigma2=1.5, delta=0.9)
        assert GneitingCovariance(**gc.to_dict()) == gc
