"""Isotropic correlation families with LRD exponents and the Gneiting space-time class.

References
----------
Correlation families follow the usual parametric layout of variogram model
libraries: one small evaluation routine per family, vectorized over distances.
"""

from __future__ import annotations

import logging
import math
import typing as t
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from lsfield.exceptions import LSFieldParameterError

if t.TYPE_CHECKING:
    from lsfield.typings import ArrayLike, FloatArray, STR_DICT

logger = logging.getLogger(__name__)


class CorrelationModel(ABC):
    """Isotropic correlation function gamma(r) with a declared LRD exponent."""

    __slots__ = ("dim",)

    def __init__(self, dim: int = 2) -> None:
        if dim < 1:
            raise LSFieldParameterError("dim", dim, "spatial dimension must be >= 1")
        self.dim = dim

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} {self.describe()} dim={self.dim}>"

    def __call__(self, r: ArrayLike) -> FloatArray:
        return self.correlation(r)

    @abstractmethod
    def _evaluate(self, r: FloatArray) -> FloatArray:
        """Correlation at non-negative distances."""

    @property
    @abstractmethod
    def lrd_exponent(self) -> float:
        """rho such that gamma(r) = O(r^-rho)."""

    @abstractmethod
    def describe(self) -> str:
        """Short model descriptor used in provenance records."""

    @abstractmethod
    def to_dict(self) -> STR_DICT:
        """Config-style description of the model."""

    def correlation(self, r: ArrayLike) -> FloatArray:
        """Evaluate gamma(r).

        Args:
            r (ArrayLike): Distances, r >= 0.
        Returns:
            Correlation values in [-1, 1], same shape as r.
        """
        arr = np.asarray(r, dtype=float)
        if np.any(arr < 0):
            raise LSFieldParameterError("r", float(arr.min()), "distance must be >= 0")
        return self._evaluate(arr)

    def _check_lrd(self) -> None:
        rho = self.lrd_exponent
        if not 0 < rho < self.dim:
            raise LSFieldParameterError("lrd_exponent", rho, f"must lie in (0, d={self.dim})")
        if rho >= self.dim / 2:
            logger.warning(
                "LRD exponent %.4g is outside (0, d/2) required by the power-law covariance class",
                rho,
                extra={"event": "covariance-range", "rho": rho, "dim": self.dim},
            )


class PowerLawBG(CorrelationModel):
    """gamma(r) = 1 / (1 + r^beta)^gamma_exp, LRD exponent beta * gamma_exp."""

    __slots__ = ("beta", "gamma_exp")

    def __init__(self, beta: float, gamma_exp: float, dim: int = 2) -> None:
        super().__init__(dim)
        if not 0 < beta <= 2:
            raise LSFieldParameterError("beta", beta, "must lie in (0, 2]")
        if not gamma_exp > 0:
            raise LSFieldParameterError("gamma_exp", gamma_exp, "must be positive")
        self.beta = beta
        self.gamma_exp = gamma_exp
        self._check_lrd()

    def _evaluate(self, r: FloatArray) -> FloatArray:
        return (1.0 + r**self.beta) ** (-self.gamma_exp)

    @property
    def lrd_exponent(self) -> float:
        return self.beta * self.gamma_exp

    def describe(self) -> str:
        return f"PowerLawBG(beta={self.beta:g},gamma_exp={self.gamma_exp:g})"

    def to_dict(self) -> STR_DICT:
        return {"family": "power_law_bg", "beta": self.beta, "gamma_exp": self.gamma_exp, "dim": self.dim}


class PurePower(CorrelationModel):
    """gamma(r) = min(1, r^-rho)."""

    __slots__ = ("rho",)

    def __init__(self, rho: float, dim: int = 2) -> None:
        super().__init__(dim)
        self.rho = rho
        self._check_lrd()

    def _evaluate(self, r: FloatArray) -> FloatArray:
        with np.errstate(divide="ignore"):
            return np.where(r <= 1.0, 1.0, np.power(np.maximum(r, 1.0), -self.rho))

    @property
    def lrd_exponent(self) -> float:
        return self.rho

    def describe(self) -> str:
        return f"PurePower(rho={self.rho:g})"

    def to_dict(self) -> STR_DICT:
        return {"family": "pure_power", "rho": self.rho, "dim": self.dim}


class Squared(CorrelationModel):
    """Correlation of a chi-square subordinated field, gamma(r) = inner(r)^2."""

    __slots__ = ("inner",)

    def __init__(self, inner: CorrelationModel) -> None:
        super().__init__(inner.dim)
        self.inner = inner
        self._check_lrd()

    def _evaluate(self, r: FloatArray) -> FloatArray:
        return self.inner._evaluate(r) ** 2

    @property
    def lrd_exponent(self) -> float:
        return 2.0 * self.inner.lrd_exponent

    def describe(self) -> str:
        return f"Squared({self.inner.describe()})"

    def to_dict(self) -> STR_DICT:
        return {"family": "squared", "inner": self.inner.to_dict()}


class WhiteNoise(CorrelationModel):
    """Spatial white noise: gamma(0) = 1, gamma(r) = 0 for r > 0. Not LRD."""

    __slots__ = ()

    def _evaluate(self, r: FloatArray) -> FloatArray:
        return np.where(r == 0.0, 1.0, 0.0)

    @property
    def lrd_exponent(self) -> float:
        return math.inf

    def describe(self) -> str:
        return "WhiteNoise"

    def to_dict(self) -> STR_DICT:
        return {"family": "white_noise", "dim": self.dim}


def correlation(model: CorrelationModel, r: ArrayLike) -> FloatArray:
    """Evaluate gamma(r); see :meth:`CorrelationModel.correlation`."""
    return model.correlation(r)


def lrd_exponent(model: CorrelationModel) -> float:
    """Return rho such that gamma(r) = O(r^-rho)."""
    return model.lrd_exponent


# --- SPACE-TIME --- #


@dataclass(frozen=True)
class GneitingCovariance:
    """Gneiting covariance sigma2 / psi(tau^2)^(d/2) * phi(|z|^2 / psi(tau^2)).

    phi(u) = 1 / (1 + c u^gamma_phi)^delta and psi(u) = (1 + a u^alpha)^beta_psi.
    """

    sigma2: float = 1.0
    c: float = 1.0
    delta: float = 0.35
    gamma_phi: float = 0.2
    a: float = 1.0
    alpha: float = 0.3
    beta_psi: float = 0.7
    dim: int = 2

    def __post_init__(self) -> None:
        checks = (
            ("sigma2", self.sigma2, self.sigma2 >= 0, "must be >= 0"),
            ("c", self.c, self.c > 0, "must be positive"),
            ("delta", self.delta, self.delta > 0, "must be positive"),
            ("gamma_phi", self.gamma_phi, 0 < self.gamma_phi <= 1, "must lie in (0, 1]"),
            ("a", self.a, self.a > 0, "must be positive"),
            ("alpha", self.alpha, 0 < self.alpha <= 1, "must lie in (0, 1]"),
            ("beta_psi", self.beta_psi, 0 < self.beta_psi <= 1, "must lie in (0, 1]"),
            ("dim", self.dim, self.dim >= 1, "must be >= 1"),
        )
        for name, value, ok, reason in checks:
            if not ok:
                raise LSFieldParameterError(name, value, reason)
        if not 0 < 2 * self.gamma_phi * self.delta < self.dim:
            raise LSFieldParameterError("gamma_phi*delta", self.gamma_phi * self.delta, "need 0 < 2*gamma_phi*delta < d")
        if not 0 < 2 * self.alpha * self.beta_psi < 1:
            raise LSFieldParameterError("alpha*beta_psi", self.alpha * self.beta_psi, "need 0 < 2*alpha*beta_psi < 1")

    def phi(self, u: ArrayLike) -> FloatArray:
        return (1.0 + self.c * np.asarray(u, dtype=float) ** self.gamma_phi) ** (-self.delta)

    def psi(self, u: ArrayLike) -> FloatArray:
        return (1.0 + self.a * np.asarray(u, dtype=float) ** self.alpha) ** self.beta_psi

    def covariance(self, z_norm: ArrayLike, tau: ArrayLike) -> FloatArray:
        """Evaluate C(|z|, tau); arguments broadcast."""
        z = np.asarray(z_norm, dtype=float)
        if np.any(z < 0):
            raise LSFieldParameterError("z_norm", float(z.min()), "distance must be >= 0")
        psi = self.psi(np.asarray(tau, dtype=float) ** 2)
        return self.sigma2 / psi ** (self.dim / 2) * self.phi(z**2 / psi)

    def to_dict(self) -> STR_DICT:
        return {
            "sigma2": self.sigma2,
            "c": self.c,
            "delta": self.delta,
            "gamma_phi": self.gamma_phi,
            "a": self.a,
            "alpha": self.alpha,
            "beta_psi": self.beta_psi,
            "dim": self.dim,
        }


def gneiting_cov(gc: GneitingCovariance, z_norm: ArrayLike, tau: ArrayLike) -> FloatArray:
    """Evaluate the Gneiting covariance; see :meth:`GneitingCovariance.covariance`."""
    return gc.covariance(z_norm, tau)


def non_separability(gc: GneitingCovariance, zs: ArrayLike, taus: ArrayLike) -> FloatArray:
    """Ratio C(z, tau) C(0, 0) / (C(z, 0) C(0, tau)) on a grid.

    A separable covariance gives a matrix of ones.

    Args:
        gc (GneitingCovariance): The covariance.
        zs (ArrayLike): Spatial distances.
        taus (ArrayLike): Time lags.
    Returns:
        Matrix of shape (len(zs), len(taus)).
    """
    z = np.asarray(zs, dtype=float)[:, None]
    tau = np.asarray(taus, dtype=float)[None, :]
    joint = gc.covariance(z, tau)
    return joint * gc.covariance(0.0, 0.0) / (gc.covariance(z, 0.0) * gc.covariance(0.0, tau))
