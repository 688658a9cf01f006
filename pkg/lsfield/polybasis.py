"""Orthonormal polynomial systems, expansion coefficients and Hermite/Laguerre rank."""

from __future__ import annotations

import logging
import math
import typing as t
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from lsfield.exceptions import (
    LSFieldDegreeError,
    LSFieldNotSquareIntegrableError,
    LSFieldParameterError,
    LSFieldRankError,
    LSFieldSupportError,
)

if t.TYPE_CHECKING:
    from collections.abc import Sequence

    from lsfield.typings import ArrayLike, FloatArray, RealFunction

logger = logging.getLogger(__name__)

DEFAULT_NODES = 256
DEFAULT_RANK_TOL = 1e-10
OVERFLOW_GUARD = 1e300


@dataclass(frozen=True)
class MarginalDensity:
    """Marginal law p(u) of the field, standard Gaussian or Gamma(shape, scale)."""

    family: t.Literal["gaussian", "gamma"] = "gaussian"
    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in ("gaussian", "gamma"):
            raise LSFieldParameterError("family", self.family, "expected 'gaussian' or 'gamma'")
        if self.family == "gamma":
            if not self.shape > 0:
                raise LSFieldParameterError("shape", self.shape, "must be positive")
            if not self.scale > 0:
                raise LSFieldParameterError("scale", self.scale, "must be positive")

    @classmethod
    def gaussian(cls) -> MarginalDensity:
        return cls("gaussian")

    @classmethod
    def gamma(cls, shape: float, scale: float = 1.0) -> MarginalDensity:
        return cls("gamma", shape, scale)

    @property
    def support(self) -> tuple[float, float]:
        if self.family == "gaussian":
            return (-math.inf, math.inf)
        return (0.0, math.inf)

    @property
    def law(self) -> t.Any:
        """Frozen scipy distribution of the marginal."""
        if self.family == "gaussian":
            return stats.norm()
        return stats.gamma(a=self.shape, scale=self.scale)

    def pdf(self, x: ArrayLike) -> FloatArray:
        return self.law.pdf(x)

    def sf(self, x: ArrayLike) -> FloatArray:
        return self.law.sf(x)

    def describe(self) -> str:
        if self.family == "gaussian":
            return "Gaussian"
        return f"Gamma({self.shape:g},{self.scale:g})"

    def gauss_rule(self, n: int = DEFAULT_NODES) -> tuple[FloatArray, FloatArray]:
        """Gauss rule for the marginal law.

        Weights are normalized so that ``sum(w * f(x))`` approximates ``E_p[f]``.

        Args:
            n (int): The number of nodes.
        Returns:
            Nodes and weights.
        """
        if n < 1:
            raise LSFieldParameterError("n", n, "node count must be positive")
        if self.family == "gaussian":
            x, w = special.roots_hermitenorm(n)
            return x, w / math.sqrt(2.0 * math.pi)
        x, w = special.roots_genlaguerre(n, self.shape - 1.0)
        return self.scale * x, w / math.gamma(self.shape)


class OrthonormalBasis(ABC):
    """Orthonormal polynomial system {e_k} under the marginal density, evaluable to degree K."""

    __slots__ = ("marginal", "max_degree")

    def __init__(self, marginal: MarginalDensity, max_degree: int) -> None:
        if max_degree < 1:
            raise LSFieldParameterError("max_degree", max_degree, "must be >= 1")
        self.marginal = marginal
        self.max_degree = max_degree

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} marginal={self.marginal.describe()} max_degree={self.max_degree}>"

    @property
    @abstractmethod
    def kind(self) -> str:
        """Name of the polynomial family."""

    @abstractmethod
    def _classical(self, k: int, x: FloatArray) -> FloatArray:
        """Classical (non-normalized) polynomial of degree k by three-term recurrence."""

    @abstractmethod
    def _log_norm(self, k: int) -> float:
        """Log of the exact L2(p) norm of the classical polynomial of degree k."""

    @abstractmethod
    def tail_integrals(self, t: float, degree: int) -> FloatArray:
        """Closed-form upper-tail integrals of the basis.

        Args:
            t (float): Lower limit of integration.
            degree (int): Highest degree K.
        Returns:
            ``[∫_t^b e_k(u) p(u) du for k in 0..K]``.
        """

    def _check(self, k: int, x: ArrayLike) -> FloatArray:
        if not 0 <= k <= self.max_degree:
            raise LSFieldDegreeError(k, self.max_degree)
        arr = np.asarray(x, dtype=float)
        a, b = self.marginal.support
        outside = (arr < a) | (arr > b) | np.isnan(arr)
        if np.any(outside):
            raise LSFieldSupportError(float(np.atleast_1d(arr)[np.argmax(np.atleast_1d(outside))]), (a, b))
        return arr

    def eval(self, k: int, x: ArrayLike) -> FloatArray:
        """Evaluate e_k at x.

        Args:
            k (int): Degree, 0 <= k <= K.
            x (ArrayLike): Points in the support.
        Returns:
            e_k(x), same shape as x.
        """
        arr = self._check(k, x)
        return self._classical(k, arr) / math.exp(self._log_norm(k))

    def table(self, x: ArrayLike, degree: int | None = None) -> FloatArray:
        """Evaluate e_0..e_K at x.

        Args:
            x (ArrayLike): Points in the support.
            degree (int, optional): Highest degree. Defaults to K.
        Returns:
            Array of shape (degree + 1, *x.shape).
        """
        degree = self.max_degree if degree is None else degree
        arr = self._check(degree, x)
        return np.stack([self._classical(k, arr) / math.exp(self._log_norm(k)) for k in range(degree + 1)])


class HermiteBasis(OrthonormalBasis):
    """Normalized probabilists' Hermite polynomials He_k / sqrt(k!)."""

    kind = "hermite"

    def _classical(self, k: int, x: FloatArray) -> FloatArray:
        prev = np.ones_like(x)
        if k == 0:
            return prev
        curr = np.array(x, dtype=float, copy=True)
        for j in range(1, k):
            prev, curr = curr, x * curr - j * prev
        return curr

    def _log_norm(self, k: int) -> float:
        return 0.5 * special.gammaln(k + 1)

    def tail_integrals(self, t: float, degree: int) -> FloatArray:
        out = np.empty(degree + 1)
        out[0] = stats.norm.sf(t)
        if math.isinf(t):
            out[1:] = 0.0
            return out
        density = stats.norm.pdf(t)
        for k in range(1, degree + 1):
            out[k] = density * self._classical(k - 1, np.asarray(t, dtype=float)) / math.exp(self._log_norm(k))
        return out


class LaguerreBasis(OrthonormalBasis):
    """Normalized generalized Laguerre polynomials L_k^(alpha)(u / scale), alpha = shape - 1."""

    kind = "laguerre"

    __slots__ = ("alpha",)

    def __init__(self, marginal: MarginalDensity, max_degree: int) -> None:
        if marginal.family != "gamma":
            raise LSFieldParameterError("marginal", marginal.describe(), "Laguerre basis needs a Gamma marginal")
        super().__init__(marginal, max_degree)
        self.alpha = marginal.shape - 1.0

    def _generalized(self, k: int, x: FloatArray, alpha: float) -> FloatArray:
        prev = np.ones_like(x)
        if k == 0:
            return prev
        curr = 1.0 + alpha - x
        for j in range(1, k):
            prev, curr = curr, ((2 * j + 1 + alpha - x) * curr - (j + alpha) * prev) / (j + 1)
        return curr

    def _classical(self, k: int, x: FloatArray) -> FloatArray:
        return self._generalized(k, np.asarray(x, dtype=float) / self.marginal.scale, self.alpha)

    def _log_norm(self, k: int) -> float:
        return 0.5 * (special.gammaln(k + self.alpha + 1) - special.gammaln(k + 1) - special.gammaln(self.alpha + 1))

    def tail_integrals(self, t: float, degree: int) -> FloatArray:
        out = np.empty(degree + 1)
        out[0] = self.marginal.sf(t)
        x = max(t, 0.0) / self.marginal.scale
        if math.isinf(x) or x == 0.0:
            out[1:] = 0.0
            return out
        # d/dx [x^(a+1) e^-x L_{k-1}^(a+1)(x)] = k x^a e^-x L_k^(a)(x), so the tail is minus that at x
        log_front = (self.alpha + 1) * math.log(x) - x - special.gammaln(self.alpha + 1)
        for k in range(1, degree + 1):
            poly = self._generalized(k - 1, np.asarray(x, dtype=float), self.alpha + 1)
            out[k] = -math.exp(log_front) * float(poly) / (k * math.exp(self._log_norm(k)))
        return out


def make_basis(marginal: MarginalDensity, max_degree: int) -> OrthonormalBasis:
    """Build the orthonormal system attached to a marginal.

    Args:
        marginal (MarginalDensity): The marginal law.
        max_degree (int): Highest degree K.
    Returns:
        Hermite basis for the Gaussian marginal, Laguerre basis for the Gamma marginal.
    """
    if marginal.family == "gaussian":
        return HermiteBasis(marginal, max_degree)
    return LaguerreBasis(marginal, max_degree)


@dataclass(frozen=True)
class CoefficientVector:
    """Expansion coefficients C_0..C_K of a function in an orthonormal basis."""

    values: FloatArray
    basis: OrthonormalBasis = field(repr=False)
    norm_sq: float
    rank: int | None = None

    @property
    def max_degree(self) -> int:
        return len(self.values) - 1

    def parseval(self) -> FloatArray:
        """Partial sums of C_k^2 for k = 0..K."""
        return np.cumsum(self.values**2)


def eval_basis(basis: OrthonormalBasis, k: int, x: ArrayLike) -> FloatArray:
    """Evaluate e_k(x); see :meth:`OrthonormalBasis.eval`."""
    return basis.eval(k, x)


def _find_rank(values: FloatArray, threshold: float) -> int | None:
    above = np.nonzero(np.abs(values[1:]) > threshold)[0]
    return int(above[0]) + 1 if above.size else None


def expand(
    g: RealFunction,
    basis: OrthonormalBasis,
    K: int | None = None,
    *,
    nodes: int = DEFAULT_NODES,
    breakpoints: Sequence[float] = (),
    rank_tol: float = DEFAULT_RANK_TOL,
) -> CoefficientVector:
    """Expand g in the basis, C_k = E_p[g e_k].

    Smooth functions use the Gauss rule of the marginal. Functions with jumps
    pass their ``breakpoints`` and are integrated piecewise by adaptive quadrature.

    Args:
        g (RealFunction): Vectorized real function on the support.
        basis (OrthonormalBasis): The basis.
        K (int, optional): Highest degree. Defaults to the basis max degree.
        nodes (int): Gauss nodes. Defaults to 256.
        breakpoints (Sequence[float]): Discontinuities of g.
        rank_tol (float): Rank tolerance relative to sqrt(E_p[g^2]).
    Returns:
        The coefficient vector with its rank (None when unranked).
    """
    K = basis.max_degree if K is None else K
    if not 1 <= K <= basis.max_degree:
        raise LSFieldDegreeError(K, basis.max_degree)

    if breakpoints:
        values, norm_sq = _expand_piecewise(g, basis, K, breakpoints)
    else:
        x, w = basis.marginal.gauss_rule(nodes)
        with np.errstate(over="ignore", invalid="ignore"):
            gx = np.broadcast_to(np.asarray(g(x), dtype=float), x.shape)
            norm_sq = float(np.sum(w * gx**2))
        if not math.isfinite(norm_sq) or norm_sq > OVERFLOW_GUARD:
            raise LSFieldNotSquareIntegrableError(norm_sq=norm_sq)
        values = basis.table(x, K) @ (w * gx)

    rank = _find_rank(values, rank_tol * math.sqrt(max(norm_sq, 0.0)))
    return CoefficientVector(values=values, basis=basis, norm_sq=norm_sq, rank=rank)


def _expand_piecewise(
    g: RealFunction, basis: OrthonormalBasis, K: int, breakpoints: Sequence[float]
) -> tuple[FloatArray, float]:
    a, b = basis.marginal.support
    edges = [a, *sorted(bp for bp in breakpoints if a < bp < b), b]
    pdf = basis.marginal.pdf

    def scalar(u: float) -> float:
        return float(np.asarray(g(np.asarray([u])), dtype=float).reshape(-1)[0])

    def piece(fn: t.Callable[[float], float], lo: float, hi: float) -> float:
        value, _ = integrate.quad(fn, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        return value

    norm_sq = sum(piece(lambda u: scalar(u) ** 2 * pdf(u), lo, hi) for lo, hi in zip(edges, edges[1:]))
    if not math.isfinite(norm_sq) or norm_sq > OVERFLOW_GUARD:
        raise LSFieldNotSquareIntegrableError(norm_sq=norm_sq)

    values = np.zeros(K + 1)
    for k in range(K + 1):
        values[k] = sum(
            piece(lambda u, k=k: scalar(u) * float(basis.eval(k, u)) * pdf(u), lo, hi)
            for lo, hi in zip(edges, edges[1:])
        )
    return values, norm_sq


def indicator_coeffs(basis: OrthonormalBasis, nu: float, K: int | None = None) -> CoefficientVector:
    """Closed-form coefficients of the exceedance indicator 1{u >= nu}.

    Args:
        basis (OrthonormalBasis): The basis.
        nu (float): The threshold.
        K (int, optional): Highest degree. Defaults to the basis max degree.
    Returns:
        The coefficient vector.
    """
    K = basis.max_degree if K is None else K
    values = basis.tail_integrals(nu, K)
    norm_sq = float(values[0])
    rank = _find_rank(values, DEFAULT_RANK_TOL * math.sqrt(norm_sq))
    return CoefficientVector(values=values, basis=basis, norm_sq=norm_sq, rank=rank)


def indicator_hermite_coeffs(nu: float, K: int) -> CoefficientVector:
    """Hermite coefficients G_k(nu) / sqrt(k!) of the indicator 1{u >= nu}.

    G_0 = 1 - Phi(nu) and G_k = phi(nu) He_{k-1}(nu) for k >= 1.

    Args:
        nu (float): The threshold.
        K (int): Highest degree, >= 1.
    Returns:
        The coefficient vector in the normalized Hermite basis.
    """
    return indicator_coeffs(HermiteBasis(MarginalDensity.gaussian(), K), nu, K)


def rank_of(coeffs: CoefficientVector, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Smallest m >= 1 with |C_m| above tolerance.

    Args:
        coeffs (CoefficientVector): Coefficients to degree K >= 1.
        rank_tol (float): Tolerance relative to sqrt(E_p[g^2]).
    Returns:
        The rank m.
    """
    threshold = rank_tol * math.sqrt(max(coeffs.norm_sq, 0.0))
    rank = _find_rank(coeffs.values, threshold)
    if rank is None:
        raise LSFieldRankError(max_degree=coeffs.max_degree, tolerance=threshold)
    return rank
