"""Entropy, divergence, diversity and complexity primitives plus Gaussian oracles."""

from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from lsfield.exceptions import LSFieldAbsoluteContinuityError, LSFieldDensityError, LSFieldParameterError

if t.TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from lsfield.typings import ArrayLike, FloatArray

logger = logging.getLogger(__name__)

SATURATION = 1e300
NEGATIVE_SLACK = 1e-9
ORACLE_HALF_WIDTH = 8.0
ORACLE_POINTS = 801


def trapezoid_weights(nodes: ArrayLike) -> FloatArray:
    """Trapezoidal weights on a strictly increasing 1-D grid."""
    x = np.asarray(nodes, dtype=float)
    if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
        raise LSFieldDensityError("nodes", x.size, "need a strictly increasing 1-D grid of >= 2 points")
    dx = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


@dataclass(frozen=True)
class GriddedDensity:
    """Density values on a 1-D or tensor 2-D grid with quadrature weights."""

    nodes: tuple[FloatArray, ...]
    weights: FloatArray
    values: FloatArray
    atol: float = 1e-8

    def __post_init__(self) -> None:
        if self.weights.shape != self.values.shape:
            raise LSFieldDensityError("values", self.values.shape, f"shape must match weights {self.weights.shape}")
        if self.values.shape != tuple(len(n) for n in self.nodes):
            raise LSFieldDensityError("nodes", [len(n) for n in self.nodes], "must match the value grid")
        if np.any(self.weights <= 0):
            raise LSFieldDensityError("weights", float(self.weights.min()), "must be positive")
        if np.any(self.values < 0):
            raise LSFieldDensityError("values", float(self.values.min()), "density must be >= 0")
        mass = self.mass
        if abs(mass - 1.0) > self.atol:
            raise LSFieldDensityError("mass", mass, f"must integrate to 1 within {self.atol:g}")

    @classmethod
    def from_function(cls, f: Callable[..., ArrayLike], *nodes: ArrayLike, atol: float = 1e-8) -> GriddedDensity:
        """Evaluate f on a 1-D grid or on the tensor product of two grids, with trapezoidal weights."""
        axes = tuple(np.asarray(n, dtype=float) for n in nodes)
        if len(axes) not in (1, 2):
            raise LSFieldDensityError("nodes", len(axes), "1-D or 2-D grids only")
        ws = [trapezoid_weights(a) for a in axes]
        if len(axes) == 1:
            values = np.asarray(f(axes[0]), dtype=float)
            weights = ws[0]
        else:
            u, v = np.meshgrid(*axes, indexing="ij")
            values = np.asarray(f(u, v), dtype=float)
            weights = np.outer(ws[0], ws[1])
        return cls(nodes=axes, weights=weights, values=values, atol=atol)

    @classmethod
    def from_values(
        cls, values: ArrayLike, nodes: Sequence[ArrayLike], weights: ArrayLike, atol: float = 1e-8
    ) -> GriddedDensity:
        """Wrap precomputed values with explicit (e.g. Gauss) weights."""
        return cls(
            nodes=tuple(np.asarray(n, dtype=float) for n in nodes),
            weights=np.asarray(weights, dtype=float),
            values=np.asarray(values, dtype=float),
            atol=atol,
        )

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights * self.values))

    def product(self, other: GriddedDensity) -> GriddedDensity:
        """Tensor product f(x) g(y) of two 1-D densities."""
        return GriddedDensity(
            nodes=(*self.nodes, *other.nodes),
            weights=np.outer(self.weights, other.weights),
            values=np.outer(self.values, other.values),
            atol=max(self.atol, other.atol) * 2,
        )


@dataclass(frozen=True)
class FinitePMF:
    """Probability mass function over N states, or a joint N x N table."""

    probabilities: FloatArray

    def __post_init__(self) -> None:
        p = self.probabilities
        if np.any(p < 0):
            raise LSFieldDensityError("probabilities", float(p.min()), "entries must be >= 0")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-12:
            raise LSFieldDensityError("probabilities", total, "must sum to 1 within 1e-12")

    @classmethod
    def of(cls, probabilities: ArrayLike) -> FinitePMF:
        return cls(np.asarray(probabilities, dtype=float))

    def marginals(self) -> tuple[FloatArray, FloatArray]:
        return self.probabilities.sum(axis=1), self.probabilities.sum(axis=0)


class IndexValue(t.NamedTuple):
    """An exponential index with its saturation flag."""

    value: float
    saturated: bool = False


def _check_order(q: float) -> None:
    if not q > 0:
        raise LSFieldParameterError("q", q, "order must be positive")
    if q == 1:
        raise LSFieldParameterError("q", q, "q = 1 is the Shannon limit; use the Shannon counterpart")


def _check_shared(f: GriddedDensity, g: GriddedDensity) -> None:
    if f.values.shape != g.values.shape or not all(np.array_equal(a, b) for a, b in zip(f.nodes, g.nodes)):
        raise LSFieldDensityError("g", g.values.shape, "divergences need f and g on the same grid")
    violations = int(np.count_nonzero((f.values > 0) & (g.values <= 0)))
    if violations:
        raise LSFieldAbsoluteContinuityError(count=violations)


# --- ENTROPIES --- #


def shannon_entropy(f: GriddedDensity) -> float:
    """Differential entropy -sum w f ln f with 0 ln 0 = 0."""
    return float(np.sum(f.weights * special.entr(f.values)))


def renyi_entropy(f: GriddedDensity, q: float) -> float:
    """Renyi entropy of order q, (1 / (1 - q)) ln sum w f^q."""
    _check_order(q)
    positive = f.values > 0
    log_terms = np.log(f.weights[positive]) + q * np.log(f.values[positive])
    return float(special.logsumexp(log_terms) / (1.0 - q))


def kl_divergence(f: GriddedDensity, g: GriddedDensity) -> float:
    """Directed divergence sum w f ln(f / g) of f from g."""
    _check_shared(f, g)
    return float(np.sum(f.weights * special.rel_entr(f.values, g.values)))


def renyi_divergence(f: GriddedDensity, g: GriddedDensity, q: float) -> float:
    """Renyi divergence of order q, (1 / (q - 1)) ln sum w f (f / g)^(q - 1)."""
    _check_order(q)
    _check_shared(f, g)
    positive = f.values > 0
    log_terms = np.log(f.weights[positive]) + q * np.log(f.values[positive]) + (1.0 - q) * np.log(g.values[positive])
    return float(special.logsumexp(log_terms) / (q - 1.0))


# --- DIVERSITY AND COMPLEXITY --- #


def diversity_index(entropy_value: float) -> IndexValue:
    """Diversity index exp(H); saturates at 1e300 with a warning.

    Args:
        entropy_value (float): A finite entropy, or divergence for the relative flavor.
    Returns:
        The index and its saturation flag.
    """
    if entropy_value > math.log(SATURATION):
        logger.warning(
            "diversity index exp(%.6g) saturated at %g",
            entropy_value,
            SATURATION,
            extra={"event": "diversity-saturated", "entropy": entropy_value},
        )
        return IndexValue(SATURATION, True)
    return IndexValue(math.exp(entropy_value))


def relative_diversity_index(f: GriddedDensity, g: GriddedDensity, q: float = 1.0) -> IndexValue:
    """Relative diversity DI_q(f || g) = exp(H_q(f || g)); q = 1 uses the KL divergence."""
    divergence = kl_divergence(f, g) if q == 1 else renyi_divergence(f, g, q)
    return diversity_index(divergence)


def _entropy_of_order(f: GriddedDensity, q: float) -> float:
    return shannon_entropy(f) if q == 1 else renyi_entropy(f, q)


def _divergence_of_order(f: GriddedDensity, g: GriddedDensity, q: float) -> float:
    return kl_divergence(f, g) if q == 1 else renyi_divergence(f, g, q)


def complexity(f: GriddedDensity, alpha: float, beta: float) -> float:
    """Two-parameter complexity exp(H_alpha - H_beta) = DI_alpha / DI_beta."""
    if not (alpha > 0 and beta > 0):
        raise LSFieldParameterError("alpha,beta", (alpha, beta), "orders must be positive")
    if alpha == beta:
        return 1.0
    return math.exp(_entropy_of_order(f, alpha) - _entropy_of_order(f, beta))


def relative_complexity(f: GriddedDensity, g: GriddedDensity, alpha: float, beta: float) -> float:
    """Relative complexity exp(H_alpha(f || g) - H_beta(f || g))."""
    if not (alpha > 0 and beta > 0):
        raise LSFieldParameterError("alpha,beta", (alpha, beta), "orders must be positive")
    if alpha == beta:
        return 1.0
    return math.exp(_divergence_of_order(f, g, alpha) - _divergence_of_order(f, g, beta))


# --- FINITE LAWS --- #


def discrete_entropy(pmf: FinitePMF) -> float:
    """Shannon entropy of a finite law."""
    return float(np.sum(special.entr(pmf.probabilities)))


def discrete_mi(joint: FinitePMF) -> float:
    """Mutual information of a joint N x N pmf, KL(joint || product of marginals)."""
    row, col = joint.marginals()
    # kl_div keeps the -p + q terms, exact for small dependence
    return float(np.sum(special.kl_div(joint.probabilities, np.outer(row, col))))


def discrete_renyi_mi(joint: FinitePMF, q: float) -> float:
    """Renyi mutual information of order q of a joint N x N pmf."""
    _check_order(q)
    p = joint.probabilities
    row, col = joint.marginals()
    product = np.outer(row, col)
    positive = p > 0
    if np.any(product[positive] <= 0):
        raise LSFieldAbsoluteContinuityError(count=int(np.count_nonzero(product[positive] <= 0)))
    ratio = p[positive] / product[positive]
    # sum p (p/pq)^(q-1) - 1, kept in expm1 form for small dependence
    excess = float(np.sum(p[positive] * np.expm1((q - 1.0) * np.log(ratio))))
    return math.log1p(excess) / (q - 1.0)


def miller_madow_bias(states: int, samples: int) -> float:
    """First-order plug-in bias (N - 1)^2 / (2 n) of discrete MI over N x N cells."""
    return (states - 1) ** 2 / (2.0 * samples)


# --- GAUSSIAN ORACLES --- #


def gaussian_orthant_probability(h: float, k: float, rho: float) -> float:
    """P(X >= h, Y >= k) for a standard bivariate normal with correlation rho.

    Integrates the derivative of the orthant probability in rho.
    """
    if not -1 < rho < 1:
        raise LSFieldParameterError("rho", rho, "need |rho| < 1")

    def density(r: float) -> float:
        s = 1.0 - r * r
        return math.exp(-(h * h - 2 * r * h * k + k * k) / (2 * s)) / (2 * math.pi * math.sqrt(s))

    base = float(stats.norm.sf(h) * stats.norm.sf(k))
    if rho == 0:
        return base
    extra, _ = integrate.quad(density, 0.0, rho, epsabs=1e-14, epsrel=1e-12)
    return base + extra


def gaussian_mi_exact(c: float, q: float = 1.0) -> float:
    """Mutual information of order q of a standard bivariate normal with correlation c.

    q = 1 returns -ln(1 - c^2) / 2; other orders integrate the Renyi divergence between the
    joint law and the product of its marginals on a dense grid over [-8, 8]^2.

    Args:
        c (float): The correlation, |c| < 1.
        q (float): The order.
    Returns:
        The mutual information.
    """
    if not -1 < c < 1:
        raise LSFieldParameterError("c", c, "need |c| < 1")
    if q == 1:
        return -0.5 * math.log1p(-c * c)
    if not q > 0:
        raise LSFieldParameterError("q", q, "order must be positive")

    x = np.linspace(-ORACLE_HALF_WIDTH, ORACLE_HALF_WIDTH, ORACLE_POINTS)
    w = trapezoid_weights(x)
    u, v = np.meshgrid(x, x, indexing="ij")
    s = 1.0 - c * c
    log_joint = -(u * u - 2 * c * u * v + v * v) / (2 * s) - math.log(2 * math.pi * math.sqrt(s))
    log_product = -(u * u + v * v) / 2 - math.log(2 * math.pi)
    log_terms = np.log(np.outer(w, w)) + q * log_joint + (1.0 - q) * log_product
    return float(special.logsumexp(log_terms) / (q - 1.0))
