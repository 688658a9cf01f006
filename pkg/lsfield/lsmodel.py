"""Truncated Lancaster-Sarmanov bivariate densities and their mutual information.

All quantities are written in terms of the truncated kernel
``Q(u, v) = sum_{k=1}^{M} gamma^k e_k(u) e_k(v)``, so that
``p(u, v, r) = p(u) p(v) [1 + Q(u, v)]`` with ``gamma = gamma(r)``.
Integrals against ``p(u) p(v)`` use the tensor Gauss rule of the marginal.
"""

from __future__ import annotations

import itertools
import logging
import math
import threading
import typing as t
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from lsfield.exceptions import (
    LSFieldCostGuardError,
    LSFieldDegenerateDistanceError,
    LSFieldInsufficientPointsError,
    LSFieldNegativeDensityError,
    LSFieldParameterError,
    LSFieldTruncationError,
)
from lsfield.infotheory import FinitePMF, discrete_mi, discrete_renyi_mi
from lsfield.polybasis import CoefficientVector, OrthonormalBasis, make_basis

if t.TYPE_CHECKING:
    from collections.abc import Sequence

    from lsfield.covmodels import CorrelationModel
    from lsfield.polybasis import MarginalDensity
    from lsfield.typings import ArrayLike, FloatArray, NegativityPolicy

logger = logging.getLogger(__name__)

QUAD_NODES = 200
CLAMP_FLOOR = 1e-12
COST_LIMIT = 10**7
UNDERFLOW = 1e-300
RENORMALIZE_TOL = 1e-10
TRUNCATION_TOL = 1e-6
BOUND_VALIDITY_GAMMA = 0.5


# --- SUBORDINATION --- #


@dataclass(frozen=True)
class Indicator:
    """Exceedance indicator 1{u >= nu}."""

    nu: float

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.nu,)

    @property
    def labels(self) -> tuple[float, ...]:
        return (0.0, 1.0)

    def __call__(self, u: ArrayLike) -> FloatArray:
        return (np.asarray(u, dtype=float) >= self.nu).astype(float)


@dataclass(frozen=True)
class FiniteLevels:
    """Step function taking ``labels[i]`` on the cell between consecutive breakpoints."""

    breakpoints: tuple[float, ...]
    labels: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.breakpoints) + 1:
            raise LSFieldParameterError("labels", self.labels, "need one label per cell (len(breakpoints) + 1)")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise LSFieldParameterError("breakpoints", self.breakpoints, "must be strictly increasing")
        if len(set(self.labels)) < 2:
            raise LSFieldParameterError("labels", self.labels, "need at least two distinct states")

    def __call__(self, u: ArrayLike) -> FloatArray:
        idx = np.searchsorted(np.asarray(self.breakpoints), np.asarray(u, dtype=float), side="right")
        return np.asarray(self.labels, dtype=float)[idx]


@dataclass(frozen=True)
class SubordinationSpec:
    """A finite-state transform g of the field with its cell integrals.

    ``cell_coeffs[i, k]`` is the integral of e_k p over the preimage of state i, so
    ``cell_coeffs[:, 0]`` holds the state probabilities.
    """

    g: Indicator | FiniteLevels
    states: tuple[float, ...]
    cell_coeffs: FloatArray = field(repr=False)
    coeffs: CoefficientVector = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @classmethod
    def build(cls, g: Indicator | FiniteLevels, basis: OrthonormalBasis) -> SubordinationSpec:
        """Integrate the basis over each preimage cell of g; equal labels merge into one state.

        Args:
            g (Indicator | FiniteLevels): The transform.
            basis (OrthonormalBasis): The basis of the field marginal.
        Returns:
            The subordination spec.
        """
        a, b = basis.marginal.support
        edges = [a, *g.breakpoints, b]
        K = basis.max_degree
        tails = [basis.tail_integrals(edge, K) for edge in edges]
        cells = np.array([lo - hi for lo, hi in zip(tails, tails[1:])])

        states = tuple(sorted(set(g.labels)))
        per_state = np.zeros((len(states), K + 1))
        for label, cell in zip(g.labels, cells):
            per_state[states.index(label)] += cell

        values = np.asarray(states) @ per_state
        norm_sq = float(np.asarray(states) ** 2 @ per_state[:, 0])
        above = np.nonzero(np.abs(values[1:]) > 1e-10 * math.sqrt(max(norm_sq, 0.0)))[0]
        rank = int(above[0]) + 1 if above.size else None
        coeffs = CoefficientVector(values=values, basis=basis, norm_sq=norm_sq, rank=rank)
        return cls(g=g, states=states, cell_coeffs=per_state, coeffs=coeffs)


# --- RESULTS --- #


class SlopeFit(t.NamedTuple):
    """Least-squares fit of ln MI against ln d over a window."""

    slope: float
    intercept: float
    stderr: float
    window: tuple[float, float]
    points: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class MICurve:
    """MI values along a distance sweep, with optional bound curves and the tail slope fit."""

    distances: FloatArray
    mi_values: FloatArray
    gammas: FloatArray
    slope_fit: SlopeFit
    variant: str
    q: float | None = None
    lower_bound: FloatArray | None = None
    upper_bound: FloatArray | None = None

    def __post_init__(self) -> None:
        n = len(self.distances)
        for name in ("mi_values", "gammas", "lower_bound", "upper_bound"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise LSFieldParameterError(name, len(arr), f"must have the same length as distances ({n})")


# --- MODEL --- #


class LSModel:
    """Truncated Lancaster-Sarmanov model: marginal, basis, correlation and truncation order M.

    The Gauss rule, the basis table on its nodes and the coefficients of the
    marginal density are computed at construction; the model is immutable.
    Multi-index moments for the multinomial Renyi path are built lazily under a lock.
    """

    __slots__ = (
        "marginal",
        "basis",
        "corr",
        "truncation",
        "quad_nodes",
        "negativity_policy",
        "_x",
        "_w",
        "_ww",
        "_table",
        "_density_coeffs",
        "_moment_polys",
        "_moment_lock",
    )

    def __init__(
        self,
        marginal: MarginalDensity,
        corr: CorrelationModel,
        truncation: int = 5,
        *,
        basis: OrthonormalBasis | None = None,
        quad_nodes: int = QUAD_NODES,
        negativity_policy: NegativityPolicy = "clamp",
    ) -> None:
        if truncation < 1:
            raise LSFieldParameterError("truncation", truncation, "M must be >= 1")
        basis = basis or make_basis(marginal, truncation)
        if basis.marginal != marginal:
            raise LSFieldParameterError("basis", repr(basis), "basis marginal differs from the model marginal")
        if truncation > basis.max_degree:
            raise LSFieldParameterError("truncation", truncation, f"M must be <= basis max degree {basis.max_degree}")
        if negativity_policy not in ("clamp", "reject"):
            raise LSFieldParameterError("negativity_policy", negativity_policy, "expected 'clamp' or 'reject'")
        if quad_nodes < 2:
            raise LSFieldParameterError("quad_nodes", quad_nodes, "need at least 2 nodes per axis")

        self.marginal = marginal
        self.basis = basis
        self.corr = corr
        self.truncation = truncation
        self.quad_nodes = quad_nodes
        self.negativity_policy = negativity_policy

        self._x, self._w = marginal.gauss_rule(quad_nodes)
        self._ww = np.outer(self._w, self._w)
        with np.errstate(over="ignore", invalid="ignore"):
            self._table = basis.table(self._x, truncation)
        # C_j^p = E_p[p e_j]
        self._density_coeffs = self._table @ (self._w * marginal.pdf(self._x))
        self._moment_polys: dict[int, FloatArray] = {}
        self._moment_lock = threading.Lock()

    def __repr__(self) -> str:
        return (
            f"<LSModel marginal={self.marginal.describe()} basis={self.basis.kind} corr={self.corr.describe()} "
            f"M={self.truncation} nodes={self.quad_nodes} policy={self.negativity_policy}>"
        )

    @property
    def density_coeffs(self) -> FloatArray:
        """C_0^p..C_M^p, the coefficients of the marginal density in its own basis."""
        return self._density_coeffs.copy()

    def gamma(self, r: float) -> float:
        """Correlation at distance r."""
        return float(self.corr.correlation(r))

    def describe(self) -> dict[str, t.Any]:
        return {
            "marginal": self.marginal.describe(),
            "basis": self.basis.kind,
            "corr": self.corr.to_dict(),
            "rho": self.corr.lrd_exponent,
            "truncation": self.truncation,
            "quad_nodes": self.quad_nodes,
            "negativity_policy": self.negativity_policy,
        }

    # --- kernel on the quadrature grid --- #

    def _powers(self, gamma: float) -> FloatArray:
        return gamma ** np.arange(1, self.truncation + 1)

    def kernel(self, gamma: float) -> FloatArray:
        """Truncated kernel Q on the tensor Gauss grid, shape (n, n)."""
        e = self._table[1:]
        with np.errstate(over="ignore", invalid="ignore"):
            return (e * self._powers(gamma)[:, None]).T @ e

    def _bracket(self, gamma: float, r: float | None = None) -> tuple[FloatArray, float]:
        """Bracket 1 + Q with the negativity policy applied, and the mass added by clamping."""
        raw = 1.0 + self.kernel(gamma)
        negative = (raw < 0) & (self._ww > 0)
        if self.negativity_policy == "reject" and np.any(negative):
            i, j = np.argwhere(negative)[0]
            raise LSFieldNegativeDensityError(u=float(self._x[i]), v=float(self._x[j]), r=r, value=float(raw[i, j]))
        bracket = np.maximum(raw, CLAMP_FLOOR)
        clamped = float(np.sum(self._ww * (bracket - raw)))
        if clamped > 0:
            logger.debug(
                "truncated density clamped at gamma=%.6g, added mass %.3g",
                gamma,
                clamped,
                extra={"event": "density-clamped", "gamma": gamma, "mass": clamped},
            )
        return bracket, clamped

    def negativity_diagnostic_at(self, gamma: float) -> float:
        """Probability mass the clamp floor adds to the truncated density at this gamma."""
        raw = 1.0 + self.kernel(gamma)
        return float(np.sum(self._ww * (np.maximum(raw, CLAMP_FLOOR) - raw)))

    # --- information at a correlation value --- #

    @staticmethod
    def _check_gamma(gamma: float) -> None:
        if not abs(gamma) < 1:
            raise LSFieldDegenerateDistanceError(gamma=gamma)

    def shannon_mi_at(self, gamma: float, r: float | None = None) -> float:
        """Shannon MI of the truncated density at correlation gamma."""
        if gamma == 0:
            return 0.0
        bracket, clamped = self._bracket(gamma, r)
        q = bracket - 1.0
        # sum ww (B ln B - Q) + sum ww Q, the second sum is the clamped mass
        integrand = bracket * np.log(bracket) - q
        return float(np.sum(self._ww * integrand)) + clamped

    def renyi_mi_at(self, gamma: float, q: float, r: float | None = None) -> float:
        """Renyi MI of order q of the truncated density at correlation gamma."""
        _check_order(q)
        self._check_gamma(gamma)
        if gamma == 0:
            return 0.0
        bracket, clamped = self._bracket(gamma, r)
        integrand = np.expm1(q * np.log(bracket)) - q * (bracket - 1.0)
        excess = float(np.sum(self._ww * integrand)) + q * clamped
        return math.log1p(excess) / (q - 1.0)

    def shannon_mi_series_at(self, gamma: float) -> float:
        self._check_gamma(gamma)
        k = np.arange(1, self.truncation + 1)
        cp = self._density_coeffs[1:]
        return float(np.sum(gamma**k * cp**2) + np.sum(gamma ** (2 * k)))

    def mi_bounds_at(self, gamma: float) -> tuple[float, float]:
        self._check_gamma(gamma)
        if gamma == 0:
            return 0.0, 0.0
        squares = self._density_coeffs[1:] ** 2
        ratio = gamma / (1.0 - gamma)
        lower = float(squares.min()) * ratio
        upper = float(squares.max()) * ratio + gamma**2 / (1.0 - gamma**2)
        return lower, upper

    def _moment_poly(self, q: int) -> FloatArray:
        """Coefficients c_s of sum over {0..M}^q of gamma^(sum k) E_p[prod e_k]^2, grouped by s."""
        with self._moment_lock:
            if q in self._moment_polys:
                return self._moment_polys[q]
            M = self.truncation
            cost = q * M**q
            if cost > COST_LIMIT:
                raise LSFieldCostGuardError(cost=cost, limit=COST_LIMIT)
            # products reach degree q M; the Gauss rule is exact below 2n
            n = max(self.quad_nodes, (q * M) // 2 + 1)
            x, w = self.marginal.gauss_rule(n)
            with np.errstate(over="ignore", invalid="ignore"):
                table = self.basis.table(x, M)
            poly = np.zeros(q * M + 1)
            q_factorial = math.factorial(q)
            for combo in itertools.combinations_with_replacement(range(M + 1), q):
                counts = np.bincount(combo, minlength=M + 1)
                multiplicity = q_factorial // math.prod(math.factorial(int(c)) for c in counts)
                moment = float(np.sum(w * np.prod(table[list(combo)], axis=0)))
                poly[sum(combo)] += multiplicity * moment**2
            poly[0] = 0.0
            self._moment_polys[q] = poly
            return poly

    def renyi_mi_multinomial_at(self, gamma: float, q: int) -> float:
        if int(q) != q or q < 2:
            raise LSFieldParameterError("q", q, "multinomial path needs an integer q >= 2")
        self._check_gamma(gamma)
        poly = self._moment_poly(int(q))
        if gamma == 0:
            return 0.0
        excess = float(np.sum(poly * gamma ** np.arange(len(poly))))
        return math.log1p(excess) / (q - 1.0)

    def subordinated_joint_pmf_at(self, spec: SubordinationSpec, gamma: float) -> FinitePMF:
        b = spec.cell_coeffs[:, : self.truncation + 1]
        if b.shape[1] < self.truncation + 1:
            raise LSFieldParameterError("spec", spec.coeffs.max_degree, f"cell integrals needed to degree {self.truncation}")
        weights = np.concatenate(([1.0], self._powers(gamma)))
        joint = np.clip((b * weights) @ b.T, 0.0, 1.0)
        total = float(joint.sum())
        drift = abs(total - 1.0)
        if drift > TRUNCATION_TOL:
            raise LSFieldTruncationError(gamma=gamma, drift=drift)
        if drift > RENORMALIZE_TOL:
            logger.warning(
                "subordinated pmf renormalized by %.3g at gamma=%.6g",
                drift,
                gamma,
                extra={"event": "renormalized-pmf", "gamma": gamma, "drift": drift},
            )
        return FinitePMF(joint / total)

    def subordinated_mi_at(self, spec: SubordinationSpec, gamma: float) -> float:
        return max(discrete_mi(self.subordinated_joint_pmf_at(spec, gamma)), 0.0)

    def subordinated_renyi_mi_at(self, spec: SubordinationSpec, gamma: float, q: float) -> float:
        return max(discrete_renyi_mi(self.subordinated_joint_pmf_at(spec, gamma), q), 0.0)

    def subordinate(self, g: Indicator | FiniteLevels) -> SubordinationSpec:
        """Build the subordination spec of g against this model's basis."""
        return SubordinationSpec.build(g, self.basis)


def _check_order(q: float) -> None:
    if not q > 0 or q == 1:
        raise LSFieldParameterError("q", q, "Renyi order must be positive and != 1")


# --- OPERATIONS --- #


def bivariate_density(model: LSModel, u: ArrayLike, v: ArrayLike, r: float) -> FloatArray:
    """Truncated Lancaster-Sarmanov density p(u) p(v) [1 + sum gamma(r)^k e_k(u) e_k(v)].

    Args:
        model (LSModel): The model.
        u (ArrayLike): First component values, in the support.
        v (ArrayLike): Second component values, broadcastable with u.
        r (float): Distance, r >= 0.
    Returns:
        Density values with the negativity policy applied.
    """
    gamma = model.gamma(r)
    uu, vv = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    M = model.truncation
    eu = model.basis.table(uu, M)[1:]
    ev = model.basis.table(vv, M)[1:]
    powers = (gamma ** np.arange(1, M + 1)).reshape((M,) + (1,) * uu.ndim)
    bracket = 1.0 + np.sum(powers * (eu * ev), axis=0)
    if np.any(bracket < 0):
        if model.negativity_policy == "reject":
            idx = np.unravel_index(np.argmax(bracket < 0), bracket.shape) if bracket.ndim else ()
            raise LSFieldNegativeDensityError(u=float(uu[idx]), v=float(vv[idx]), r=r, value=float(bracket[idx]))
        bracket = np.maximum(bracket, CLAMP_FLOOR)
    pu = model.marginal.pdf(uu)
    pv = model.marginal.pdf(vv)
    return pu * pv * bracket


def shannon_mi_quadrature(model: LSModel, r: float) -> float:
    """Shannon MI at distance r by tensor Gauss quadrature of p ln(p / (p p))."""
    return model.shannon_mi_at(model.gamma(r), r)


def shannon_mi_series(model: LSModel, r: float) -> float:
    """Series sum_j gamma^j (C_j^p)^2 + sum_i gamma^(2i) from the logarithm expansion."""
    return model.shannon_mi_series_at(model.gamma(r))


def mi_bounds(model: LSModel, r: float) -> tuple[float, float]:
    """Lower and upper bound curves built from the extreme squared density coefficients.

    Returns:
        ``(min (C_j^p)^2 gamma / (1 - gamma), max (C_j^p)^2 gamma / (1 - gamma) + gamma^2 / (1 - gamma^2))``.
    """
    return model.mi_bounds_at(model.gamma(r))


def renyi_mi_quadrature(model: LSModel, r: float, q: float) -> float:
    """Renyi MI of order q at distance r, (1 / (q - 1)) ln E[(1 + Q)^q] by quadrature."""
    return model.renyi_mi_at(model.gamma(r), q, r)


def renyi_mi_multinomial(model: LSModel, r: float, q: int) -> float:
    """Renyi MI of integer order q from the multinomial expansion of (1 + Q)^q.

    Multi-indices run over {0..M}^q so every cross term of the power is kept; at
    q = 2 this is the sum over {1..M}^2 since E_p[e_k] = 0 for k >= 1.
    """
    return model.renyi_mi_multinomial_at(model.gamma(r), q)


def subordinated_joint_pmf(model: LSModel, spec: SubordinationSpec, r: float) -> FinitePMF:
    """Joint law of g(Y(x)), g(Y(y)) as P_ij = a_i a_j + sum gamma^k b_ik b_jk."""
    return model.subordinated_joint_pmf_at(spec, model.gamma(r))


def subordinated_mi(model: LSModel, spec: SubordinationSpec, r: float) -> float:
    """Shannon MI of the finite-state subordinated field."""
    return model.subordinated_mi_at(spec, model.gamma(r))


def subordinated_renyi_mi(model: LSModel, spec: SubordinationSpec, r: float, q: float) -> float:
    """Renyi MI of order q of the finite-state subordinated field."""
    return model.subordinated_renyi_mi_at(spec, model.gamma(r), q)


def negativity_diagnostic(model: LSModel, r: float) -> float:
    """Mass added by clamping the truncated density at distance r; 0 when it is nonnegative."""
    return model.negativity_diagnostic_at(model.gamma(r))


def fit_slope(
    distances: ArrayLike,
    values: ArrayLike,
    window: tuple[float, float] | None = None,
    *,
    min_points: int = 3,
    strict: bool = False,
) -> SlopeFit:
    """Least-squares slope of ln MI against ln d over a window.

    The default window is the last decade of distances. Values at or below 1e-300
    inside the window shrink its upper end to the last point before the first
    underflow.

    Args:
        distances (ArrayLike): Increasing distances.
        values (ArrayLike): MI values.
        window (tuple[float, float], optional): ``(d_lo, d_hi)``.
        min_points (int): Points needed for a fit.
        strict (bool): Raise instead of returning a flagged fit.
    Returns:
        The fit; ``error`` is set when it could not be computed.
    """
    d = np.asarray(distances, dtype=float)
    y = np.asarray(values, dtype=float)
    if d.shape != y.shape:
        raise LSFieldParameterError("values", y.shape, f"must match distances {d.shape}")
    if d.size == 0:
        raise LSFieldParameterError("distances", 0, "need at least one distance")
    lo, hi = window if window is not None else (float(d[-1]) / 10.0, float(d[-1]))
    if lo > hi:
        raise LSFieldParameterError("window", (lo, hi), "need d_lo <= d_hi")

    inside = (d >= lo) & (d <= hi)
    underflow = inside & ~(y > UNDERFLOW)
    if np.any(underflow):
        first = int(np.argmax(underflow))
        earlier = d[inside & (d < d[first])]
        new_hi = float(earlier[-1]) if earlier.size else lo
        logger.warning(
            "MI underflow at d=%g, fit window shrunk to [%g, %g]",
            d[first],
            lo,
            new_hi,
            extra={"event": "window-shrunk", "low": lo, "high": hi, "new_high": new_hi},
        )
        hi = new_hi
        inside = (d >= lo) & (d <= hi) & (y > UNDERFLOW)

    count = int(np.count_nonzero(inside))
    if count < min_points:
        if strict:
            raise LSFieldInsufficientPointsError(count=count, low=lo, high=hi, needed=min_points)
        return SlopeFit(math.nan, math.nan, math.nan, (lo, hi), count, "insufficient positive points")

    fit = stats.linregress(np.log(d[inside]), np.log(y[inside]))
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.stderr), (lo, hi), count)


def mi_curve(
    model: LSModel,
    distances: Sequence[float] | FloatArray,
    *,
    spec: SubordinationSpec | None = None,
    q: float | None = None,
    fit_window: tuple[float, float] | None = None,
    workers: int | None = None,
) -> MICurve:
    """Evaluate an MI variant along increasing distances and fit its tail slope.

    Shannon on the base field also gets the bound curves, NaN where gamma >= 1.

    Args:
        model (LSModel): The model.
        distances (Sequence[float]): Increasing distances.
        spec (SubordinationSpec, optional): Finite-state transform; None for the base field.
        q (float, optional): Renyi order; None for Shannon.
        fit_window (tuple[float, float], optional): Slope window, defaults to the last decade.
        workers (int, optional): Threads for the per-distance evaluations.
    Returns:
        The curve.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 1 or d.size == 0 or np.any(np.diff(d) <= 0):
        raise LSFieldParameterError("distances", d.size, "need a non-empty strictly increasing vector")
    if fit_window is not None and (fit_window[0] < d[0] or fit_window[1] > d[-1]):
        raise LSFieldParameterError("fit_window", fit_window, f"must lie within [{d[0]:g}, {d[-1]:g}]")
    gammas = model.corr.correlation(d)

    if spec is None and q is None:
        variant = "shannon"
        fn: t.Callable[[float], float] = model.shannon_mi_at
    elif spec is None:
        variant = "renyi"
        fn = lambda g: model.renyi_mi_at(g, t.cast(float, q))  # noqa: E731
    elif q is None:
        variant = "subordinated"
        fn = lambda g: model.subordinated_mi_at(spec, g)  # noqa: E731
    else:
        variant = "subordinated-renyi"
        fn = lambda g: model.subordinated_renyi_mi_at(spec, g, q)  # noqa: E731

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = np.fromiter(pool.map(fn, gammas.tolist()), dtype=float, count=d.size)
    else:
        values = np.array([fn(g) for g in gammas.tolist()])

    lower = upper = None
    if variant == "shannon":
        lower = np.full(d.size, np.nan)
        upper = np.full(d.size, np.nan)
        for i, g in enumerate(gammas.tolist()):
            if abs(g) < 1:
                lower[i], upper[i] = model.mi_bounds_at(g)

    return MICurve(
        distances=d,
        mi_values=values,
        gammas=gammas,
        slope_fit=fit_slope(d, values, fit_window),
        variant=variant,
        q=q,
        lower_bound=lower,
        upper_bound=upper,
    )
