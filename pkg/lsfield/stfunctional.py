"""Space-time functional layer: time-basis projections of a Gneiting field and MI-operator surfaces.

Field values at a site are projected on an orthonormal cosine basis of L2[0, T].
The correlation between the projections on phi_n at x and phi_m at y feeds the
scalar Lancaster-Sarmanov engine, and the resulting matrix of MI values is
reconstructed as a surface K(t, s) = sum S_nm phi_n(t) phi_m(s).
"""

from __future__ import annotations

import logging
import math
import typing as t
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg, special
from scipy.spatial.distance import cdist

from lsfield.covmodels import WhiteNoise
from lsfield.exceptions import (
    LSFieldDegenerateProjectionError,
    LSFieldFactorizationError,
    LSFieldGridCapError,
    LSFieldParameterError,
)
from lsfield.fieldsim import FieldRealization, child_seed
from lsfield.lsmodel import LSModel, SlopeFit, fit_slope
from lsfield.polybasis import MarginalDensity

if t.TYPE_CHECKING:
    from collections.abc import Sequence

    from lsfield.covmodels import GneitingCovariance
    from lsfield.fieldsim import GridSpec
    from lsfield.typings import ArrayLike, FloatArray, STR_DICT

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 100.0
TIME_NODES = 256
MIN_VARIANCE = 1e-14
ST_CHOLESKY_CAP = 8192
JITTER = 1e-10
MESH_POINTS = 101


class TimeBasis:
    """Orthonormal cosine basis of L2[0, T]: phi_1 = 1/sqrt(T), phi_n = sqrt(2/T) cos((n-1) pi t / T)."""

    __slots__ = ("count", "horizon", "_nodes", "_weights", "_values")

    kind = "cosine"

    def __init__(self, count: int, horizon: float = DEFAULT_HORIZON, nodes: int = TIME_NODES) -> None:
        if count < 1:
            raise LSFieldParameterError("count", count, "need at least one basis function")
        if not horizon > 0:
            raise LSFieldParameterError("horizon", horizon, "must be positive")
        self.count = count
        self.horizon = horizon
        x, w = special.roots_legendre(nodes)
        self._nodes = horizon / 2 * (x + 1)
        self._weights = horizon / 2 * w
        self._values = self.evaluate(self._nodes)

    def __repr__(self) -> str:
        return f"<TimeBasis kind={self.kind} count={self.count} horizon={self.horizon:g}>"

    @property
    def nodes(self) -> FloatArray:
        return self._nodes

    @property
    def weights(self) -> FloatArray:
        return self._weights

    def evaluate(self, times: ArrayLike) -> FloatArray:
        """phi_1..phi_count at the given times, shape (count, len(times))."""
        tt = np.atleast_1d(np.asarray(times, dtype=float))
        if np.any((tt < 0) | (tt > self.horizon)):
            raise LSFieldParameterError("times", float(tt.min()), f"must lie in [0, {self.horizon:g}]")
        freq = np.arange(self.count)[:, None] * math.pi / self.horizon
        out = math.sqrt(2.0 / self.horizon) * np.cos(freq * tt[None, :])
        out[0] = 1.0 / math.sqrt(self.horizon)
        return out

    def gram(self) -> FloatArray:
        """Inner products <phi_n, phi_m> by Gauss-Legendre quadrature."""
        return (self._values * self._weights) @ self._values.T

    def project_kernel(self, kernel: FloatArray) -> FloatArray:
        """Double integrals of kernel(t_i, s_j) phi_n(t) phi_m(s) on the Gauss nodes."""
        weighted = self._values * self._weights
        return weighted @ kernel @ weighted.T

    def to_dict(self) -> STR_DICT:
        return {"kind": self.kind, "count": self.count, "horizon": self.horizon, "nodes": len(self._nodes)}


@dataclass(frozen=True)
class CorrelationOperatorEntry:
    """Correlation between the projections on phi_n at x and phi_m at y, |x - y| = r."""

    r: float
    n: int
    m: int
    value: float


def _projected_covariance(gc: GneitingCovariance, basis: TimeBasis, r: float) -> FloatArray:
    lags = basis.nodes[:, None] - basis.nodes[None, :]
    return basis.project_kernel(gc.covariance(r, np.abs(lags)))


def correlation_operator_matrix(gc: GneitingCovariance, basis: TimeBasis, r: float) -> FloatArray:
    """All normalized projection correlations at distance r, shape (count, count).

    Args:
        gc (GneitingCovariance): The space-time covariance.
        basis (TimeBasis): The time basis.
        r (float): Spatial distance.
    Returns:
        The symmetric correlation operator matrix.
    """
    if r < 0:
        raise LSFieldParameterError("r", r, "distance must be >= 0")
    variances = np.diag(_projected_covariance(gc, basis, 0.0)).copy()
    small = np.nonzero(variances < MIN_VARIANCE)[0]
    if small.size:
        index = int(small[0])
        raise LSFieldDegenerateProjectionError(index=index + 1, variance=float(variances[index]))
    cov = _projected_covariance(gc, basis, r)
    cov = (cov + cov.T) / 2
    scale = np.sqrt(variances)
    return cov / np.outer(scale, scale)


def _check_index(basis: TimeBasis, n: int, m: int) -> None:
    for name, idx in (("n", n), ("m", m)):
        if not 1 <= idx <= basis.count:
            raise LSFieldParameterError(name, idx, f"basis index out of range 1..{basis.count}")


def correlation_operator(gc: GneitingCovariance, basis: TimeBasis, r: float, n: int, m: int) -> CorrelationOperatorEntry:
    """Correlation operator entry for basis indices n and m (1-based)."""
    _check_index(basis, n, m)
    value = float(correlation_operator_matrix(gc, basis, r)[n - 1, m - 1])
    return CorrelationOperatorEntry(r=r, n=n, m=m, value=value)


def scalar_engine(
    marginal: MarginalDensity | None = None, truncation: int = 10, quad_nodes: int = 200, dim: int = 2
) -> LSModel:
    """Scalar model fed with operator correlations; its own correlation model is never evaluated."""
    return LSModel(marginal or MarginalDensity.gaussian(), WhiteNoise(dim), truncation, quad_nodes=quad_nodes)


def mi_operator_entry(
    gc: GneitingCovariance,
    basis: TimeBasis,
    r: float,
    n: int,
    m: int,
    *,
    engine: LSModel | None = None,
    truncation: int = 10,
) -> float:
    """Shannon MI between the projections on phi_n at x and phi_m at y.

    Args:
        gc (GneitingCovariance): The space-time covariance.
        basis (TimeBasis): The time basis.
        r (float): Spatial distance.
        n (int): Basis index at x.
        m (int): Basis index at y.
        engine (LSModel, optional): Scalar engine; a Gaussian model is built when omitted.
        truncation (int): M of the default engine.
    Returns:
        The MI entry.
    """
    engine = engine or scalar_engine(truncation=truncation, dim=gc.dim)
    gamma = correlation_operator(gc, basis, r, n, m).value
    return max(engine.shannon_mi_at(gamma), 0.0)


@dataclass(frozen=True)
class MIOperatorSurface:
    """MI-operator entries at one distance and their reconstruction on a time mesh."""

    r: float
    entries: FloatArray
    correlations: FloatArray
    mesh: FloatArray
    surface: FloatArray
    basis: TimeBasis = field(repr=False)

    @property
    def mean_level(self) -> float:
        return float(np.mean(self.surface))

    def reproject(self, points: int = MESH_POINTS) -> FloatArray:
        """Project K back onto phi_n (x) phi_m using a uniform trapezoid rule over [0, T].

        The rule is exact for products of the cosine basis while the frequency sum stays
        below 2 (points - 1).
        """
        mesh = np.linspace(0.0, self.basis.horizon, points)
        phi = self.basis.evaluate(mesh)
        kernel = phi.T @ self.entries @ phi
        w = np.full(points, self.basis.horizon / (points - 1))
        w[[0, -1]] /= 2
        weighted = phi * w
        return weighted @ kernel @ weighted.T

    def to_frame(self) -> pd.DataFrame:
        """(t, s, K) triples in row-major mesh order."""
        tt, ss = np.meshgrid(self.mesh, self.mesh, indexing="ij")
        return pd.DataFrame({"t": tt.ravel(), "s": ss.ravel(), "K": self.surface.ravel()})

    def metadata(self) -> STR_DICT:
        return {
            "r": self.r,
            "basis": self.basis.to_dict(),
            "mesh": {"start": float(self.mesh[0]), "stop": float(self.mesh[-1]), "num": len(self.mesh)},
            "entries": self.entries.tolist(),
        }


def mi_surface(
    gc: GneitingCovariance,
    basis: TimeBasis,
    r: float,
    time_mesh: ArrayLike | None = None,
    *,
    engine: LSModel | None = None,
    truncation: int = 10,
    workers: int | None = None,
) -> MIOperatorSurface:
    """Compute all MI-operator entries at distance r and reconstruct K(t, s) on the mesh.

    Args:
        gc (GneitingCovariance): The space-time covariance.
        basis (TimeBasis): The time basis; its count is M_b.
        r (float): Spatial distance.
        time_mesh (ArrayLike, optional): Times in [0, T]; defaults to 101 uniform points.
        engine (LSModel, optional): Scalar engine.
        truncation (int): M of the default engine.
        workers (int, optional): Threads for the entry evaluations.
    Returns:
        The surface.
    """
    engine = engine or scalar_engine(truncation=truncation, dim=gc.dim)
    mesh = np.linspace(0.0, basis.horizon, MESH_POINTS) if time_mesh is None else np.asarray(time_mesh, dtype=float)
    phi = basis.evaluate(mesh)
    corr = correlation_operator_matrix(gc, basis, r)

    upper = list(zip(*np.triu_indices(basis.count)))

    def entry(nm: tuple[int, int]) -> float:
        return max(engine.shannon_mi_at(float(corr[nm])), 0.0)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(entry, upper))
    else:
        values = [entry(nm) for nm in upper]

    entries = np.zeros((basis.count, basis.count))
    for (n, m), value in zip(upper, values):
        entries[n, m] = entries[m, n] = value
    return MIOperatorSurface(
        r=r, entries=entries, correlations=corr, mesh=mesh, surface=phi.T @ entries @ phi, basis=basis
    )


def surface_decay_slope(
    gc: GneitingCovariance,
    basis: TimeBasis,
    distances: Sequence[float],
    n: int = 1,
    m: int = 1,
    *,
    engine: LSModel | None = None,
    truncation: int = 10,
) -> SlopeFit:
    """Slope of ln MI entry against ln |gamma_nm(r)| along the distances.

    A scalar Gaussian engine gives 2 for small correlations.
    """
    _check_index(basis, n, m)
    engine = engine or scalar_engine(truncation=truncation, dim=gc.dim)
    gammas = np.array([abs(correlation_operator_matrix(gc, basis, r)[n - 1, m - 1]) for r in distances])
    values = np.array([engine.shannon_mi_at(g) for g in gammas])
    order = np.argsort(gammas)
    return fit_slope(gammas[order], values[order], (float(gammas.min()), float(gammas.max())))


# --- SIMULATION --- #


class SpaceTimeSampler:
    """Exact Gaussian sampler on space grid x times with the Gneiting covariance; factored once."""

    __slots__ = ("grid", "times", "gc", "_factor")

    def __init__(self, grid: GridSpec, times: ArrayLike, gc: GneitingCovariance) -> None:
        self.grid = grid
        self.times = np.atleast_1d(np.asarray(times, dtype=float))
        self.gc = gc
        n = grid.n_points * self.times.size
        if n > ST_CHOLESKY_CAP:
            raise LSFieldGridCapError(points=n, cap=ST_CHOLESKY_CAP, method="space-time cholesky")
        # site-major ordering: index = site * n_times + time
        space = cdist(grid.points(), grid.points())
        lags = np.abs(self.times[:, None] - self.times[None, :])
        cov = gc.covariance(space[:, None, :, None], lags[None, :, None, :]).reshape(n, n)
        cov[np.diag_indices(n)] += JITTER * max(gc.sigma2, 1.0)
        try:
            self._factor = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise LSFieldFactorizationError(points=n) from exc

    def __repr__(self) -> str:
        return f"<SpaceTimeSampler sizes={self.grid.sizes} times={self.times.size}>"

    @property
    def shape(self) -> tuple[int, ...]:
        return (*self.grid.sizes, self.times.size)

    def draw(self, rng: np.random.Generator) -> FloatArray:
        return (self._factor @ rng.standard_normal(self._factor.shape[0])).reshape(self.shape)

    def sample(self, seed: int) -> FieldRealization:
        return FieldRealization(
            self.grid,
            self.draw(np.random.default_rng(seed)),
            seed,
            f"Gneiting({','.join(f'{k}={v:g}' for k, v in self.gc.to_dict().items())})",
            "cholesky",
            times=self.times,
        )

    def sample_many(self, seed: int, replicates: int) -> FloatArray:
        """Replicates from child seeds, shape (replicates, *sizes, n_times)."""
        return np.stack([self.draw(np.random.default_rng(child_seed(seed, i))) for i in range(replicates)])


def simulate_st_gaussian(grid: GridSpec, times: ArrayLike, gc: GneitingCovariance, seed: int) -> FieldRealization:
    """Exact zero-mean draw with covariance C(|x - y|, t - s); values have shape (*sizes, n_times)."""
    return SpaceTimeSampler(grid, times, gc).sample(seed)
