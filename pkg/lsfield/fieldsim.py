"""Gaussian and chi-square random fields on regular grids, excursion volume and empirical MI."""

from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.spatial.distance import pdist, squareform

from lsfield.exceptions import (
    LSFieldEmbeddingError,
    LSFieldFactorizationError,
    LSFieldGridCapError,
    LSFieldParameterError,
)
from lsfield.infotheory import FinitePMF, discrete_mi, miller_madow_bias
from lsfield.lsmodel import MICurve, fit_slope
from lsfield.schemas import FieldHeaderSchema

if t.TYPE_CHECKING:
    from collections.abc import Sequence

    from lsfield.covmodels import CorrelationModel
    from lsfield.typings import ArrayLike, FloatArray, SimulationMethod

logger = logging.getLogger(__name__)

CHOLESKY_CAP = 4096
CIRCULANT_CAP = 1 << 24
JITTER = 1e-10
EMBEDDING_TOL = -1e-9
PADDINGS = (2, 4, 8)
MIN_REPLICATES = 100


def child_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Independent stream for copy or replicate ``index`` of a run seeded with ``seed``."""
    return np.random.SeedSequence([seed, index])


@dataclass(frozen=True)
class GridSpec:
    """Regular grid in one or two dimensions.

    A single-point grid, ``(1,)`` or ``(1, 1)``, is accepted for one-draw sampling.
    """

    sizes: tuple[int, ...]
    spacing: float = 1.0

    def __post_init__(self) -> None:
        if len(self.sizes) not in (1, 2):
            raise LSFieldParameterError("sizes", self.sizes, "grids are 1-D or 2-D")
        single = all(n == 1 for n in self.sizes)
        if not single and any(n < 2 for n in self.sizes):
            raise LSFieldParameterError("sizes", self.sizes, "each axis needs >= 2 points")
        if not self.spacing > 0:
            raise LSFieldParameterError("spacing", self.spacing, "must be positive")

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def n_points(self) -> int:
        return math.prod(self.sizes)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return self.n_points * self.cell_volume

    def points(self) -> FloatArray:
        """Coordinates of the grid points in C order, shape (n_points, dim)."""
        axes = [np.arange(n) * self.spacing for n in self.sizes]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class FieldRealization:
    """Field values on a grid with the provenance needed to reproduce them."""

    grid: GridSpec
    values: FloatArray
    seed: int
    model: str
    method: str
    times: FloatArray | None = None

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise LSFieldParameterError("values", "non-finite", "field values must be finite")


class GaussianFieldSampler:
    """Zero-mean unit-variance Gaussian field sampler; the covariance is factored once.

    Small grids use a dense Cholesky factor with diagonal jitter, large grids use
    circulant embedding on a padded torus.
    """

    __slots__ = ("grid", "corr", "method", "padding", "_factor", "_sqrt_spectrum")

    def __init__(self, grid: GridSpec, corr: CorrelationModel, method: SimulationMethod | None = None) -> None:
        self.grid = grid
        self.corr = corr
        self.method: SimulationMethod = method or ("cholesky" if grid.n_points <= CHOLESKY_CAP else "circulant")
        self.padding: int | None = None
        self._factor: FloatArray | None = None
        self._sqrt_spectrum: FloatArray | None = None
        if self.method == "cholesky":
            self._factor = self._cholesky()
        elif self.method == "circulant":
            self._sqrt_spectrum = self._embed()
        else:
            raise LSFieldParameterError("method", method, "expected 'cholesky' or 'circulant'")

    def __repr__(self) -> str:
        return f"<GaussianFieldSampler sizes={self.grid.sizes} corr={self.corr.describe()} method={self.method}>"

    @property
    def descriptor(self) -> str:
        return self.corr.describe()

    def _cholesky(self) -> FloatArray:
        n = self.grid.n_points
        if n > CHOLESKY_CAP:
            raise LSFieldGridCapError(points=n, cap=CHOLESKY_CAP, method="cholesky")
        if n == 1:
            return np.ones((1, 1))
        cov = squareform(self.corr.correlation(pdist(self.grid.points())))
        np.fill_diagonal(cov, 1.0 + JITTER)
        try:
            return linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise LSFieldFactorizationError(points=n) from exc

    def _embed(self) -> FloatArray:
        min_eigenvalue = -math.inf
        for padding in PADDINGS:
            shape = tuple(padding * n for n in self.grid.sizes)
            if math.prod(shape) > CIRCULANT_CAP:
                raise LSFieldGridCapError(points=math.prod(shape), cap=CIRCULANT_CAP, method="circulant")
            # wrapped distances on the torus
            axes = [np.minimum(np.arange(m), m - np.arange(m)) * self.grid.spacing for m in shape]
            mesh = np.meshgrid(*axes, indexing="ij")
            dist = np.sqrt(sum(a**2 for a in mesh))
            spectrum = np.fft.fftn(self.corr.correlation(dist)).real
            min_eigenvalue = float(spectrum.min())
            if min_eigenvalue >= EMBEDDING_TOL:
                self.padding = padding
                return np.sqrt(np.maximum(spectrum, 0.0) / spectrum.size)
            logger.warning(
                "circulant embedding not PSD at padding %d (min eigenvalue %.3g), doubling",
                padding,
                min_eigenvalue,
                extra={"event": "embedding-padding", "padding": padding, "min_eigenvalue": min_eigenvalue},
            )
        raise LSFieldEmbeddingError(padding=PADDINGS[-1], min_eigenvalue=min_eigenvalue)

    def draw(self, rng: np.random.Generator) -> FloatArray:
        """One field on the grid from the given generator."""
        if self._factor is not None:
            return (self._factor @ rng.standard_normal(self.grid.n_points)).reshape(self.grid.sizes)
        root = t.cast("FloatArray", self._sqrt_spectrum)
        noise = rng.standard_normal(root.shape) + 1j * rng.standard_normal(root.shape)
        torus = np.fft.fftn(root * noise).real
        return torus[tuple(slice(0, n) for n in self.grid.sizes)]

    def sample(self, seed: int) -> FieldRealization:
        values = self.draw(np.random.default_rng(seed))
        return FieldRealization(self.grid, values, seed, self.descriptor, self.method)

    def sample_many(self, seed: int, replicates: int) -> FloatArray:
        """Replicates from child seeds, shape (replicates, *sizes)."""
        return np.stack([self.draw(np.random.default_rng(child_seed(seed, i))) for i in range(replicates)])


def simulate_gaussian(
    grid: GridSpec, corr: CorrelationModel, seed: int, *, method: SimulationMethod | None = None
) -> FieldRealization:
    """Draw a zero-mean unit-variance Gaussian field with correlation gamma(|x_i - x_j|).

    Args:
        grid (GridSpec): The grid.
        corr (CorrelationModel): The correlation model.
        seed (int): The seed.
        method (SimulationMethod, optional): Force ``cholesky`` or ``circulant``.
    Returns:
        The realization.
    """
    return GaussianFieldSampler(grid, corr, method).sample(seed)


def chi_square_field(
    grid: GridSpec,
    corr: CorrelationModel,
    n_dof: int,
    seed: int,
    *,
    method: SimulationMethod | None = None,
    sampler: GaussianFieldSampler | None = None,
) -> FieldRealization:
    """Pointwise (X_1^2 + ... + X_n^2) / 2 of independent Gaussian copies.

    Copy i is drawn from the child seed (seed, i). The marginal is Gamma(n_dof / 2, 1)
    and the correlation is gamma(r)^2.
    """
    if n_dof < 2 or n_dof % 2:
        raise LSFieldParameterError("n_dof", n_dof, "must be an even integer >= 2")
    sampler = sampler or GaussianFieldSampler(grid, corr, method)
    copies = sampler.sample_many(seed, n_dof)
    values = 0.5 * np.sum(copies**2, axis=0)
    return FieldRealization(grid, values, seed, f"ChiSquare({n_dof})[{corr.describe()}]", sampler.method)


def minkowski_m0(field: FieldRealization, nu: float) -> float:
    """Excursion volume: cell volume times the number of points with value >= nu."""
    return field.grid.cell_volume * int(np.count_nonzero(field.values >= nu))


def covariance_profile(
    grid: GridSpec,
    corr: CorrelationModel,
    replicates: int,
    seed: int,
    *,
    max_lag: int | None = None,
    method: SimulationMethod | None = None,
) -> pd.DataFrame:
    """Analytic and empirical correlation by axis lag.

    The empirical value averages x(z) x(z + h e_j) over replicates, positions and axes,
    divided by the mean square.

    Returns:
        Frame with columns ``lag``, ``distance``, ``analytic``, ``empirical``.
    """
    max_lag = max_lag if max_lag is not None else min(grid.sizes) - 1
    if not 0 <= max_lag < min(grid.sizes):
        raise LSFieldParameterError("max_lag", max_lag, f"must lie in [0, {min(grid.sizes) - 1}]")
    fields = GaussianFieldSampler(grid, corr, method).sample_many(seed, replicates)
    second_moment = float(np.mean(fields**2))

    empirical = []
    for h in range(max_lag + 1):
        products = []
        for axis in range(grid.dim):
            head = np.take(fields, np.arange(grid.sizes[axis] - h), axis=axis + 1)
            tail = np.take(fields, np.arange(h, grid.sizes[axis]), axis=axis + 1)
            products.append(np.mean(head * tail))
        empirical.append(float(np.mean(products)) / second_moment)

    lags = np.arange(max_lag + 1)
    distances = lags * grid.spacing
    return pd.DataFrame(
        {"lag": lags, "distance": distances, "analytic": corr.correlation(distances), "empirical": empirical}
    )


@dataclass(frozen=True)
class EmpiricalMICurve(MICurve):
    """Monte-Carlo MI curve with per-distance standard errors and degenerate-table flags."""

    stderr: FloatArray | None = None
    half_width: FloatArray | None = None
    degenerate: np.ndarray | None = None
    bias: float = 0.0


def _cell_count_stderr(counts: FloatArray) -> float:
    """Standard error of the plug-in MI from the multinomial cell counts.

    The first-order term propagates the cell covariances (p_ij (1 - p_ij) on the
    diagonal) through the MI gradient; it vanishes at independence, where the
    chi-square term with (rows - 1)(cols - 1) degrees of freedom takes over.
    """
    n = float(counts.sum())
    joint = counts / n
    expected = joint.sum(axis=1, keepdims=True) @ joint.sum(axis=0, keepdims=True)
    positive = joint > 0
    gradient = np.zeros_like(joint)
    gradient[positive] = np.log(joint[positive] / expected[positive])
    p, g = joint.ravel(), gradient.ravel()
    cell_cov = (np.diag(p) - np.outer(p, p)) / n
    dof = (joint.shape[0] - 1) * (joint.shape[1] - 1)
    variance = float(g @ cell_cov @ g) + dof / (2.0 * n * n)
    return math.sqrt(max(variance, 0.0))


def empirical_indicator_mi(
    corr: CorrelationModel,
    nu: float,
    distances: Sequence[float] | FloatArray,
    replicates: int,
    seed: int,
    *,
    miller_madow: bool = False,
    z: float = 1.96,
) -> EmpiricalMICurve:
    """Plug-in MI of the exceedance indicator from exact two-point Gaussian samples.

    At each distance, pairs ``(X, gamma X + sqrt(1 - gamma^2) Z)`` are drawn from the
    child seed (seed, index), the 2 x 2 exceedance table is counted and its MI taken.
    Standard errors come from the binomial cell-count variances; an empty cell
    flags the distance instead of failing.

    Args:
        corr (CorrelationModel): The correlation model.
        nu (float): The threshold.
        distances (Sequence[float]): Distances, sorted on output.
        replicates (int): Pairs per distance, >= 100.
        seed (int): The seed.
        miller_madow (bool): Subtract the first-order plug-in bias.
        z (float): Normal quantile of the half-widths.
    Returns:
        The empirical curve.
    """
    if replicates < MIN_REPLICATES:
        raise LSFieldParameterError("replicates", replicates, f"need at least {MIN_REPLICATES}")
    d = np.sort(np.asarray(distances, dtype=float))
    if d.size == 0:
        raise LSFieldParameterError("distances", 0, "need at least one distance")
    gammas = corr.correlation(d)
    bias = miller_madow_bias(2, replicates)

    values = np.empty(d.size)
    stderr = np.empty(d.size)
    degenerate = np.zeros(d.size, dtype=bool)
    for i, gamma in enumerate(gammas.tolist()):
        rng = np.random.default_rng(child_seed(seed, i))
        x = rng.standard_normal(replicates)
        y = gamma * x + math.sqrt(max(1.0 - gamma * gamma, 0.0)) * rng.standard_normal(replicates)
        above_x, above_y = x >= nu, y >= nu
        counts = np.array(
            [
                [np.sum(~above_x & ~above_y), np.sum(~above_x & above_y)],
                [np.sum(above_x & ~above_y), np.sum(above_x & above_y)],
            ],
            dtype=float,
        )
        joint = counts / replicates
        if np.any(counts == 0):
            degenerate[i] = True
            logger.warning(
                "empty cell in exceedance table at d=%g",
                d[i],
                extra={"event": "degenerate-table", "distance": float(d[i]), "counts": counts.ravel().tolist()},
            )
        mi = discrete_mi(FinitePMF(joint / joint.sum()))
        values[i] = max(mi - bias, 0.0) if miller_madow else mi
        stderr[i] = _cell_count_stderr(counts)

    return EmpiricalMICurve(
        distances=d,
        mi_values=values,
        gammas=gammas,
        slope_fit=fit_slope(d, values),
        variant="empirical-indicator",
        stderr=stderr,
        half_width=z * stderr,
        degenerate=degenerate,
        bias=bias,
    )


# --- EXPORT --- #


def _header_path(path: Path) -> Path:
    return path.with_suffix(".hdr")


def write_field(field: FieldRealization, path: str | Path) -> tuple[Path, Path]:
    """Write values as little-endian float64 with a ``key=value`` text header next to them.

    Returns:
        The binary and header paths.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = FieldHeaderSchema().dump(
        {
            "sizes": list(field.grid.sizes),
            "spacing": field.grid.spacing,
            "seed": field.seed,
            "model": field.model,
            "method": field.method,
            "dtype": "<f8",
            "order": "C",
        }
    )
    path.write_bytes(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    header_path = _header_path(path)
    lines = [f"{key}={','.join(map(str, value)) if isinstance(value, list) else value}" for key, value in header.items()]
    header_path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path, header_path


def read_field(path: str | Path) -> FieldRealization:
    """Read a field written by :func:`write_field`."""
    path = Path(path)
    raw = dict(
        line.split("=", 1) for line in _header_path(path).read_text(encoding="utf-8").splitlines() if "=" in line
    )
    raw["sizes"] = raw.get("sizes", "").split(",")  # type: ignore[assignment]
    header = FieldHeaderSchema().load(raw)
    grid = GridSpec(tuple(header["sizes"]), header["spacing"])
    values = np.frombuffer(path.read_bytes(), dtype=header["dtype"]).astype(float).reshape(grid.sizes)
    return FieldRealization(grid, values, header["seed"], header["model"], header["method"])


def pooled_values(fields: Sequence[FieldRealization] | ArrayLike) -> FloatArray:
    """Flatten realizations (or stacked arrays) into one sample vector."""
    if isinstance(fields, (list, tuple)) and fields and isinstance(fields[0], FieldRealization):
        return np.concatenate([f.values.ravel() for f in fields])
    return np.asarray(fields, dtype=float).ravel()
