"""Tail slope reports of curve CSVs against the declared decay orders."""

from __future__ import annotations

import json
import math
import typing as t
from pathlib import Path

import numpy as np
import pandas as pd

from lsfield.exceptions import LSFieldConfigError
from lsfield.lsmodel import fit_slope
from lsfield.schemas import CurveSidecarSchema

if t.TYPE_CHECKING:
    from lsfield.lsmodel import SlopeFit
    from lsfield.typings import STR_DICT

MIN_REPORT_POINTS = 10


class SlopeReport(t.NamedTuple):
    """A slope fit with its comparison rows."""

    fit: SlopeFit
    r_squared: float
    table: pd.DataFrame
    text: str


def sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".json")


def read_sidecar(csv_path: Path) -> STR_DICT:
    """Curve metadata written next to the CSV, empty when absent."""
    path = sidecar_path(csv_path)
    if not path.is_file():
        return {}
    data: STR_DICT = CurveSidecarSchema().load(json.loads(path.read_text(encoding="utf-8")))
    return data


def expected_orders(meta: STR_DICT) -> list[tuple[str, float, bool]]:
    """Theoretical orders as ``(label, slope, is_envelope)`` from the curve metadata.

    An envelope passes when the measured decay is at least as fast.
    """
    rho = meta.get("rho")
    if rho is None or not math.isfinite(rho):
        return []
    orders = [("gaussian -2 rho", -2.0 * rho, False)]
    if meta.get("rank"):
        orders.append(("rank envelope -rho m", -rho * meta["rank"], True))
    if meta.get("q"):
        orders.append(("declared -q rho", -meta["q"] * rho, False))
    return orders


def slope_report(
    csv_path: str | Path, window: tuple[float, float] | None = None, tolerance: float = 0.05
) -> SlopeReport:
    """Fit ln MI against ln d and compare the slope with the declared orders.

    Args:
        csv_path (str | Path): Curve CSV with ``d`` and ``mi`` columns.
        window (tuple[float, float], optional): ``(d_lo, d_hi)``; defaults to the last decade.
        tolerance (float): Relative tolerance of the pass/fail rows.
    Returns:
        The report.
    """
    csv_path = Path(csv_path)
    frame = pd.read_csv(csv_path)
    missing = [col for col in ("d", "mi") if col not in frame.columns]
    if missing:
        raise LSFieldConfigError({"curve": [f"Missing columns {missing} in {csv_path.name}."]})
    d = frame["d"].to_numpy(dtype=float)
    mi = frame["mi"].to_numpy(dtype=float)
    if window is not None and (window[0] > d.max() or window[1] < d.min() or window[0] > window[1]):
        raise LSFieldConfigError({"window": [f"Window {list(window)} lies outside the data [{d.min():g}, {d.max():g}]."]})

    fit = fit_slope(d, mi, window, min_points=MIN_REPORT_POINTS, strict=True)
    lo, hi = fit.window
    inside = (d >= lo) & (d <= hi) & (mi > 0)
    x, y = np.log(d[inside]), np.log(mi[inside])
    residual = y - (fit.intercept + fit.slope * x)
    total = np.sum((y - y.mean()) ** 2)
    r_squared = float(1.0 - np.sum(residual**2) / total) if total > 0 else 1.0

    meta = read_sidecar(csv_path)
    rows = []
    for label, expected, envelope in expected_orders(meta):
        if envelope:
            passed = fit.slope <= expected * (1.0 - tolerance)
        else:
            passed = abs(fit.slope - expected) <= tolerance * abs(expected)
        rows.append(
            {
                "order": label,
                "expected": expected,
                "slope": fit.slope,
                "stderr": fit.stderr,
                "r_squared": r_squared,
                "pass": bool(passed),
            }
        )
    table = pd.DataFrame(rows, columns=["order", "expected", "slope", "stderr", "r_squared", "pass"])

    lines = [
        f"curve: {csv_path.name}",
        f"window: [{lo:g}, {hi:g}] ({fit.points} points)",
        f"slope: {fit.slope:.6g} +/- {fit.stderr:.3g}  R^2 = {r_squared:.6f}",
    ]
    lines += [
        f"  {row['order']:<22} expected {row['expected']:+.4g}  {'PASS' if row['pass'] else 'FAIL'}" for row in rows
    ]
    return SlopeReport(fit=fit, r_squared=r_squared, table=table, text="\n".join(lines) + "\n")
