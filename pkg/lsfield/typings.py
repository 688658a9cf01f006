"""lsfield custom type definitions."""

from __future__ import annotations

import typing as t

import numpy as np
import numpy.typing as npt

STR_DICT: t.TypeAlias = "dict[str, t.Any]"

FloatArray: t.TypeAlias = npt.NDArray[np.float64]
ArrayLike: t.TypeAlias = "float | npt.ArrayLike"
RealFunction: t.TypeAlias = t.Callable[[FloatArray], "FloatArray | float"]

NegativityPolicy: t.TypeAlias = t.Literal["clamp", "reject"]
SimulationMethod: t.TypeAlias = t.Literal["cholesky", "circulant"]

Scenario: t.TypeAlias = t.Literal[
    "mi_curve",
    "renyi_curve",
    "subordinated_curve",
    "field_sim",
    "st_surface",
    "slope_report",
]
