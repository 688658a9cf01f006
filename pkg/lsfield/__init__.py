"""lsfield entry point."""
from __future__ import annotations

from lsfield.covmodels import GneitingCovariance, PowerLawBG, PurePower, Squared, WhiteNoise
from lsfield.exceptions import LSFieldError
from lsfield.lsmodel import FiniteLevels, Indicator, LSModel, MICurve, SubordinationSpec
from lsfield.polybasis import HermiteBasis, LaguerreBasis, MarginalDensity, make_basis

__version__ = "0.1.0a1"

__all__ = (
    "GneitingCovariance",
    "PowerLawBG",
    "PurePower",
    "Squared",
    "WhiteNoise",
    "LSFieldError",
    "FiniteLevels",
    "Indicator",
    "LSModel",
    "MICurve",
    "SubordinationSpec",
    "HermiteBasis",
    "LaguerreBasis",
    "MarginalDensity",
    "make_basis",
    "__version__",
)
