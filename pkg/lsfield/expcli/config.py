"""Experiment configuration loading and model construction."""

from __future__ import annotations

import hashlib
import json
import os
import typing as t
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from marshmallow import ValidationError

from lsfield.covmodels import CorrelationModel, GneitingCovariance, PowerLawBG, PurePower, Squared, WhiteNoise
from lsfield.exceptions import LSFieldConfigError, LSFieldParameterError
from lsfield.fieldsim import GridSpec
from lsfield.lsmodel import FiniteLevels, Indicator, LSModel
from lsfield.polybasis import MarginalDensity, make_basis
from lsfield.schemas import ExperimentConfigSchema
from lsfield.stfunctional import TimeBasis

if t.TYPE_CHECKING:
    from lsfield.typings import STR_DICT, FloatArray, Scenario

OUTPUT_ENV = "LSFIELD_OUTPUT_ROOT"
DEFAULT_OUTPUT = "lsfield-output"
PRESET_PACKAGE = "lsfield.expcli"
PRESET_ALIASES = {"fig2-gaussian": "gaussian-mi", "fig3-renyi-gaussian": "renyi-gaussian"}


def preset_names() -> list[str]:
    """Names of the shipped presets."""
    root = resources.files(PRESET_PACKAGE) / "presets"
    return sorted(entry.name[: -len(".json")] for entry in root.iterdir() if entry.name.endswith(".json"))


def resolve_preset(name: str) -> str:
    """Canonical preset name, following the published aliases."""
    return PRESET_ALIASES.get(name, name)


def preset_text(name: str) -> str:
    name = resolve_preset(name)
    root = resources.files(PRESET_PACKAGE) / "presets"
    entry = root / f"{name}.json"
    if not entry.is_file():
        available = ", ".join([*preset_names(), *PRESET_ALIASES])
        raise LSFieldConfigError({"preset": [f"Unknown preset {name!r}; available: {available}."]})
    return entry.read_text(encoding="utf-8")


def build_marginal(data: STR_DICT) -> MarginalDensity:
    if data["family"] == "gaussian":
        return MarginalDensity.gaussian()
    return MarginalDensity.gamma(data["shape"], data["scale"])


def build_correlation(data: STR_DICT) -> CorrelationModel:
    family = data["family"]
    if family == "power_law_bg":
        return PowerLawBG(data["beta"], data["gamma_exp"], dim=data["dim"])
    if family == "pure_power":
        return PurePower(data["rho"], dim=data["dim"])
    if family == "squared":
        return Squared(build_correlation(data["inner"]))
    return WhiteNoise(data["dim"])


def build_model(data: STR_DICT) -> LSModel:
    marginal = build_marginal(data["marginal"])
    degree = data["basis_degree"] or data["truncation"]
    return LSModel(
        marginal,
        build_correlation(data["correlation"]),
        data["truncation"],
        basis=make_basis(marginal, degree),
        quad_nodes=data["quad_nodes"],
        negativity_policy=data["negativity_policy"],
    )


def build_distances(spec: list[float] | STR_DICT) -> FloatArray:
    """Explicit list, inclusive ``{start, stop, step}`` range or ``{start, stop, num, log}`` spacing."""
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if "step" in spec:
        count = int(np.floor((spec["stop"] - spec["start"]) / spec["step"] + 1e-9)) + 1
        return spec["start"] + spec["step"] * np.arange(count)
    if spec.get("log"):
        return np.geomspace(spec["start"], spec["stop"], spec["num"])
    return np.linspace(spec["start"], spec["stop"], spec["num"])


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment configuration with its provenance hash."""

    data: STR_DICT
    config_hash: str
    source: str = "<memory>"
    _cache: dict[str, t.Any] = field(default_factory=dict, repr=False, compare=False)

    @property
    def scenario(self) -> Scenario:
        return self.data["scenario"]

    @property
    def name(self) -> str:
        return self.data["name"]

    def output_dir(self, override: str | os.PathLike[str] | None = None) -> Path:
        """Run directory: ``override``, else $LSFIELD_OUTPUT_ROOT, else the ``output`` key, else the default."""
        root = override or os.getenv(OUTPUT_ENV) or self.data.get("output") or DEFAULT_OUTPUT
        return Path(root) / self.name

    def model(self) -> LSModel:
        if "model" not in self._cache:
            self._cache["model"] = self._build("model", build_model, self.data["model"])
        return self._cache["model"]

    def correlation(self) -> CorrelationModel:
        return self._build("model.correlation", build_correlation, self.data["model"]["correlation"])

    def distances(self, key: str = "distances") -> FloatArray:
        d = build_distances(self.data[key])
        if d.size == 0 or np.any(np.diff(d) <= 0):
            raise LSFieldConfigError({key: ["Distances must be non-empty and strictly increasing."]})
        return d

    def transform(self) -> Indicator | FiniteLevels:
        if "levels" in self.data:
            levels = self.data["levels"]
            return FiniteLevels(tuple(levels["breakpoints"]), tuple(levels["labels"]))
        return Indicator(self.data["nu"])

    def grid(self) -> GridSpec:
        return self._build("grid", lambda g: GridSpec(tuple(g["sizes"]), g["spacing"]), self.data["grid"])

    def gneiting(self) -> GneitingCovariance:
        return self._build("gneiting", lambda g: GneitingCovariance(**g), self.data["gneiting"])

    def time_basis(self) -> TimeBasis:
        data = self.data.get("time_basis") or {"count": 20, "horizon": 100.0, "nodes": 256}
        return self._build("time_basis", lambda b: TimeBasis(b["count"], b["horizon"], b["nodes"]), data)

    @staticmethod
    def _build(key: str, builder: t.Callable[[t.Any], t.Any], data: t.Any) -> t.Any:
        try:
            return builder(data)
        except LSFieldParameterError as exc:
            raise LSFieldConfigError({key: [str(exc)]}) from exc


def config_hash(data: STR_DICT) -> str:
    """SHA-256 of the canonical JSON of a raw config."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(source: str | os.PathLike[str] | STR_DICT, *, preset: bool = False) -> ExperimentConfig:
    """Load and validate a config from a JSON file, a preset name or a mapping.

    Args:
        source (str | PathLike | dict): Path, preset name or raw mapping.
        preset (bool): Treat ``source`` as a preset name.
    Returns:
        The validated config.
    """
    if isinstance(source, dict):
        raw, origin = source, "<memory>"
    else:
        text = preset_text(str(source)) if preset else Path(source).read_text(encoding="utf-8")
        origin = f"preset:{source}" if preset else str(source)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LSFieldConfigError({"_json": [f"{exc.msg} at line {exc.lineno} column {exc.colno}"]}) from exc
        if not isinstance(raw, dict):
            raise LSFieldConfigError({"_schema": ["Config must be a JSON object."]})

    try:
        data: STR_DICT = ExperimentConfigSchema().load(raw)
    except ValidationError as exc:
        raise LSFieldConfigError(exc.normalized_messages()) from exc
    return ExperimentConfig(data=data, config_hash=config_hash(raw), source=origin)
