"""lsfield schemas for experiment configs, run records and field headers."""

from __future__ import annotations

import functools
import typing as t

from marshmallow import EXCLUDE, RAISE, Schema, ValidationError, fields, validate, validates_schema
from marshmallow_union import Union

if t.TYPE_CHECKING:
    from lsfield.typings import STR_DICT


SCENARIOS = ("mi_curve", "renyi_curve", "subordinated_curve", "field_sim", "st_surface", "slope_report")


class Order(fields.Float):
    """A Renyi order field: positive and different from one."""

    default_error_messages = {
        "not_positive": "Order must be positive.",
        "shannon": "Order 1 is the Shannon limit; use a Shannon scenario.",
    }

    def _validated(self, value: t.Any) -> float:
        num = super()._validated(value)
        if num is None:
            return num
        if not num > 0:
            raise self.make_error("not_positive")
        if num == 1:
            raise self.make_error("shannon")
        return num


# ----- CONFIG FIELDS ----- #

PositiveFloat = functools.partial(fields.Float, validate=validate.Range(min=0, min_inclusive=False))
NonNegativeFloat = functools.partial(fields.Float, validate=validate.Range(min=0))
PositiveInt = functools.partial(fields.Int, strict=True, validate=validate.Range(min=1))
Seed = functools.partial(fields.Int, strict=True, validate=validate.Range(min=0, max=2**64 - 1))
Window = functools.partial(fields.List, fields.Float(), validate=validate.Length(equal=2))


# --- MODEL --- #


class MarginalSchema(Schema):
    """Marginal law validation schema."""

    family = fields.Str(required=True, validate=validate.OneOf(("gaussian", "gamma")))
    shape = PositiveFloat(load_default=1.0)
    scale = PositiveFloat(load_default=1.0)

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE


class CorrelationSchema(Schema):
    """Correlation model validation schema; ``squared`` nests its inner model."""

    family = fields.Str(
        required=True, validate=validate.OneOf(("power_law_bg", "pure_power", "squared", "white_noise"))
    )
    beta = fields.Float(validate=validate.Range(min=0, max=2, min_inclusive=False))
    gamma_exp = PositiveFloat()
    rho = PositiveFloat()
    inner = fields.Nested(lambda: CorrelationSchema())
    dim = fields.Int(strict=True, load_default=2, validate=validate.OneOf((1, 2)))

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE

    @validates_schema(skip_on_field_errors=False)
    def check_family(self, data: STR_DICT, **kwargs: t.Any) -> None:
        """Check the parameters each family needs."""
        needed = {
            "power_law_bg": ("beta", "gamma_exp"),
            "pure_power": ("rho",),
            "squared": ("inner",),
            "white_noise": (),
        }.get(data.get("family", ""), ())
        errors = {name: ["Missing data for required field."] for name in needed if name not in data}
        if errors:
            raise ValidationError(errors)


class ModelSchema(Schema):
    """Lancaster-Sarmanov model block validation schema."""

    marginal = fields.Nested(MarginalSchema, load_default=lambda: {"family": "gaussian", "shape": 1.0, "scale": 1.0})
    basis = fields.Str(load_default=None, allow_none=True, validate=validate.OneOf(("hermite", "laguerre")))
    correlation = fields.Nested(CorrelationSchema, required=True)
    truncation = PositiveInt(load_default=5)
    basis_degree = PositiveInt(load_default=None, allow_none=True)
    quad_nodes = fields.Int(strict=True, load_default=200, validate=validate.Range(min=2))
    negativity_policy = fields.Str(load_default="clamp", validate=validate.OneOf(("clamp", "reject")))

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE

    @validates_schema(skip_on_field_errors=False)
    def check_basis(self, data: STR_DICT, **kwargs: t.Any) -> None:
        """Check the basis matches the marginal and covers the truncation."""
        family = (data.get("marginal") or {}).get("family")
        expected = {"gaussian": "hermite", "gamma": "laguerre"}.get(family or "")
        if data.get("basis") and expected and data["basis"] != expected:
            raise ValidationError({"basis": [f"A {family} marginal needs the {expected} basis."]})
        degree, truncation = data.get("basis_degree"), data.get("truncation")
        if degree is not None and truncation is not None and truncation > degree:
            raise ValidationError({"truncation": [f"Must be <= basis_degree ({degree})."]})


# --- DISTANCES --- #


class RangeSchema(Schema):
    """Inclusive arithmetic range of distances."""

    start = PositiveFloat(required=True)
    stop = PositiveFloat(required=True)
    step = PositiveFloat(required=True)

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE

    @validates_schema
    def check_order(self, data: STR_DICT, **kwargs: t.Any) -> None:
        """Check start < stop."""
        if data["start"] >= data["stop"]:
            raise ValidationError({"stop": ["Must be greater than start."]})


class SpacingSchema(Schema):
    """Inclusive linear or logarithmic spacing of ``num`` distances."""

    start = PositiveFloat(required=True)
    stop = PositiveFloat(required=True)
    num = fields.Int(strict=True, required=True, validate=validate.Range(min=2))
    log = fields.Bool(load_default=False)

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE

    @validates_schema
    def check_order(self, data: STR_DICT, **kwargs: t.Any) -> None:
        """Check start < stop."""
        if data["start"] >= data["stop"]:
            raise ValidationError({"stop": ["Must be greater than start."]})


DistancesSchema = functools.partial(
    Union,
    [
        fields.List(NonNegativeFloat(), validate=validate.Length(min=1)),
        fields.Nested(RangeSchema),
        fields.Nested(SpacingSchema),
    ],
)


# --- SCENARIO BLOCKS --- #


class LevelsSchema(Schema):
    """Finite-level transform validation schema."""

    breakpoints = fields.List(fields.Float(), required=True, validate=validate.Length(min=1))
    labels = fields.List(fields.Float(), required=True, validate=validate.Length(min=2))

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE

    @validates_schema
    def check_cells(self, data: STR_DICT, **kwargs: t.Any) -> None:
        """Check there is one label per cell, breakpoints increase and there are two states."""
        errors: dict[str, list[str]] = {}
        if len(data["labels"]) != len(data["breakpoints"]) + 1:
            errors.setdefault("labels", []).append("Need len(breakpoints) + 1 labels.")
        if any(b <= a for a, b in zip(data["breakpoints"], data["breakpoints"][1:])):
            errors.setdefault("breakpoints", []).append("Must be strictly increasing.")
        if len(set(data["labels"])) < 2:
            errors.setdefault("labels", []).append("Need at least two distinct states.")
        if errors:
            raise ValidationError(errors)


class GridSchema(Schema):
    """Regular grid validation schema."""

    sizes = fields.List(PositiveInt(), required=True, validate=validate.Length(min=1, max=2))
    spacing = PositiveFloat(load_default=1.0)

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE


class GneitingSchema(Schema):
    """Gneiting covariance parameters."""

    sigma2 = NonNegativeFloat(load_default=1.0)
    c = PositiveFloat(load_default=1.0)
    delta = PositiveFloat(load_default=0.35)
    gamma_phi = fields.Float(load_default=0.2, validate=validate.Range(min=0, max=1, min_inclusive=False))
    a = PositiveFloat(load_default=1.0)
    alpha = fields.Float(load_default=0.3, validate=validate.Range(min=0, max=1, min_inclusive=False))
    beta_psi = fields.Float(load_default=0.7, validate=validate.Range(min=0, max=1, min_inclusive=False))
    dim = fields.Int(strict=True, load_default=2, validate=validate.Range(min=1))

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE


class TimeBasisSchema(Schema):
    """Cosine time basis validation schema."""

    count = PositiveInt(load_default=20)
    horizon = PositiveFloat(load_default=100.0)
    nodes = fields.Int(strict=True, load_default=256, validate=validate.Range(min=8))

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE


class ExperimentConfigSchema(Schema):
    """Experiment configuration validation schema.

    Unknown keys are rejected and every violation is reported at once.
    """

    scenario = fields.Str(required=True, validate=validate.OneOf(SCENARIOS))
    name = fields.Str(load_default="experiment", validate=validate.Regexp(r"^[A-Za-z0-9_.-]+$"))
    description = fields.Str(load_default=None, allow_none=True)
    model = fields.Nested(ModelSchema)
    distances = DistancesSchema()
    q = fields.List(Order(), validate=validate.Length(min=1))
    nu = fields.Float()
    levels = fields.Nested(LevelsSchema)
    fit_window = Window(load_default=None, allow_none=True)
    workers = PositiveInt(load_default=None, allow_none=True)
    seed = Seed(load_default=0)
    replicates = fields.Int(strict=True, load_default=200, validate=validate.Range(min=1))
    grid = fields.Nested(GridSchema)
    method = fields.Str(load_default=None, allow_none=True, validate=validate.OneOf(("cholesky", "circulant")))
    n_dof = fields.Int(strict=True, load_default=None, allow_none=True, validate=validate.Range(min=2))
    empirical_distances = DistancesSchema(load_default=None, allow_none=True)
    gneiting = fields.Nested(GneitingSchema)
    time_basis = fields.Nested(TimeBasisSchema)
    surface_distances = fields.List(NonNegativeFloat(), validate=validate.Length(min=1))
    time_mesh = fields.Nested(SpacingSchema, load_default=None, allow_none=True)
    curve = fields.Str()
    window = Window(load_default=None, allow_none=True)
    tolerance = PositiveFloat(load_default=0.05)
    output = fields.Str(load_default=None, allow_none=True)

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE

    @validates_schema(skip_on_field_errors=False)
    def check_scenario(self, data: STR_DICT, **kwargs: t.Any) -> None:
        """Check the blocks each scenario needs."""
        needed = {
            "mi_curve": ("model", "distances"),
            "renyi_curve": ("model", "distances", "q"),
            "subordinated_curve": ("model", "distances"),
            "field_sim": ("model", "grid"),
            "st_surface": ("gneiting", "surface_distances"),
            "slope_report": ("curve",),
        }.get(data.get("scenario", ""), ())
        errors: dict[str, list[str]] = {
            name: [f"Required by scenario {data['scenario']!r}."] for name in needed if name not in data
        }
        if data.get("scenario") == "subordinated_curve" and ("nu" in data) == ("levels" in data):
            errors["nu"] = ["Give exactly one of 'nu' or 'levels'."]
        if data.get("n_dof") is not None and data["n_dof"] % 2:
            errors["n_dof"] = ["Must be even."]
        for key in ("fit_window", "window"):
            window = data.get(key)
            if window and len(window) == 2 and not 0 < window[0] <= window[1]:
                errors[key] = ["Need 0 < low <= high."]
        if errors:
            raise ValidationError(errors)


# ----- RECORD SCHEMAS ----- #


DetailValue = functools.partial(Union, [fields.Str(), fields.Float(allow_nan=True)])


class LogRecordSchema(Schema):
    """Structured warning record collected during a run."""

    event = fields.Str(required=True)
    title = fields.Str(required=True)
    level = fields.Str(required=True, validate=validate.OneOf(("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")))
    logger = fields.Str(required=True)
    message = fields.Str(required=True)
    details = fields.Dict(keys=fields.Str(), values=DetailValue(allow_none=True), load_default=dict)

    class Meta:
        """Marshmallow schema meta options."""

        unknown = RAISE


class ErrorRecordSchema(Schema):
    """Machine-readable error record written to stderr by the CLI."""

    error = fields.Str(required=True)
    message = fields.Str(required=True)
    module = fields.Str(required=True)
    details = fields.Raw(load_default=dict)


class ArtifactSchema(Schema):
    """An output file of a run."""

    path = fields.Str(required=True)
    bytes = fields.Int(strict=True, required=True, validate=validate.Range(min=0))
    kind = fields.Str(required=True, validate=validate.OneOf(("csv", "json", "text", "field", "header")))


class SlopeSummarySchema(Schema):
    """Tail slope of one curve."""

    curve = fields.Str(required=True)
    slope = fields.Float(allow_nan=True, required=True)
    stderr = fields.Float(allow_nan=True, required=True)
    window = Window(required=True)
    points = fields.Int(required=True)
    error = fields.Str(allow_none=True, load_default=None)


class RunManifestSchema(Schema):
    """Run manifest validation schema."""

    name = fields.Str(required=True)
    scenario = fields.Str(required=True, validate=validate.OneOf(SCENARIOS))
    config_hash = fields.Str(required=True, validate=validate.Regexp(r"^[0-9a-f]{64}$"))
    version = fields.Str(required=True)
    wall_clock = NonNegativeFloat(required=True)
    artifacts = fields.List(fields.Nested(ArtifactSchema), required=True)
    slopes = fields.List(fields.Nested(SlopeSummarySchema), required=True)
    warnings = fields.List(fields.Nested(LogRecordSchema), required=True)

    class Meta:
        """Marshmallow schema meta options."""

        unknown = EXCLUDE


class CurveSidecarSchema(Schema):
    """Model metadata written next to every curve CSV."""

    curve = fields.Str(required=True)
    variant = fields.Str(required=True)
    rho = fields.Float(allow_nan=True, required=True)
    rank = fields.Int(allow_none=True, load_default=None)
    q = fields.Float(allow_none=True, load_default=None)
    model = fields.Dict(load_default=dict)

    class Meta:
        """Marshmallow schema meta options."""

        unknown = EXCLUDE


class FieldHeaderSchema(Schema):
    """Text header of a binary field export."""

    sizes = fields.List(fields.Int(validate=validate.Range(min=1)), required=True, validate=validate.Length(min=1, max=2))
    spacing = PositiveFloat(required=True)
    seed = fields.Int(required=True)
    model = fields.Str(required=True)
    method = fields.Str(required=True, validate=validate.OneOf(("cholesky", "circulant")))
    dtype = fields.Str(required=True, validate=validate.Equal("<f8"))
    order = fields.Str(load_default="C", validate=validate.Equal("C"))

    class Meta:
        """Marshmallow schema meta options."""

        unknown = EXCLUDE
