"""lsfield errors."""

from __future__ import annotations

import typing as t


class LSFieldError(Exception):
    """Base error for all lsfield errors."""

    message = "An error occurred."

    def __init__(self, message: str | None = None, **details: t.Any) -> None:
        """Initialize the error.

        Args:
            message (str, optional): The message of the error. Defaults to the class message,
                formatted with ``details``.
            **details: Values describing the failure, kept on the error for error records.
        """
        self.details: dict[str, t.Any] = details
        super().__init__(message or self.message.format(**details))


# --- PARAMETERS --- #


class LSFieldParameterError(LSFieldError):
    """Exception raised when a precondition or construction constraint is violated."""

    message = "Invalid parameter {name}={value!r}: {reason}."

    def __init__(self, name: str, value: t.Any, reason: str) -> None:
        """Initialize the parameter error.

        Args:
            name (str): The name of the offending parameter.
            value (Any): The offending value.
            reason (str): The violated constraint.
        """
        super().__init__(name=name, value=value, reason=reason)


class LSFieldDegreeError(LSFieldParameterError):
    """Exception raised when a polynomial degree is outside 0..K."""

    def __init__(self, degree: int, max_degree: int) -> None:
        """Initialize the degree error.

        Args:
            degree (int): The requested degree.
            max_degree (int): The maximum degree of the basis.
        """
        super().__init__("k", degree, f"degree out of range 0..{max_degree}")


class LSFieldSupportError(LSFieldParameterError):
    """Exception raised when an evaluation point lies outside the marginal support."""

    def __init__(self, value: float, support: tuple[float, float]) -> None:
        """Initialize the support error.

        Args:
            value (float): The first offending point.
            support (tuple[float, float]): The support interval (a, b).
        """
        super().__init__("x", value, f"outside support {support}")


class LSFieldDensityError(LSFieldParameterError):
    """Exception raised when a gridded density or pmf is not a valid probability law."""


# --- NUMERICS --- #


class LSFieldNumericalError(LSFieldError):
    """Base error for numerical failures."""

    message = "A numerical error occurred."


class LSFieldNotSquareIntegrableError(LSFieldNumericalError):
    """Exception raised when a function is not in L2(p) under quadrature."""

    message = "Function is not in L2(p): E_p[g^2] = {norm_sq!r}."


class LSFieldRankError(LSFieldNumericalError):
    """Exception raised when no coefficient exceeds the rank tolerance."""

    message = "No rank up to K={max_degree}: all |C_k| <= {tolerance!r} for 1 <= k <= K."


class LSFieldAbsoluteContinuityError(LSFieldNumericalError):
    """Exception raised when f > 0 where g = 0 on a shared grid."""

    message = "Not absolutely continuous: f > 0 where g = 0 at {count} grid points."


class LSFieldNegativeDensityError(LSFieldNumericalError):
    """Exception raised when the truncated bivariate density is negative under the reject policy."""

    message = "Truncated density negative at (u={u!r}, v={v!r}, r={r!r}): bracket = {value!r}."


class LSFieldDegenerateDistanceError(LSFieldNumericalError):
    """Exception raised when the correlation equals one."""

    message = "Degenerate: zero distance (gamma = {gamma!r})."


class LSFieldCostGuardError(LSFieldNumericalError):
    """Exception raised when a multi-index expansion exceeds its cost guard."""

    message = "Cost guard exceeded: q * M^q = {cost} > {limit}."


class LSFieldTruncationError(LSFieldNumericalError):
    """Exception raised when clamping a truncated pmf moves its total mass too far."""

    message = "Truncation too coarse for this gamma={gamma!r}: renormalization by {drift!r}."


class LSFieldInsufficientPointsError(LSFieldNumericalError):
    """Exception raised when a slope fit has too few positive points."""

    message = "Insufficient positive points: {count} in window [{low!r}, {high!r}], need {needed}."


class LSFieldDegenerateProjectionError(LSFieldNumericalError):
    """Exception raised when a basis projection has near-zero variance."""

    message = "Degenerate basis projection: variance of index {index} is {variance!r}."


# --- SIMULATION --- #


class LSFieldSimulationError(LSFieldError):
    """Base error for field simulation failures."""

    message = "A simulation error occurred."


class LSFieldGridCapError(LSFieldSimulationError):
    """Exception raised when a grid exceeds the dense factorization cap."""

    message = "Grid cap exceeded: {points} points > {cap} for {method}; thin the grid."


class LSFieldEmbeddingError(LSFieldSimulationError):
    """Exception raised when circulant embedding stays non-PSD at the maximum padding."""

    message = "Embedding not PSD at max padding {padding}: min eigenvalue {min_eigenvalue!r}."


class LSFieldFactorizationError(LSFieldSimulationError):
    """Exception raised when a covariance matrix is not positive definite."""

    message = "Covariance of {points} points is not positive definite."


# --- CONFIG --- #


class LSFieldEventUndefinedError(LSFieldError):
    """Exception raised when a log record names an event that is not registered."""

    message = "Event {event!r} is not defined."


class LSFieldConfigError(LSFieldError):
    """Exception raised when an experiment configuration fails validation."""

    message = "Config validation failed: {violations}"

    def __init__(self, violations: t.Any) -> None:
        """Initialize the config error.

        Args:
            violations (Any): Every violation, as reported by the schema.
        """
        super().__init__(violations=violations)
