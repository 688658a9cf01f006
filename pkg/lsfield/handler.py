"""lsfield logging handler that collects structured warning records."""

from __future__ import annotations

import logging
import math
import numbers
import typing as t
from types import MappingProxyType

from lsfield.exceptions import LSFieldEventUndefinedError
from lsfield.schemas import LogRecordSchema

if t.TYPE_CHECKING:
    from collections.abc import Mapping
    from logging import _Level

    from lsfield.typings import STR_DICT


class Event(t.TypedDict):
    """Predefined event."""

    title: str
    description: t.NotRequired[str]


EVENTS: Mapping[str, Event] = MappingProxyType(
    {
        "covariance-range": {
            "title": "Covariance Range",
            "description": "LRD exponent outside (0, d/2); the power-law covariance class may not be valid.",
        },
        "density-clamped": {"title": "Density Clamped", "description": "Truncated density clamped at the floor."},
        "renormalized-pmf": {"title": "PMF Renormalized", "description": "Subordinated pmf renormalized."},
        "window-shrunk": {"title": "Window Shrunk", "description": "MI underflow inside the slope fit window."},
        "diversity-saturated": {"title": "Diversity Saturated", "description": "Diversity index saturated."},
        "embedding-padding": {"title": "Embedding Padding", "description": "Circulant embedding padding doubled."},
        "degenerate-table": {"title": "Degenerate Table", "description": "Empty cell in an empirical table."},
        "fit-failed": {"title": "Fit Failed", "description": "Slope fit could not be computed."},
    }
)

# attributes every LogRecord carries; anything else came through ``extra``
_STANDARD_ATTRS = frozenset(logging.LogRecord("", 0, "", 0, "", None, None).__dict__) | {"message", "asctime"}


class LogRecord(logging.LogRecord):
    """Log record with an optional event name."""

    event: str | None


def _jsonable(value: t.Any) -> str | float | None:
    if value is None:
        return None
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, numbers.Real):
        num = float(value)
        return num if math.isfinite(num) else str(num)
    return str(value)


class Formatter(logging.Formatter):
    """Formatter that turns records into validated record dictionaries."""

    def __init__(self, *, handler: Handler) -> None:
        """Initialize the formatter.

        Args:
            handler (Handler): The handler whose events are used.
        """
        super().__init__()
        self.handler = handler

    def format(self, record: LogRecord) -> STR_DICT:  # type: ignore[override]
        """Format the record.

        Args:
            record (LogRecord): The record to format.
        Returns:
            The record as loaded by :class:`~lsfield.schemas.LogRecordSchema`.
        """
        event_name = getattr(record, "event", None)
        title = f"{record.name} ({record.levelname})"
        if event_name:
            event = self.handler.events.get(event_name)
            if not event:
                raise LSFieldEventUndefinedError(event=event_name)
            title = event["title"]

        details = {
            key: _jsonable(value)
            for key, value in record.__dict__.items()
            if key not in _STANDARD_ATTRS and key != "event"
        }
        data: STR_DICT = LogRecordSchema().load(
            {
                "event": event_name or "log",
                "title": title,
                "level": record.levelname,
                "logger": record.name,
                "message": record.getMessage(),
                "details": details,
            }
        )
        return data


class Handler(logging.Handler):
    """Logging handler collecting formatted records, attached for the duration of a run."""

    def __init__(self, *, events: Mapping[str, Event] = EVENTS, level: _Level = logging.WARNING) -> None:
        """Initialize the handler.

        Args:
            events (Mapping[str, Event]): Predefined events.
            level (int, optional): The logging level. Defaults to WARNING.
        """
        super().__init__(level)
        self.events = events
        self.records: list[STR_DICT] = []
        self.formatter: Formatter = Formatter(handler=self)  # type: ignore[assignment]

    def emit(self, record: logging.LogRecord) -> None:
        """Collect a record.

        Args:
            record (LogRecord): The record to collect.
        """
        self.records.append(self.formatter.format(record))  # type: ignore[arg-type]
