"""
Logging configuration and structured event payloads for ScalingLab.

Log lines are ``event.name key=value ...`` strings in text mode, or one compact
JSON object per record in JSON mode.  Logs always go to stderr so that CSV and
JSON data written to stdout stay machine-readable.

Environment variables
---------------------
``LOG_LEVEL``  : standard level name (default: ``INFO``)
``LOG_FORMAT`` : ``text`` or ``json`` (default: ``text``)
"""

from __future__ import annotations

import json
import logging
import math
import os
import sys
import uuid
from datetime import datetime, timezone
from typing import Any

LOGGER_ROOT = "scalinglab"
_TEXT_FORMAT = "%(asctime)s [%(levelname)s] %(name)s %(message)s"


def get_log_level() -> str:
    return os.getenv("LOG_LEVEL", "INFO").upper()


def get_log_format() -> str:
    value = os.getenv("LOG_FORMAT", "text").strip().lower()
    return value if value in ("text", "json") else "text"


def _json_safe(value: Any) -> Any:
    """Render non-finite floats as strings so the payload stays valid JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def build_event_payload(event: str, **fields: Any) -> dict:
    payload = {"event": event}
    payload.update({key: _json_safe(value) for key, value in fields.items()})
    return payload


def format_event(event: str, **fields: Any) -> str:
    """Render an event as ``event key=value ...`` for text logs."""
    parts = [event]
    for key, value in build_event_payload(event, **fields).items():
        if key == "event":
            continue
        if isinstance(value, float):
            value = f"{value:.6g}"
        parts.append(f"{key}={value}")
    return " ".join(parts)


def new_run_id(candidate: str | None = None) -> str:
    """Return *candidate* if it is a safe identifier, else a fresh UUID."""
    if not candidate:
        return str(uuid.uuid4())
    sanitized = str(candidate)[:64]
    if not all(c.isalnum() or c in "-_" for c in sanitized):
        get_logger("observability").warning("run_id.invalid_format rejected=%r", candidate)
        return str(uuid.uuid4())
    return sanitized


class JsonFormatter(logging.Formatter):
    """One JSON object per record: event, level, logger, ts and extra fields."""

    def format(self, record: logging.LogRecord) -> str:
        message = record.getMessage()
        event, _, rest = message.partition(" ")
        payload = build_event_payload(
            event,
            level=record.levelname,
            logger=record.name,
            ts=datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
        )
        if rest:
            payload["detail"] = rest
        fields = getattr(record, "fields", None)
        if isinstance(fields, dict):
            payload.update(_json_safe(fields))
        return json.dumps(payload, separators=(",", ":"))


def configure_logging(level: str | None = None, fmt: str | None = None) -> logging.Logger:
    """Attach a single stderr handler to the ``scalinglab`` logger tree."""
    logger = logging.getLogger(LOGGER_ROOT)
    logger.setLevel((level or get_log_level()).upper())
    for handler in list(logger.handlers):
        if getattr(handler, "_scalinglab", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler._scalinglab = True  # type: ignore[attr-defined]
    if (fmt or get_log_format()) == "json":
        handler.setFormatter(JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter(_TEXT_FORMAT))
    logger.addHandler(handler)
    logger.propagate = True
    return logger


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(f"{LOGGER_ROOT}.{name}")


def log_event(logger: logging.Logger, event: str, level: int = logging.INFO, **fields: Any) -> None:
    """Emit *event* as a key=value line, keeping the raw fields for JSON mode."""
    if logger.isEnabledFor(level):
        logger.log(level, format_event(event, **fields), extra={"fields": fields})
