"""
OpenTelemetry spans around CLI commands, experiment grid points and
acceptance checks.

Environment variables:
  TRACING_ENABLED - "true" turns spans on. Off by default so a run's stdout
                    carries only its own output.
  OTLP_ENDPOINT   - OTLP/HTTP collector base URL (e.g. http://localhost:4318).
                    Unset means spans are printed by the console exporter.
  SERVICE_NAME    - service.name resource attribute (default: scalinglab).

A CLI process exits as soon as its command returns, so :func:`shutdown_tracing`
must run before exit or batched spans are lost.
"""

from __future__ import annotations

import logging
import os
from contextlib import contextmanager, nullcontext
from enum import Enum
from typing import Any, Iterator

try:
    from opentelemetry import trace
    from opentelemetry.sdk.resources import SERVICE_NAME as RESOURCE_SERVICE_NAME
    from opentelemetry.sdk.resources import Resource
    from opentelemetry.sdk.trace import TracerProvider
    from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter, SpanExporter
except ImportError:  # pragma: no cover - exercised only without the sdk
    trace = None

logger = logging.getLogger("scalinglab.tracing")

_provider = None

_ATTRIBUTE_TYPES = (bool, int, float, str)


def tracing_enabled() -> bool:
    return os.getenv("TRACING_ENABLED", "false").strip().lower() == "true"


def _exporter(endpoint: str) -> "SpanExporter":
    if not endpoint:
        return ConsoleSpanExporter()
    try:
        from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter
    except ImportError:
        logger.warning("tracing.otlp_missing endpoint=%s fallback=console", endpoint)
        return ConsoleSpanExporter()
    return OTLPSpanExporter(endpoint=f"{endpoint.rstrip('/')}/v1/traces")


def configure_tracing(service_name: str | None = None) -> bool:
    """Install the global tracer provider once; return whether spans are recorded."""
    global _provider

    if not tracing_enabled():
        logger.debug("tracing.disabled")
        return False
    if trace is None:
        logger.warning("tracing.unavailable hint='pip install opentelemetry-sdk'")
        return False
    if _provider is not None:
        return True

    name = service_name or os.getenv("SERVICE_NAME", "scalinglab")
    endpoint = os.getenv("OTLP_ENDPOINT", "").strip()
    provider = TracerProvider(resource=Resource.create({RESOURCE_SERVICE_NAME: name}))
    provider.add_span_processor(BatchSpanProcessor(_exporter(endpoint)))
    trace.set_tracer_provider(provider)
    _provider = provider
    logger.info("tracing.configured service=%s exporter=%s", name, "otlp" if endpoint else "console")
    return True


def shutdown_tracing() -> None:
    """Flush pending spans and drop the provider; safe to call when tracing is off."""
    global _provider

    if _provider is None:
        return
    _provider.force_flush()
    _provider.shutdown()
    _provider = None
    logger.debug("tracing.shutdown")


def get_tracer(name: str = "scalinglab"):
    """Tracer for manual spans; a no-op tracer when tracing is off or unavailable."""
    if trace is None or not tracing_enabled():
        return _NoopTracer()
    return trace.get_tracer(name)


def span_attribute(value: Any) -> Any:
    """Coerce *value* to a type OpenTelemetry accepts as an attribute."""
    if isinstance(value, Enum):
        value = value.value
    if isinstance(value, _ATTRIBUTE_TYPES):
        return value
    return str(value)


@contextmanager
def traced(name: str, **attributes: Any) -> Iterator[Any]:
    """Open span *name* with *attributes*; ``None`` values are left off."""
    with get_tracer().start_as_current_span(name) as span:
        for key, value in attributes.items():
            if value is not None:
                span.set_attribute(key, span_attribute(value))
        yield span


class _NoopSpan:
    def set_attribute(self, key, value):
        pass

    def record_exception(self, exc, **kwargs):
        pass

    def set_status(self, *args, **kwargs):
        pass


class _NoopTracer:
    def start_as_current_span(self, name, **kwargs):
        return nullcontext(_NoopSpan())
