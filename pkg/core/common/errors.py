"""
Exception hierarchy for ScalingLab.

Every error carries the process exit code the CLI reports for it, the same
way HTTP handlers map failures onto status codes.

Exit codes
----------
``0`` success, ``1`` verification failure, ``2`` usage / config / domain error.
"""

from __future__ import annotations


class ScalingLabError(Exception):
    """Base class for all errors raised by ScalingLab."""

    exit_code: int = 2


class DomainError(ScalingLabError, ValueError):
    """A mathematical precondition was violated (bad parameter or argument)."""


class SizeLimitError(DomainError):
    """An exhaustive search was requested above its configured size limit."""

    def __init__(self, what: str, n: int, limit: int) -> None:
        super().__init__(
            f"{what}: n={n} exceeds the exhaustive limit {limit}; "
            "pass force_exponential=True (--force-exponential) to accept exponential cost"
        )
        self.n = n
        self.limit = limit


class ConfigError(ScalingLabError):
    """Experiment configuration is invalid.

    ``fields`` names every offending field so the report can be shown before
    any computation starts.
    """

    def __init__(self, message: str, fields: tuple[str, ...] = ()) -> None:
        detail = f"{message} (fields: {', '.join(fields)})" if fields else message
        super().__init__(detail)
        self.fields = fields


class VerificationFailure(ScalingLabError):
    """One or more acceptance checks failed."""

    exit_code = 1
