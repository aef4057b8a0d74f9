"""
models/protocol.py
Records produced by the genie search, the relaying scheme and the bound
evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..common.errors import DomainError
from .channel import LinkParams, ScheduleOutcome
from .fading import FadingModel


class GenieMode(str, Enum):
    SINGLE = "single"
    TWO_HOP = "two_hop"

    @classmethod
    def parse(cls, value: "str | GenieMode") -> "GenieMode":
        if isinstance(value, GenieMode):
            return value
        normalized = str(value).strip().lower().replace("-", "_")
        try:
            return cls(normalized)
        except ValueError:
            raise DomainError(f"unknown genie mode {value!r}; choose 'single' or 'two_hop'") from None


@dataclass(frozen=True)
class GenieResult:
    """
    Largest valid concurrent set found by exhaustive search.

    ``witness`` lists the scheduled transmitters in ascending order;
    ``assignment`` pairs each with its receiver (identity pairing for the
    single-hop genie, the source -> relay matching for the two-hop genie).
    """

    mode: GenieMode
    m_star: int
    witness: tuple[int, ...] = ()
    assignment: tuple[tuple[int, int], ...] = ()
    valid_count: Optional[int] = None
    subsets_checked: int = 0

    def __post_init__(self) -> None:
        if self.m_star != len(self.witness) or self.m_star != len(self.assignment):
            raise DomainError("witness and assignment must both have m_star entries")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "m_star": self.m_star,
            "witness": list(self.witness),
            "assignment": [list(pair) for pair in self.assignment],
            "valid_count": self.valid_count,
            "subsets_checked": self.subsets_checked,
        }


@dataclass(frozen=True)
class HopReport:
    """
    Outcome of one relaying hop on one channel realisation.

    selections  : receiver -> chosen transmitter (-1 when the receiver requested nobody)
    served      : (transmitter, receiver) links that carried a packet and passed
    successes   : number of served links (never more than the transmitter pool)
    delivered   : distinct packets credited; ``throughput_bits = r0 * delivered``
    """

    selections: tuple[int, ...]
    distinct_event: bool
    successes: int
    delivered: int
    throughput_bits: float
    active: tuple[int, ...] = ()
    served: tuple[tuple[int, int], ...] = ()

    @property
    def scheduled_count(self) -> int:
        return len(self.active)

    def to_schedule(self) -> ScheduleOutcome:
        return ScheduleOutcome(
            active_tx=frozenset(self.active),
            successes=self.served,
            delivered_bits=self.throughput_bits,
        )


@dataclass(frozen=True)
class TwoHopOutcome:
    first: HopReport
    second: HopReport
    throughput_bits: float
    conditional_bits: float


class MRule(str, Enum):
    FIXED = "fixed"
    PAPER_SQRT = "paper_sqrt"
    EQUAL_N = "equal_n"


def sqrt_relay_count(n: int) -> int:
    """``round((n - 1) / sqrt(2n - 1))`` with halves rounded up, at least 1."""
    raw = (n - 1) / math.sqrt(2 * n - 1)
    return max(1, int(math.floor(raw + 0.5)))


def parse_m_rule(rule: str) -> tuple[MRule, Optional[int]]:
    """Parse ``fixed:<k>``, ``paper_sqrt`` / ``paper-sqrt`` or ``equal_n`` / ``equal-n``."""
    text = str(rule).strip().lower().replace("-", "_")
    if text.startswith("fixed"):
        _, _, count = text.partition(":")
        try:
            k = int(count)
        except ValueError:
            raise DomainError(f"m rule {rule!r}: expected fixed:<k> with integer k") from None
        if k < 1:
            raise DomainError(f"m rule {rule!r}: k must be >= 1")
        return MRule.FIXED, k
    try:
        return MRule(text), None
    except ValueError:
        raise DomainError(f"unknown m rule {rule!r}; choose fixed:<k>, paper_sqrt or equal_n") from None


def relays_for(rule: str, n: int) -> int:
    kind, k = parse_m_rule(rule)
    if kind is MRule.FIXED:
        return int(k)  # type: ignore[arg-type]
    if kind is MRule.PAPER_SQRT:
        return sqrt_relay_count(n)
    return n


@dataclass(frozen=True)
class RelayConfig:
    """One opportunistic two-hop deployment: n S-D pairs and m relays."""

    n: int
    m: int
    params: LinkParams
    model: FadingModel
    m_rule: str = "fixed"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError(f"relay config: n must be >= 1, got {self.n}")
        if self.m < 1:
            raise DomainError(f"relay config: m must be >= 1, got {self.m}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "m_rule": self.m_rule,
            "params": self.params.to_dict(),
            "model": self.model.to_spec(),
        }


class BoundKind(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class BoundCurve:
    """
    One evaluated analytic bound.

    ``raw`` is the value before clamping; ``value`` is what callers compare
    against. Probability bounds are clamped into [0, 1].
    """

    name: str
    inputs: tuple[tuple[str, float], ...]
    value: float
    kind: BoundKind
    raw: float = math.nan
    is_probability: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if math.isnan(self.raw):
            object.__setattr__(self, "raw", self.value)
        if self.is_probability and not (0.0 <= self.value <= 1.0):
            raise DomainError(f"{self.name}: probability bound {self.value!r} outside [0, 1]")

    def input(self, label: str) -> float:
        return dict(self.inputs)[label]
