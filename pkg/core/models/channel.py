"""
models/channel.py
Radio constants, channel gain matrices and per-slot schedule records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..common.errors import DomainError


@dataclass(frozen=True)
class LinkParams:
    """
    Radio constants shared by every protocol.

    ``r0`` is always ``ln(1 + beta0)`` (natural-log rate per successful packet)
    and is derived, never passed in.
    """

    rho: float = 10.0
    beta0: float = 1.0
    r0: float = field(init=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise DomainError(f"rho must be a finite positive linear SNR, got {self.rho!r}")
        if not (math.isfinite(self.beta0) and self.beta0 > 0):
            raise DomainError(f"beta0 must be a finite positive SINR threshold, got {self.beta0!r}")
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "r0", math.log1p(self.beta0))

    @property
    def noise(self) -> float:
        """Normalised noise term ``1/rho`` in the SINR denominator."""
        return 1.0 / self.rho

    def to_dict(self) -> dict:
        return {"rho": self.rho, "beta0": self.beta0, "r0": self.r0}


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """
    ``n_tx x n_rx`` grid of nonnegative power gains; ``gains[i, j]`` is the
    gain from transmitter ``i`` to receiver ``j``.

    The array is copied on construction and marked read-only.
    """

    gains: np.ndarray

    def __post_init__(self) -> None:
        gains = np.array(self.gains, dtype=np.float64, copy=True)
        if gains.ndim != 2:
            raise DomainError(f"channel gains must be a 2-D array, got shape {gains.shape}")
        if gains.shape[0] < 1 or gains.shape[1] < 1:
            raise DomainError(f"channel dimensions must be >= 1, got {gains.shape}")
        if not np.all(np.isfinite(gains)):
            raise DomainError("channel gains must be finite")
        if np.any(gains < 0):
            raise DomainError("channel gains must be nonnegative")
        gains.flags.writeable = False
        object.__setattr__(self, "gains", gains)

    @property
    def n_tx(self) -> int:
        return int(self.gains.shape[0])

    @property
    def n_rx(self) -> int:
        return int(self.gains.shape[1])

    @property
    def is_square(self) -> bool:
        return self.n_tx == self.n_rx

    def gain(self, i: int, j: int) -> float:
        return float(self.gains[i, j])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelMatrix):
            return NotImplemented
        return self.gains.shape == other.gains.shape and bool(np.array_equal(self.gains, other.gains))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ScheduleOutcome:
    """Which transmitters were active in a slot, which links met the threshold,
    and the delivered bits (``r0`` per distinct delivered packet)."""

    active_tx: frozenset[int]
    successes: tuple[tuple[int, int], ...]
    delivered_bits: float

    def __post_init__(self) -> None:
        for tx, _rx in self.successes:
            if tx not in self.active_tx:
                raise DomainError(f"success link from tx {tx} which is not active")
        if self.delivered_bits < 0:
            raise DomainError("delivered_bits must be >= 0")

    @property
    def delivered_packets(self) -> int:
        return len({tx for tx, _ in self.successes})
