"""
services/channel.py
Channel draws and the SINR success test shared by every protocol.

Interference sums use compensated (Neumaier) accumulation. When a signal
term must be left out of a column sum it is zeroed before summing rather than
subtracted afterwards, so heavy-tailed signals do not cancel the interference.
"""

from __future__ import annotations

import io
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from ..common.errors import DomainError
from ..common.results import format_number
from ..models.channel import ChannelMatrix, LinkParams, ScheduleOutcome
from ..models.fading import FadingModel
from .fading import sample_many


def draw_channel(n_tx: int, n_rx: int, model: FadingModel, rng: np.random.Generator) -> ChannelMatrix:
    """``n_tx x n_rx`` i.i.d. gains from *model*."""
    if n_tx < 1 or n_rx < 1:
        raise DomainError(f"draw_channel: dimensions must be >= 1, got {n_tx}x{n_rx}")
    return ChannelMatrix(sample_many(model, rng, (n_tx, n_rx)))


# ---------------------------------------------------------------------------
# Compensated summation
# ---------------------------------------------------------------------------

def compensated_sum(
    values: np.ndarray,
    axis: int = 0,
    exclude: Optional[np.ndarray] = None,
    rows: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    Neumaier sum of a 2-D array along *axis*.

    rows    : optional indices along *axis* to include (default: all)
    exclude : optional integer array, one entry per output position; the
              element at that index along *axis* is left out (-1 keeps all)
    """
    data = np.asarray(values, dtype=np.float64)
    if data.ndim != 2:
        raise DomainError("compensated_sum: expected a 2-D array")
    if axis == 1:
        data = data.T
    indices = range(data.shape[0]) if rows is None else rows
    total = np.zeros(data.shape[1])
    carry = np.zeros(data.shape[1])
    for r in indices:
        term = data[r]
        if exclude is not None:
            term = np.where(exclude == r, 0.0, term)
        t = total + term
        carry += np.where(np.abs(total) >= np.abs(term), (total - t) + term, (term - t) + total)
        total = t
    return total + carry


# ---------------------------------------------------------------------------
# SINR
# ---------------------------------------------------------------------------

def _check_active(H: ChannelMatrix, active: Iterable[int], i: int, j: int) -> list[int]:
    members = sorted(set(int(t) for t in active))
    if i not in members:
        raise DomainError(f"sinr: transmitter {i} is not in the active set")
    if members and (members[0] < 0 or members[-1] >= H.n_tx):
        raise DomainError(f"sinr: active transmitter index outside [0, {H.n_tx})")
    if not 0 <= j < H.n_rx:
        raise DomainError(f"sinr: receiver {j} outside [0, {H.n_rx})")
    return members


def interference(H: ChannelMatrix, active: Iterable[int], i: int, j: int) -> float:
    """Sum of gains at receiver *j* from every active transmitter except *i*."""
    members = _check_active(H, active, i, j)
    return math.fsum(H.gains[t, j] for t in members if t != i)


def sinr(H: ChannelMatrix, active: Iterable[int], i: int, j: int, rho: float) -> float:
    """``gain[i, j] / (1/rho + interference)``."""
    if not rho > 0:
        raise DomainError(f"sinr: rho must be > 0, got {rho!r}")
    return H.gains[i, j] / (1.0 / rho + interference(H, active, i, j))


def success(H: ChannelMatrix, active: Iterable[int], i: int, j: int, params: LinkParams) -> bool:
    """Threshold test; a tie at exactly ``beta0`` succeeds."""
    return sinr(H, active, i, j, params.rho) >= params.beta0


def evaluate_schedule(
    H: ChannelMatrix,
    active: Iterable[int],
    links: Iterable[tuple[int, int]],
    params: LinkParams,
) -> ScheduleOutcome:
    """One slot: every transmitter in *active* is on the air and each (tx, rx) in *links* is tested."""
    members = frozenset(int(t) for t in active)
    passed = tuple((int(i), int(j)) for i, j in links if success(H, members, i, j, params))
    delivered = len({i for i, _ in passed})
    return ScheduleOutcome(active_tx=members, successes=passed, delivered_bits=params.r0 * delivered)


def column_sinr(
    gains: np.ndarray,
    active_rows: np.ndarray,
    signal_rows: np.ndarray,
    rho: float,
) -> np.ndarray:
    """
    SINR at every column ``j`` of the signal from ``signal_rows[j]`` with every
    row in *active_rows* transmitting.

    ``signal_rows[j]`` must belong to *active_rows*.
    """
    signal_rows = np.asarray(signal_rows, dtype=np.int64)
    if not np.all(np.isin(signal_rows, active_rows)):
        raise DomainError("column_sinr: every signal row must be active")
    interference_sum = compensated_sum(gains, axis=0, exclude=signal_rows, rows=[int(r) for r in active_rows])
    cols = np.arange(gains.shape[1])
    return gains[signal_rows, cols] / (1.0 / rho + interference_sum)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def matrix_to_csv(H: ChannelMatrix) -> str:
    """One row per transmitter, one column per receiver, round-trip decimals."""
    buf = io.StringIO()
    for row in H.gains:
        buf.write(",".join(format_number(float(v)) for v in row))
        buf.write("\n")
    return buf.getvalue()
