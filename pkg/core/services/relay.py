"""
services/relay.py
Two-hop opportunistic relaying.

First hop: every relay asks for the source with its strongest incoming gain;
the requested sources transmit together. Second hop: every destination
evaluates each relay's SINR with all relays transmitting and asks for the
strongest one if it passes the threshold. The relayed rate is half the
smaller of the two hop rates.

A source requested by several relays transmits once and is credited once,
however many relays decode it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..common.errors import DomainError
from ..common.observability import get_logger
from ..models.channel import ChannelMatrix, LinkParams
from ..models.fading import FadingModel
from ..models.protocol import HopReport, RelayConfig, TwoHopOutcome, sqrt_relay_count
from .bounds import prob_all_distinct
from .channel import column_sinr, draw_channel
from .fading import moments, sample_many

logger = get_logger("relay")

# gains drawn per block by the chunked estimators
_CHUNK_ENTRIES = 2_000_000


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------

def sqrt_relay_config(
    n: int,
    model: Optional[FadingModel] = None,
    rho: float = 10.0,
    beta0: float = 1.0,
) -> RelayConfig:
    """Square-root relaying: ``m = round((n-1)/sqrt(2n-1))`` relays, extremal(1, 1, n) gains."""
    if n < 2:
        raise DomainError(f"sqrt_relay_config: n must be >= 2, got {n}")
    if model is None:
        model = FadingModel.extremal(1.0, 1.0, n)
    return RelayConfig(n=n, m=sqrt_relay_count(n), params=LinkParams(rho=rho, beta0=beta0), model=model,
                       m_rule="paper_sqrt")


def pareto_linear_config(n: int, alpha: float, rho: float = 10.0) -> RelayConfig:
    """Linear relaying under path-loss Pareto gains: ``m = n``, ``beta0 = 1 - 2/alpha``."""
    if not alpha > 2:
        raise DomainError(f"pareto_linear_config: alpha must be > 2 so that nu = 2/alpha < 1, got {alpha!r}")
    nu = 2.0 / alpha
    return RelayConfig(
        n=n,
        m=n,
        params=LinkParams(rho=rho, beta0=1.0 - nu),
        model=FadingModel.pareto_pathloss(alpha),
        m_rule="equal_n",
    )


# ---------------------------------------------------------------------------
# Hops
# ---------------------------------------------------------------------------

def schedule_first_hop(H_sr: ChannelMatrix) -> tuple[int, ...]:
    """Per relay (column), the source (row) with the largest gain; lowest index on ties."""
    return tuple(int(i) for i in np.argmax(H_sr.gains, axis=0))


def first_hop_throughput(H_sr: ChannelMatrix, params: LinkParams) -> HopReport:
    selections = np.argmax(H_sr.gains, axis=0)
    active = np.unique(selections)
    ratios = column_sinr(H_sr.gains, active, selections, params.rho)
    passed = ratios >= params.beta0
    decoded = np.unique(selections[passed])
    return HopReport(
        selections=tuple(int(i) for i in selections),
        distinct_event=len(active) == H_sr.n_rx,
        successes=int(passed.sum()),
        delivered=len(decoded),
        throughput_bits=params.r0 * len(decoded),
        active=tuple(int(i) for i in active),
        served=tuple((int(selections[j]), int(j)) for j in np.flatnonzero(passed)),
    )


def conditional_first_hop_throughput(report: HopReport) -> float:
    """First-hop bits credited only when every relay picked a different source."""
    return report.throughput_bits if report.distinct_event else 0.0


def schedule_second_hop(H_rd: ChannelMatrix, params: LinkParams) -> HopReport:
    """
    Destinations (columns) feed back their strongest relay (row) when its SINR,
    with all relays transmitting, meets the threshold. A relay asked by several
    destinations serves the lowest-index one.
    """
    gains = H_rd.gains
    best = np.argmax(gains, axis=0)
    ratios = column_sinr(gains, np.arange(H_rd.n_tx), best, params.rho)
    passed = ratios >= params.beta0
    feedback = np.where(passed, best, -1)

    served: list[tuple[int, int]] = []
    seen: set[int] = set()
    for destination in np.flatnonzero(passed):
        relay = int(best[destination])
        if relay not in seen:
            seen.add(relay)
            served.append((relay, int(destination)))

    requested = feedback[passed]
    return HopReport(
        selections=tuple(int(k) for k in feedback),
        distinct_event=len(np.unique(requested)) == len(requested),
        successes=len(served),
        delivered=len(served),
        throughput_bits=params.r0 * len(served),
        active=tuple(sorted(seen)),
        served=tuple(sorted(served)),
    )


def simulate_two_hop(cfg: RelayConfig, rng: np.random.Generator) -> TwoHopOutcome:
    """Independent channel draws for the two hops, combined as ``min(R1, R2)/2``."""
    H_sr = draw_channel(cfg.n, cfg.m, cfg.model, rng)
    H_rd = draw_channel(cfg.m, cfg.n, cfg.model, rng)
    first = first_hop_throughput(H_sr, cfg.params)
    second = schedule_second_hop(H_rd, cfg.params)
    return TwoHopOutcome(
        first=first,
        second=second,
        throughput_bits=0.5 * min(first.throughput_bits, second.throughput_bits),
        conditional_bits=0.5 * min(conditional_first_hop_throughput(first), second.throughput_bits),
    )


def two_hop_throughput(cfg: RelayConfig, rng: np.random.Generator) -> float:
    return simulate_two_hop(cfg, rng).throughput_bits


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbabilityEstimate:
    exact: Optional[float]
    estimate: float
    std_err: float
    trials: int

    @property
    def z_score(self) -> float:
        if self.exact is None:
            return math.nan
        if self.std_err == 0:
            return 0.0 if self.estimate == self.exact else math.inf
        return (self.estimate - self.exact) / self.std_err


def _proportion(successes: int, trials: int) -> tuple[float, float]:
    p = successes / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


def estimate_distinct_prob(
    n: int, m: int, trials: int, rng: np.random.Generator, model: Optional[FadingModel] = None
) -> ProbabilityEstimate:
    """
    Pr[N_m] exactly, with a Monte Carlo estimate alongside.

    With *model* every trial draws an ``n x m`` source-relay channel and applies
    the first-hop rule, each relay picking its strongest source. Without it the
    selections are sampled as uniform indices, which is what that rule yields
    under i.i.d. continuous gains.
    """
    if m > n:
        raise DomainError(f"estimate_distinct_prob: m = {m} exceeds n = {n}")
    if trials < 1:
        raise DomainError("estimate_distinct_prob: trials must be >= 1")
    hits = 0
    per_trial = m if model is None else n * m
    rows_per_chunk = max(1, _CHUNK_ENTRIES // max(per_trial, 1))
    remaining = trials
    while remaining:
        rows = min(rows_per_chunk, remaining)
        if model is None:
            picks = rng.integers(0, n, size=(rows, m))
        else:
            picks = np.argmax(sample_many(model, rng, (rows, n, m)), axis=1)
        picks = np.sort(picks, axis=1)
        if m > 1:
            hits += int(np.all(np.diff(picks, axis=1) != 0, axis=1).sum())
        else:
            hits += rows
        remaining -= rows
    p, se = _proportion(hits, trials)
    return ProbabilityEstimate(exact=prob_all_distinct(n, m), estimate=p, std_err=se, trials=trials)


def scheduled_fraction(cfg: RelayConfig, trials: int, rng: np.random.Generator) -> float:
    """Mean fraction of sources picked by at least one relay in the first hop (m = n)."""
    if cfg.m != cfg.n:
        raise DomainError(f"scheduled_fraction: requires m == n, got m={cfg.m}, n={cfg.n}")
    n = cfg.n
    columns_per_chunk = max(1, _CHUNK_ENTRIES // n)
    total = 0.0
    for _ in range(trials):
        picked = np.zeros(n, dtype=bool)
        done = 0
        while done < n:
            cols = min(columns_per_chunk, n - done)
            picked[np.argmax(sample_many(cfg.model, rng, (n, cols)), axis=0)] = True
            done += cols
        total += picked.sum() / n
    return total / trials


def per_relay_success(cfg: RelayConfig, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    """Empirical first-hop Pr[SINR >= beta0] per relay, with its standard error."""
    successes = 0
    for _ in range(trials):
        report = first_hop_throughput(draw_channel(cfg.n, cfg.m, cfg.model, rng), cfg.params)
        successes += report.successes
    return _proportion(successes, trials * cfg.m)


def feige_event_rate(
    model: FadingModel, m: int, trials: int, rng: np.random.Generator, delta: float = 1.0
) -> tuple[float, float]:
    """Empirical Pr[I_{m-1} <= E[I_{m-1}] + delta] for m-1 i.i.d. gains (``<= m`` at unit mean)."""
    if m < 2:
        raise DomainError(f"feige_event_rate: m must be >= 2, got {m}")
    mean = moments(model).mean
    if not math.isfinite(mean):
        raise DomainError(f"feige_event_rate: {model.describe()} has infinite mean")
    threshold = (m - 1) * mean + delta
    hits = 0
    rows_per_chunk = max(1, _CHUNK_ENTRIES // (m - 1))
    remaining = trials
    while remaining:
        rows = min(rows_per_chunk, remaining)
        sums = sample_many(model, rng, (rows, m - 1)).sum(axis=1)
        hits += int((sums <= threshold).sum())
        remaining -= rows
    return _proportion(hits, trials)


@dataclass(frozen=True)
class RatioMoments:
    n: int
    trials: int
    nu: float
    mean_ratio: float
    mean_ratio_std_err: float
    good_fraction: float
    good_std_err: float

    @property
    def limit(self) -> float:
        """Large-n limit of E[I_n / M_n]."""
        return 1.0 / (1.0 - self.nu)


def ratio_moment(model: FadingModel, n: int, trials: int, rng: np.random.Generator) -> RatioMoments:
    """E[I_n / M_n] and Pr[M_n / I_n >= 1 - nu] for a Pareto law, I_n the sum and M_n the max of n draws."""
    if not model.family.is_pareto:
        raise DomainError(f"ratio_moment: requires a Pareto family, got {model.family.value}")
    nu = model.nu
    assert nu is not None
    ratios = np.empty(trials)
    rows_per_chunk = max(1, _CHUNK_ENTRIES // n)
    done = 0
    while done < trials:
        rows = min(rows_per_chunk, trials - done)
        draws = sample_many(model, rng, (rows, n))
        ratios[done:done + rows] = draws.sum(axis=1) / draws.max(axis=1)
        done += rows
    good = int((1.0 / ratios >= 1.0 - nu).sum())
    p, se = _proportion(good, trials)
    std = float(ratios.std(ddof=1)) if trials > 1 else 0.0
    logger.debug("relay.ratio_moment n=%d mean=%.6g good=%.6g", n, float(ratios.mean()), p)
    return RatioMoments(
        n=n,
        trials=trials,
        nu=nu,
        mean_ratio=float(ratios.mean()),
        mean_ratio_std_err=std / math.sqrt(trials),
        good_fraction=p,
        good_std_err=se,
    )
