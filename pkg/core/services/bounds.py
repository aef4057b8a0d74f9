"""
services/bounds.py
Closed-form probability and throughput bounds used as theory overlays and as
dominance targets for the Monte Carlo estimates.

Combinatorial terms are evaluated through log-gamma so n up to 1e5 does not
overflow. Probability bounds are clamped into [0, 1] after composition; the
``*_curve`` helpers keep the unclamped value as ``raw``.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

from scipy.special import gammaln

from ..common.errors import DomainError
from ..models.protocol import BoundCurve, BoundKind, GenieMode

FEIGE_FLOOR = 1.0 / 13.0


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


def _exp_clamped(log_value: float) -> float:
    return 1.0 if log_value >= 0.0 else math.exp(log_value)


# ---------------------------------------------------------------------------
# Concentration bounds
# ---------------------------------------------------------------------------

def feige_lower(delta: float) -> float:
    """Lower bound on Pr[S <= E[S] + delta] for nonnegative summands with means <= 1."""
    if not delta > 0:
        raise DomainError(f"feige_lower: delta must be > 0, got {delta!r}")
    return min(delta / (1.0 + delta), FEIGE_FLOOR)


def maurer_lower_tail(N: int, x: float, sum_second_moments: float) -> float:
    """Upper bound on Pr[S <= E[S] - N x] for N nonnegative independent summands."""
    if N < 1:
        raise DomainError(f"maurer_lower_tail: N must be >= 1, got {N}")
    if not x > 0:
        raise DomainError(f"maurer_lower_tail: x must be > 0, got {x!r}")
    if not sum_second_moments > 0:
        raise DomainError(f"maurer_lower_tail: sum_second_moments must be > 0, got {sum_second_moments!r}")
    return math.exp(-(N * N * x * x) / (2.0 * sum_second_moments))


def _chebyshev_margin(mu: float, beta0: float, rho: float, s: float) -> float:
    return beta0 * s + beta0 / rho - mu


def chebyshev_signal_tail(mu: float, sigma2: float, beta0: float, rho: float, s: float) -> float:
    """Upper bound on Pr[gain >= beta0 (1/rho + s)] via Chebyshev."""
    margin = _chebyshev_margin(mu, beta0, rho, s)
    if not margin > 0:
        raise DomainError(
            f"chebyshev_signal_tail: need beta0*(1/rho + s) > mu, got beta0*s + beta0/rho - mu = {margin!r}"
        )
    return min(1.0, sigma2 / (margin * margin))


def _sinr_upper_terms(
    m: int, mu: float, sigma2: float, beta0: float, rho: float, s: Optional[float]
) -> tuple[float, float, float]:
    if m < 2:
        raise DomainError(f"sinr_success_upper: m must be >= 2, got {m}")
    if not (mu > 0 and sigma2 >= 0):
        raise DomainError("sinr_success_upper: need mu > 0 and sigma2 >= 0")
    if s is None:
        s = (m - 1) * mu / 2.0
    if not s < (m - 1) * mu:
        raise DomainError(f"sinr_success_upper: s = {s!r} must be below the mean interference {(m - 1) * mu!r}")
    if s < mu / beta0 - 1.0 / rho or not _chebyshev_margin(mu, beta0, rho, s) > 0:
        raise DomainError(
            f"sinr_success_upper: s = {s!r} violates s >= mu/beta0 - 1/rho (m = {m} too small for these parameters)"
        )
    gap = mu - s / (m - 1)
    interference_term = math.exp(-(m - 1) * gap * gap / (2.0 * (mu * mu + sigma2)))
    margin = _chebyshev_margin(mu, beta0, rho, s)
    signal_term = sigma2 / (margin * margin)
    return interference_term, signal_term, s


def sinr_success_upper(
    m: int, mu: float, sigma2: float, beta0: float, rho: float, s: Optional[float] = None
) -> float:
    """
    Upper bound on the single-link success probability with m active transmitters:
    lower interference tail (Maurer) plus signal tail (Chebyshev), split at
    ``s = (m - 1) mu / 2`` unless overridden.
    """
    first, second, _ = _sinr_upper_terms(m, mu, sigma2, beta0, rho, s)
    return _clamp(first + second)


# ---------------------------------------------------------------------------
# Combinatorial bounds
# ---------------------------------------------------------------------------

def _log_existence(n: int, m: int, p_bound: float, mode: GenieMode) -> float:
    if mode is GenieMode.SINGLE:
        # C(n, m) <= (n e / m)^m
        return m * (math.log(n) + 1.0 - math.log(m) + math.log(p_bound))
    # C(n, m) * m! = n! / (n - m)!
    return float(gammaln(n + 1) - gammaln(n - m + 1)) + m * math.log(p_bound)


def genie_existence_upper(n: int, m: int, p_bound: float, mode: "GenieMode | str" = GenieMode.SINGLE) -> float:
    """Upper bound on Pr[X(m) >= 1] by the first moment."""
    mode = GenieMode.parse(mode)
    if not 0.0 <= p_bound <= 1.0:
        raise DomainError(f"genie_existence_upper: p_bound must lie in [0, 1], got {p_bound!r}")
    if m < 0 or m > n:
        raise DomainError(f"genie_existence_upper: need 0 <= m <= n, got m={m}, n={n}")
    if m == 0:
        return 1.0
    if p_bound == 0.0:
        return 0.0
    return _exp_clamped(_log_existence(n, m, p_bound, mode))


def prob_all_distinct(n: int, m: int) -> float:
    """Pr[N_m]: m uniform picks out of n are all different, ``n!/((n-m)! n^m)``."""
    if n < 1 or m < 0:
        raise DomainError(f"prob_all_distinct: need n >= 1 and m >= 0, got n={n}, m={m}")
    if m > n:
        raise DomainError(f"prob_all_distinct: m = {m} exceeds n = {n}")
    if m <= 1:
        return 1.0
    return math.exp(float(gammaln(n + 1) - gammaln(n - m + 1)) - m * math.log(n))


def all_distinct_lower(n: int, m: int) -> float:
    """``((n - m + 1)/n)^m``, a lower bound on Pr[N_m]."""
    if m > n or m < 0 or n < 1:
        raise DomainError(f"all_distinct_lower: need 0 <= m <= n, got m={m}, n={n}")
    return ((n - m + 1) / n) ** m


def all_distinct_limit(c3: float) -> float:
    """Limit of Pr[N_m] when m = c3 * sqrt(n) and n grows."""
    return math.exp(-c3 * c3)


def genie_bound_knee(
    n: int,
    mu: float,
    sigma2: float,
    beta0: float,
    rho: float,
    mode: "GenieMode | str" = GenieMode.SINGLE,
    threshold: float = 0.5,
) -> Optional[int]:
    """Smallest m whose first-moment existence bound falls below *threshold*."""
    mode = GenieMode.parse(mode)
    for m in range(2, n + 1):
        try:
            p = sinr_success_upper(m, mu, sigma2, beta0, rho)
        except DomainError:
            continue
        if genie_existence_upper(n, m, p, mode) < threshold:
            return m
    return None


# ---------------------------------------------------------------------------
# Throughput overlays
# ---------------------------------------------------------------------------

def opportunistic_lower(n: int) -> float:
    """Per-hop success floor for the square-root scheme: ``(1/26)(n - 1)/sqrt(2n - 1)`` packets."""
    if n < 1:
        raise DomainError(f"opportunistic_lower: n must be >= 1, got {n}")
    return (n - 1) / math.sqrt(2 * n - 1) / 26.0


def linear_scheduled_mean(n: int) -> float:
    """Exact mean number of distinct sources picked when n relays choose uniformly."""
    if n < 1:
        raise DomainError(f"linear_scheduled_mean: n must be >= 1, got {n}")
    return n * -math.expm1(n * math.log1p(-1.0 / n)) if n > 1 else 1.0


def linear_scheduled_limit(n: int) -> float:
    return n * (1.0 - math.exp(-1.0))


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

def sinr_success_curve(
    m_grid: Sequence[int], mu: float, sigma2: float, beta0: float, rho: float
) -> list[BoundCurve]:
    curves = []
    for m in m_grid:
        first, second, s = _sinr_upper_terms(m, mu, sigma2, beta0, rho, None)
        raw = first + second
        curves.append(
            BoundCurve(
                name="sinr_success_upper",
                inputs=(("m", float(m)), ("mu", mu), ("sigma2", sigma2), ("beta0", beta0), ("rho", rho), ("s", s)),
                value=_clamp(raw),
                raw=raw,
                kind=BoundKind.UPPER,
                extra={"interference_term": first, "signal_term": second},
            )
        )
    return curves


def genie_existence_curve(
    n: int, m_grid: Sequence[int], mu: float, sigma2: float, beta0: float, rho: float,
    mode: "GenieMode | str" = GenieMode.SINGLE,
) -> list[BoundCurve]:
    mode = GenieMode.parse(mode)
    curves = []
    for m in m_grid:
        p = sinr_success_upper(m, mu, sigma2, beta0, rho)
        log_raw = _log_existence(n, m, p, mode) if p > 0 else -math.inf
        raw = math.exp(min(log_raw, 700.0))
        curves.append(
            BoundCurve(
                name=f"genie_existence_upper_{mode.value}",
                inputs=(("n", float(n)), ("m", float(m)), ("p_bound", p)),
                value=genie_existence_upper(n, m, p, mode),
                raw=raw,
                kind=BoundKind.UPPER,
            )
        )
    return curves


_SCALAR_CURVES: dict[str, tuple[str, BoundKind, bool, Callable[[float], float]]] = {
    "feige_lower": ("delta", BoundKind.LOWER, True, feige_lower),
    "prob_all_distinct_sqrt": ("n", BoundKind.LOWER, True, lambda n: prob_all_distinct(int(n), max(1, int(round(math.sqrt(n)))))),
    "opportunistic_lower": ("n", BoundKind.LOWER, False, lambda n: opportunistic_lower(int(n))),
    "linear_scheduled_mean": ("n", BoundKind.LOWER, False, lambda n: linear_scheduled_mean(int(n))),
}

CURVE_NAMES = tuple(sorted(set(_SCALAR_CURVES) | {"sinr_success_upper", "genie_existence_upper"}))


def scalar_curve(name: str, grid: Sequence[float]) -> list[BoundCurve]:
    """Evaluate a one-parameter bound over *grid*."""
    if name not in _SCALAR_CURVES:
        raise DomainError(f"unknown curve {name!r}; choose one of {list(CURVE_NAMES)}")
    label, kind, is_probability, fn = _SCALAR_CURVES[name]
    return [
        BoundCurve(name=name, inputs=((label, float(x)),), value=fn(x), kind=kind, is_probability=is_probability)
        for x in grid
    ]


def curve_rows(curves: Sequence[BoundCurve], parameter: str) -> list[tuple[float, float, float, str]]:
    """Rows ``(parameter, bound_value, raw, kind)`` for CSV emission."""
    return [(c.input(parameter), c.value, c.raw, c.kind.value) for c in curves]
