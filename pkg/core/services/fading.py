"""
services/fading.py
CDF, quantile, sampling and moments for every supported power-gain law.

All functions accept a scalar or an array for their point argument and return
the same shape back (a Python float for scalar input).
"""

from __future__ import annotations

import math
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from ..common.errors import DomainError
from ..common.observability import get_logger
from ..models.fading import FadingFamily, FadingModel, MomentReport

logger = get_logger("fading")

Number = Union[float, np.ndarray]

_DB_TO_NEPER = math.log(10.0) / 10.0


def _out(result: np.ndarray, scalar: bool) -> Number:
    return float(result) if scalar else result


def _lognormal_shape(model: FadingModel) -> tuple[float, float]:
    """(location, scale) of ln(gain) for the unit-mean log-normal law."""
    s = model["sigma_db"] * _DB_TO_NEPER
    return -0.5 * s * s, s


def _pareto_scale(model: FadingModel) -> tuple[float, float]:
    """(K, nu) such that ``1 - F(x) = K * x**(-nu)`` above ``x_min = K**(1/nu)``."""
    if model.family is FadingFamily.PARETO_PATHLOSS:
        return math.pi, 2.0 / model["alpha"]
    nu = model["nu"]
    return model["c0"] / math.gamma(1.0 - nu), nu


def _extremal_scale(model: FadingModel) -> tuple[float, float, int]:
    n = model.population
    return model["mu"], model["sigma"] * math.sqrt(2 * n - 1), n


def support(model: FadingModel) -> tuple[float, float]:
    """Closed support interval ``(low, high)``; ``high`` may be ``inf``."""
    family = model.family
    if family is FadingFamily.EXTREMAL:
        mu, scale, n = _extremal_scale(model)
        return mu - scale / (n - 1), mu + scale
    if family.is_pareto:
        k, nu = _pareto_scale(model)
        return k ** (1.0 / nu), math.inf
    return 0.0, math.inf


def feller_constant(model: FadingModel) -> float:
    """Scale ``c0`` in the tail law ``1 - F(x) ~ c0 x^-nu / Gamma(1 - nu)``."""
    if model.family is FadingFamily.PARETO_GENERAL:
        return model["c0"]
    if model.family is FadingFamily.PARETO_PATHLOSS:
        nu = 2.0 / model["alpha"]
        if nu >= 1.0:
            return math.inf
        return math.pi * math.gamma(1.0 - nu)
    raise DomainError(f"{model.family.value}: feller constant is defined for Pareto families only")


# ---------------------------------------------------------------------------
# CDF / quantile
# ---------------------------------------------------------------------------

def cdf(model: FadingModel, x: ArrayLike) -> Number:
    """Pr[gain <= x]."""
    scalar = np.ndim(x) == 0
    xs = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(xs)):
        raise DomainError("cdf: x must be finite")
    family = model.family

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if family is FadingFamily.RAYLEIGH:
            result = np.where(xs > 0, -np.expm1(-np.maximum(xs, 0.0) / model["mu"]), 0.0)
        elif family is FadingFamily.LOGNORMAL:
            loc, scale = _lognormal_shape(model)
            safe = np.where(xs > 0, xs, 1.0)
            result = np.where(xs > 0, special.ndtr((np.log(safe) - loc) / scale), 0.0)
        elif family is FadingFamily.NAKAGAMI:
            shape = model["shape"]
            result = np.where(xs > 0, special.gammainc(shape, np.maximum(xs, 0.0) * shape / model["mu"]), 0.0)
        elif family is FadingFamily.EXTREMAL:
            mu, scale, n = _extremal_scale(model)
            t = (xs - mu) / scale
            base = np.clip(t * (n - 1) / n + 1.0 / n, 0.0, 1.0)
            result = base ** (1.0 / (n - 1))
        else:
            k, nu = _pareto_scale(model)
            x_min = k ** (1.0 / nu)
            safe = np.where(xs >= x_min, xs, x_min)
            result = np.where(xs >= x_min, 1.0 - k * safe ** (-nu), 0.0)

    return _out(np.clip(result, 0.0, 1.0), scalar)


def quantile(model: FadingModel, u: ArrayLike) -> Number:
    """Inverse CDF. ``u = 1`` is refused for laws with unbounded support."""
    scalar = np.ndim(u) == 0
    us = np.asarray(u, dtype=np.float64)
    if np.any(~np.isfinite(us)) or np.any(us < 0) or np.any(us > 1):
        raise DomainError("quantile: u must lie in [0, 1]")
    family = model.family
    if family is not FadingFamily.EXTREMAL and np.any(us == 1.0):
        raise DomainError(f"quantile: u = 1 has no finite quantile for {family.value} (unbounded support)")

    if family is FadingFamily.RAYLEIGH:
        result = -model["mu"] * np.log1p(-us)
    elif family is FadingFamily.LOGNORMAL:
        loc, scale = _lognormal_shape(model)
        with np.errstate(divide="ignore"):
            result = np.exp(loc + scale * special.ndtri(us))
    elif family is FadingFamily.NAKAGAMI:
        shape = model["shape"]
        result = special.gammaincinv(shape, us) * model["mu"] / shape
    elif family is FadingFamily.EXTREMAL:
        mu, scale, n = _extremal_scale(model)
        result = mu + scale * (n * us ** (n - 1) - 1.0) / (n - 1)
        low, high = support(model)
        result = np.clip(result, low, high)
    else:
        k, nu = _pareto_scale(model)
        result = (k / (1.0 - us)) ** (1.0 / nu)

    return _out(result, scalar)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _check_power_law(model: FadingModel) -> None:
    low, _ = support(model)
    if low < 0:
        raise DomainError(
            f"{model.describe()}: support starts at {low:g} < 0 and cannot be sampled as a power gain"
        )


def sample_many(model: FadingModel, rng: np.random.Generator, size) -> np.ndarray:
    """Draw an array of i.i.d. gains with shape *size*."""
    _check_power_law(model)
    family = model.family
    if family is FadingFamily.RAYLEIGH:
        return rng.exponential(scale=model["mu"], size=size)
    if family is FadingFamily.LOGNORMAL:
        loc, scale = _lognormal_shape(model)
        return rng.lognormal(mean=loc, sigma=scale, size=size)
    if family is FadingFamily.NAKAGAMI:
        shape = model["shape"]
        return rng.gamma(shape=shape, scale=model["mu"] / shape, size=size)
    # inverse transform; rng.random() is in [0, 1) so the Pareto quantile stays finite
    return np.asarray(quantile(model, rng.random(size=size)), dtype=np.float64)


def sample(model: FadingModel, rng: np.random.Generator) -> float:
    return float(sample_many(model, rng, 1)[0])


# ---------------------------------------------------------------------------
# Moments and extremes
# ---------------------------------------------------------------------------

def moments(model: FadingModel) -> MomentReport:
    family = model.family
    if family is FadingFamily.RAYLEIGH:
        mu = model["mu"]
        return MomentReport(mean=mu, variance=mu * mu)
    if family is FadingFamily.LOGNORMAL:
        _, scale = _lognormal_shape(model)
        return MomentReport(mean=1.0, variance=math.expm1(scale * scale))
    if family is FadingFamily.NAKAGAMI:
        mu = model["mu"]
        return MomentReport(mean=mu, variance=mu * mu / model["shape"])
    if family is FadingFamily.EXTREMAL:
        return MomentReport(mean=model["mu"], variance=model["sigma"] ** 2)

    # Both Pareto families have nu <= 1 (the nu = 1 boundary counts as infinite),
    # so the mean and the variance are infinite.
    return MomentReport(mean=math.inf, variance=math.inf, tail_index=model.nu)


def extreme_mean(model: FadingModel) -> float:
    """E[max of n draws] for the extremal law: ``mu + sigma (n-1) / sqrt(2n-1)``."""
    if model.family is not FadingFamily.EXTREMAL:
        raise DomainError(f"extreme_mean: requires the extremal family, got {model.family.value}")
    n = model.population
    return model["mu"] + model["sigma"] * (n - 1) / math.sqrt(2 * n - 1)


def extreme_cdf(model: FadingModel, x: ArrayLike, count: Optional[int] = None) -> Number:
    """Pr[max of *count* i.i.d. draws <= x]; *count* defaults to the extremal population."""
    if count is None:
        count = model.population
    if count < 1:
        raise DomainError(f"extreme_cdf: count must be >= 1, got {count}")
    scalar = np.ndim(x) == 0
    result = np.asarray(cdf(model, x), dtype=np.float64) ** count
    return _out(result, scalar)


def extreme_exceedance(model: FadingModel, threshold: ArrayLike, count: Optional[int] = None) -> Number:
    scalar = np.ndim(threshold) == 0
    result = 1.0 - np.asarray(extreme_cdf(model, threshold, count), dtype=np.float64)
    return _out(result, scalar)


def sample_maxima(model: FadingModel, rng: np.random.Generator, count: int, trials: int) -> np.ndarray:
    """*trials* independent maxima of *count* draws each, sampled through the maximum's own law."""
    if count < 1 or trials < 1:
        raise DomainError("sample_maxima: count and trials must be >= 1")
    _check_power_law(model)
    u = rng.random(size=trials) ** (1.0 / count)
    if model.family is not FadingFamily.EXTREMAL:
        u = np.minimum(u, np.nextafter(1.0, 0.0))
    return np.asarray(quantile(model, u), dtype=np.float64)


def diversity_gain(
    model: FadingModel,
    n_grid: list[int],
    trials: int,
    rng: np.random.Generator,
) -> list[tuple[int, float, float]]:
    """Empirical (n, mean, std_err) of the maximum of n draws for each n."""
    rows = []
    for n in n_grid:
        maxima = sample_maxima(model, rng, n, trials)
        std_err = float(maxima.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        rows.append((n, float(maxima.mean()), std_err))
        logger.debug("fading.diversity n=%d mean=%.6g", n, rows[-1][1])
    return rows
