"""
ScalingLab Run Profiles

Fixes the Monte Carlo effort spent by the acceptance suite. Select the active
profile with ``verify --profile NAME``, ``verify --quick``, or the
``SCALING_LAB_PROFILE`` environment variable. The selected profile is logged
once so it always appears alongside the verification report.

Profiles
--------
quick    : reduced grids and trial counts, finishes in a couple of minutes
standard : moderate grids
full     : default, the complete grids and trial counts of the acceptance criteria

On a reduced profile the scaling checks still run, but their verdict is
reported as not evaluated at acceptance size.

Environment variables
---------------------
``SCALING_LAB_PROFILE`` : one of ``quick``, ``standard``, ``full``
                          (default: ``full``)
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

from .common.observability import get_logger

LOGGER = get_logger("profiles")

# Sizes the scaling checks need before their verdict counts
ACCEPTANCE_RELAY_MAX_N = 16_384
ACCEPTANCE_PARETO_MAX_N = 8_192
ACCEPTANCE_MIN_TRIALS = 200

# ---------------------------------------------------------------------------
# Profile dataclass
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunProfile:
    """Immutable trial budget for one pass of the acceptance suite."""

    name: str
    description: str
    extreme_trials: int
    relay_grid: tuple[int, ...]
    relay_trials: int
    feige_trials: int
    pareto_grid: tuple[int, ...]
    pareto_trials: int
    scheduled_fraction_n: int
    scheduled_fraction_trials: int
    first_moment_draws: int
    first_moment_p_samples: int
    dominance_trials: int
    dominance_m_grid: tuple[int, ...]
    oracle_instances: int
    distinct_trials: int
    per_relay_trials: int
    ratio_grid: tuple[int, ...]
    ratio_trials: int

    @property
    def reduced(self) -> bool:
        """True when the relay or Pareto grids stop short of the acceptance sizes."""
        return (
            self.relay_grid[-1] < ACCEPTANCE_RELAY_MAX_N
            or self.pareto_grid[-1] < ACCEPTANCE_PARETO_MAX_N
            or min(self.relay_trials, self.pareto_trials) < ACCEPTANCE_MIN_TRIALS
        )

    def summary(self) -> str:
        return (
            f"profile={self.name} "
            f"extreme_trials={self.extreme_trials} "
            f"relay_grid={self.relay_grid[0]}..{self.relay_grid[-1]} relay_trials={self.relay_trials} "
            f"pareto_grid={self.pareto_grid[0]}..{self.pareto_grid[-1]} pareto_trials={self.pareto_trials} "
            f"dominance_trials={self.dominance_trials} reduced={self.reduced}"
        )


def _doubling(start: int, stop: int) -> tuple[int, ...]:
    grid = []
    n = start
    while n <= stop:
        grid.append(n)
        n *= 2
    return tuple(grid)


# ---------------------------------------------------------------------------
# Built-in profiles
# ---------------------------------------------------------------------------

PROFILES: dict[str, RunProfile] = {
    "quick": RunProfile(
        name="quick",
        description="Smoke run: small grids, short trial counts",
        extreme_trials=40_000,
        relay_grid=_doubling(64, 1024),
        relay_trials=60,
        feige_trials=20_000,
        pareto_grid=_doubling(32, 512),
        pareto_trials=30,
        scheduled_fraction_n=10_000,
        scheduled_fraction_trials=2,
        first_moment_draws=3_000,
        first_moment_p_samples=300_000,
        dominance_trials=20_000,
        dominance_m_grid=(4, 16, 64, 256),
        oracle_instances=30,
        distinct_trials=20_000,
        per_relay_trials=10,
        ratio_grid=(100, 1_000, 10_000),
        ratio_trials=500,
    ),
    "standard": RunProfile(
        name="standard",
        description="Moderate grids, enough trials for stable slopes",
        extreme_trials=100_000,
        relay_grid=_doubling(256, 4096),
        relay_trials=100,
        feige_trials=50_000,
        pareto_grid=_doubling(128, 2048),
        pareto_trials=60,
        scheduled_fraction_n=10_000,
        scheduled_fraction_trials=10,
        first_moment_draws=10_000,
        first_moment_p_samples=1_000_000,
        dominance_trials=100_000,
        dominance_m_grid=_doubling(4, 256),
        oracle_instances=100,
        distinct_trials=100_000,
        per_relay_trials=20,
        ratio_grid=(100, 1_000, 10_000),
        ratio_trials=1_000,
    ),
    "full": RunProfile(
        name="full",
        description="Default: complete grids and trial counts of every acceptance criterion",
        extreme_trials=100_000,
        relay_grid=_doubling(256, 16384),
        relay_trials=200,
        feige_trials=100_000,
        pareto_grid=_doubling(256, 8192),
        pareto_trials=200,
        scheduled_fraction_n=10_000,
        scheduled_fraction_trials=20,
        first_moment_draws=10_000,
        first_moment_p_samples=1_000_000,
        dominance_trials=100_000,
        dominance_m_grid=_doubling(4, 256),
        oracle_instances=100,
        distinct_trials=100_000,
        per_relay_trials=40,
        ratio_grid=(100, 1_000, 10_000),
        ratio_trials=2_000,
    ),
}

_DEFAULT_PROFILE = "full"

# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------

def get_active_profile(name: Optional[str] = None) -> RunProfile:
    """Return the profile named *name*, else ``SCALING_LAB_PROFILE``.

    Falls back to ``full`` if the name is unrecognised and emits a warning.
    """
    if name is None:
        name = os.getenv("SCALING_LAB_PROFILE", _DEFAULT_PROFILE)
    name = name.lower().strip()
    if name not in PROFILES:
        LOGGER.warning(
            "profiles.unknown_profile profile=%s available=%s falling_back_to=%s",
            name,
            list(PROFILES),
            _DEFAULT_PROFILE,
        )
        name = _DEFAULT_PROFILE
    return PROFILES[name]


def log_active_profile(name: Optional[str] = None) -> RunProfile:
    """Resolve and log the active profile."""
    profile = get_active_profile(name)
    LOGGER.info("profiles.active %s description=%r", profile.summary(), profile.description)
    return profile
