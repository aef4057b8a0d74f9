"""Tests for core/run_profiles.py.

Covers:
  - built-in profiles and their grids
  - resolution by name, environment variable and fallback
  - logging of the active profile
"""

import logging

import pytest

from core.run_profiles import (
    ACCEPTANCE_MIN_TRIALS,
    ACCEPTANCE_PARETO_MAX_N,
    ACCEPTANCE_RELAY_MAX_N,
    PROFILES,
    RunProfile,
    get_active_profile,
    log_active_profile,
)


class TestProfiles:
    def test_names(self):
        assert set(PROFILES) == {"quick", "standard", "full"}
        assert all(isinstance(p, RunProfile) for p in PROFILES.values())

    def test_full_matches_acceptance_grids(self):
        full = PROFILES["full"]
        assert full.relay_grid == (256, 512, 1024, 2048, 4096, 8192, 16384)
        assert full.pareto_grid == (256, 512, 1024, 2048, 4096, 8192)
        assert full.relay_trials == full.pareto_trials == 200
        assert full.scheduled_fraction_n == 10_000

    def test_quick_is_cheapest(self):
        quick, standard = PROFILES["quick"], PROFILES["standard"]
        assert quick.relay_grid[-1] <= standard.relay_grid[-1]
        assert quick.relay_trials <= standard.relay_trials
        assert quick.first_moment_draws <= standard.first_moment_draws

    def test_grids_have_enough_points_to_fit(self):
        for profile in PROFILES.values():
            assert len(profile.relay_grid) >= 3
            assert len(profile.pareto_grid) >= 3

    def test_only_full_is_unreduced(self):
        assert not PROFILES["full"].reduced
        assert PROFILES["standard"].reduced
        assert PROFILES["quick"].reduced

    def test_full_reaches_acceptance_sizes(self):
        full = PROFILES["full"]
        assert full.relay_grid[-1] == ACCEPTANCE_RELAY_MAX_N
        assert full.pareto_grid[-1] == ACCEPTANCE_PARETO_MAX_N
        assert min(full.relay_trials, full.pareto_trials) >= ACCEPTANCE_MIN_TRIALS

    def test_ratio_grid_spans_three_decades(self):
        for profile in PROFILES.values():
            assert profile.ratio_grid == (100, 1_000, 10_000)

    def test_frozen(self):
        with pytest.raises(AttributeError):
            PROFILES["quick"].relay_trials = 1  # type: ignore[misc]

    def test_summary(self):
        text = PROFILES["quick"].summary()
        assert text.startswith("profile=quick ")
        assert "relay_grid=64..1024" in text
        assert "reduced=True" in text


class TestResolution:
    def test_by_name(self):
        assert get_active_profile("FULL ").name == "full"

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("SCALING_LAB_PROFILE", "quick")
        assert get_active_profile().name == "quick"

    def test_default(self, monkeypatch):
        monkeypatch.delenv("SCALING_LAB_PROFILE", raising=False)
        assert get_active_profile().name == "full"

    def test_unknown_falls_back(self, caplog):
        with caplog.at_level(logging.WARNING, logger="scalinglab"):
            assert get_active_profile("enormous").name == "full"
        assert "profiles.unknown_profile" in caplog.text

    def test_log_active_profile(self, caplog):
        with caplog.at_level(logging.INFO, logger="scalinglab"):
            profile = log_active_profile("quick")
        assert profile.name == "quick"
        assert "profiles.active profile=quick" in caplog.text
