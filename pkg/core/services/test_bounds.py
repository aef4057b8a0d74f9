"""Tests for core/services/bounds.py.

Covers:
  - concentration bounds (Feige, Maurer, Chebyshev)
  - the single-link SINR success bound and its domain
  - first-moment existence bound, single-hop and two-hop
  - all-distinct probability, its lower bound and limit
  - throughput overlays and curve emission
  - existence, Maurer and Feige bounds hold against simulated channels
"""

import math

import numpy as np
import pytest

from core.common.errors import DomainError
from core.common.seeding import make_rng
from core.models.channel import LinkParams
from core.models.fading import FadingModel
from core.models.protocol import BoundKind
from core.services import bounds, genie, relay
from core.services.channel import draw_channel

PARAMS = LinkParams(rho=10.0, beta0=1.0)


# ---------------------------------------------------------------------------
# Concentration
# ---------------------------------------------------------------------------

class TestConcentration:
    def test_feige_floor(self):
        assert bounds.feige_lower(1.0) == pytest.approx(1.0 / 13.0)
        assert bounds.feige_lower(50.0) == pytest.approx(1.0 / 13.0)

    def test_feige_small_delta(self):
        assert bounds.feige_lower(0.05) == pytest.approx(0.05 / 1.05)

    @pytest.mark.parametrize("delta", [0.0, -1.0, math.nan])
    def test_feige_domain(self, delta):
        with pytest.raises(DomainError):
            bounds.feige_lower(delta)

    def test_maurer(self):
        assert bounds.maurer_lower_tail(10, 0.5, 5.0) == pytest.approx(math.exp(-2.5))
        with pytest.raises(DomainError):
            bounds.maurer_lower_tail(0, 0.5, 5.0)

    def test_chebyshev(self):
        assert bounds.chebyshev_signal_tail(1.0, 1.0, 1.0, 10.0, 2.0) == pytest.approx(1.0 / 1.21)
        assert bounds.chebyshev_signal_tail(1.0, 100.0, 1.0, 10.0, 2.0) == 1.0

    def test_chebyshev_needs_positive_margin(self):
        with pytest.raises(DomainError):
            bounds.chebyshev_signal_tail(1.0, 1.0, 1.0, 10.0, 0.5)


# ---------------------------------------------------------------------------
# SINR success bound
# ---------------------------------------------------------------------------

class TestSinrSuccessUpper:
    def test_too_few_transmitters(self):
        with pytest.raises(DomainError, match="too small"):
            bounds.sinr_success_upper(2, 1.0, 1.0, 1.0, 10.0)

    def test_clamped_for_small_m(self):
        assert bounds.sinr_success_upper(4, 1.0, 1.0, 1.0, 10.0) == 1.0

    def test_large_m_value(self):
        s = 127.5
        interference = math.exp(-255 * 0.25 / 4.0)
        signal = 1.0 / (s + 0.1 - 1.0) ** 2
        assert bounds.sinr_success_upper(256, 1.0, 1.0, 1.0, 10.0) == pytest.approx(interference + signal)

    def test_decays_roughly_like_inverse_square(self):
        scaled = [bounds.sinr_success_upper(m, 1.0, 1.0, 1.0, 10.0) * m * m for m in (32, 64, 128, 256)]
        assert all(b <= a for a, b in zip(scaled, scaled[1:]))
        assert scaled[-1] == pytest.approx(4.097, abs=0.01)

    def test_split_must_stay_below_mean_interference(self):
        with pytest.raises(DomainError):
            bounds.sinr_success_upper(8, 1.0, 1.0, 1.0, 10.0, s=7.0)

    def test_m_at_least_two(self):
        with pytest.raises(DomainError):
            bounds.sinr_success_upper(1, 1.0, 1.0, 1.0, 10.0)


# ---------------------------------------------------------------------------
# Existence and all-distinct
# ---------------------------------------------------------------------------

class TestExistence:
    def test_single_hop(self):
        expected = math.exp(10 * (math.log(100) + 1 - math.log(10) + math.log(0.01)))
        assert bounds.genie_existence_upper(100, 10, 0.01) == pytest.approx(expected)

    def test_two_hop_uses_falling_factorial(self):
        assert bounds.genie_existence_upper(5, 2, 0.1, "two_hop") == pytest.approx(0.2)

    def test_clamped_and_edges(self):
        assert bounds.genie_existence_upper(100, 2, 0.5) == 1.0
        assert bounds.genie_existence_upper(100, 0, 0.3) == 1.0
        assert bounds.genie_existence_upper(100, 5, 0.0) == 0.0

    def test_domain(self):
        with pytest.raises(DomainError):
            bounds.genie_existence_upper(10, 11, 0.1)
        with pytest.raises(DomainError):
            bounds.genie_existence_upper(10, 2, 1.1)

    def test_knee(self):
        knee = bounds.genie_bound_knee(1000, 1.0, 1.0, 1.0, 10.0)
        assert knee is not None and 20 < knee < 100
        p = bounds.sinr_success_upper(knee, 1.0, 1.0, 1.0, 10.0)
        assert bounds.genie_existence_upper(1000, knee, p) < 0.5

    def test_knee_unreachable(self):
        assert bounds.genie_bound_knee(50, 1.0, 1.0, 1.0, 10.0, threshold=0.0) is None


class TestAllDistinct:
    def test_small_exact(self):
        assert bounds.prob_all_distinct(3, 2) == pytest.approx(2.0 / 3.0)
        assert bounds.prob_all_distinct(7, 1) == 1.0

    def test_large_matches_product(self):
        n, m = 10_000, 100
        expected = math.prod((n - k) / n for k in range(m))
        assert bounds.prob_all_distinct(n, m) == pytest.approx(expected, rel=1e-10)
        assert expected == pytest.approx(0.6086, abs=1e-3)

    def test_lower_bound_and_limit(self):
        lower = bounds.all_distinct_lower(10_000, 100)
        assert lower <= bounds.prob_all_distinct(10_000, 100)
        assert lower == pytest.approx(bounds.all_distinct_limit(1.0), rel=0.02)
        assert bounds.all_distinct_limit(1.0) == pytest.approx(math.exp(-1.0))

    def test_domain(self):
        with pytest.raises(DomainError):
            bounds.prob_all_distinct(3, 4)
        with pytest.raises(DomainError):
            bounds.all_distinct_lower(3, 4)


# ---------------------------------------------------------------------------
# Overlays and curves
# ---------------------------------------------------------------------------

class TestOverlays:
    def test_opportunistic_lower(self):
        assert bounds.opportunistic_lower(100) == pytest.approx(99 / math.sqrt(199) / 26)

    def test_linear_scheduled_mean(self):
        assert bounds.linear_scheduled_mean(1) == 1.0
        assert bounds.linear_scheduled_mean(2) == pytest.approx(1.5)
        assert bounds.linear_scheduled_mean(3) == pytest.approx(19.0 / 9.0)

    def test_linear_fraction_approaches_limit(self):
        n = 10_000
        assert bounds.linear_scheduled_mean(n) / n == pytest.approx(1.0 - math.exp(-1.0), abs=1e-4)
        assert bounds.linear_scheduled_limit(n) == pytest.approx(n * (1.0 - math.exp(-1.0)))


class TestCurves:
    def test_sinr_curve_keeps_raw(self):
        low, high = bounds.sinr_success_curve([4, 256], 1.0, 1.0, 1.0, 10.0)
        assert low.value == 1.0 and low.raw > 1.0
        assert low.input("s") == 1.5
        assert high.value == high.raw
        assert set(high.extra) == {"interference_term", "signal_term"}
        assert high.kind is BoundKind.UPPER

    def test_existence_curve(self):
        curves = bounds.genie_existence_curve(1000, [64, 128], 1.0, 1.0, 1.0, 10.0, mode="two-hop")
        assert [c.name for c in curves] == ["genie_existence_upper_two_hop"] * 2
        assert all(0.0 <= c.value <= 1.0 for c in curves)

    def test_scalar_curve(self):
        curves = bounds.scalar_curve("feige_lower", [0.05, 2.0])
        assert [c.value for c in curves] == [pytest.approx(0.05 / 1.05), pytest.approx(1.0 / 13.0)]
        assert curves[0].kind is BoundKind.LOWER

    def test_non_probability_curve(self):
        (curve,) = bounds.scalar_curve("opportunistic_lower", [4096])
        assert curve.value > 1.0
        assert not curve.is_probability

    def test_unknown_curve(self):
        with pytest.raises(DomainError, match="unknown curve"):
            bounds.scalar_curve("nope", [1.0])

    def test_curve_names(self):
        assert "sinr_success_upper" in bounds.CURVE_NAMES
        assert "genie_existence_upper" in bounds.CURVE_NAMES
        assert list(bounds.CURVE_NAMES) == sorted(bounds.CURVE_NAMES)

    def test_curve_rows(self):
        rows = bounds.curve_rows(bounds.scalar_curve("linear_scheduled_mean", [2, 3]), "n")
        assert rows[0] == (2.0, pytest.approx(1.5), pytest.approx(1.5), "lower")


# ---------------------------------------------------------------------------
# Bounds against simulation
# ---------------------------------------------------------------------------

class TestDominatesSimulation:
    @pytest.mark.parametrize("n, draws", [(6, 300), (10, 150), (12, 80)])
    def test_existence_bound_above_empirical(self, n, draws):
        rng = make_rng(40 + n)
        m_star = np.array([
            genie.max_valid_single_hop(draw_channel(n, n, FadingModel.rayleigh(1.0), rng), PARAMS).m_star
            for _ in range(draws)
        ])
        for m in range(1, n + 1):
            # exact single-link success with m - 1 unit-mean Rayleigh interferers
            p_m = math.exp(-PARAMS.beta0 / PARAMS.rho) * (1.0 + PARAMS.beta0) ** -(m - 1)
            rate = float((m_star >= m).mean())
            std_err = math.sqrt(rate * (1.0 - rate) / draws)
            assert rate <= bounds.genie_existence_upper(n, m, p_m, "single") + 3 * std_err

    @pytest.mark.parametrize("x", [0.1, 0.2, 0.3, 0.5])
    def test_maurer_above_empirical_lower_tail(self, x):
        N, trials = 50, 20_000
        sums = make_rng(50).exponential(1.0, size=(trials, N)).sum(axis=1)
        rate = float((sums <= N - N * x).mean())
        std_err = math.sqrt(rate * (1.0 - rate) / trials)
        assert rate <= bounds.maurer_lower_tail(N, x, 2.0 * N) + 3 * std_err

    @pytest.mark.parametrize("delta", [0.05, 0.25, 1.0, 4.0])
    @pytest.mark.parametrize("model", [FadingModel.rayleigh(1.0), FadingModel.extremal(1.0, 1.0, 64)])
    def test_feige_below_empirical(self, delta, model):
        rate, std_err = relay.feige_event_rate(model, 64, 4_000, make_rng(51), delta=delta)
        assert rate + 3 * std_err >= bounds.feige_lower(delta)
