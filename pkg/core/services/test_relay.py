"""Tests for core/services/relay.py.

Covers:
  - relay configurations for square-root and linear relaying
  - first-hop scheduling, SINR evaluation, duplicate crediting and source relabelling
  - second-hop feedback, relay contention and SINR among scheduled relays
  - two-hop combination and determinism
  - estimators: all-distinct probability, scheduled fraction,
    per-relay success, concentration event rate, Pareto ratio
"""

import math

import numpy as np
import pytest

from core.common.errors import DomainError
from core.common.seeding import make_rng
from core.models.channel import ChannelMatrix, LinkParams
from core.models.fading import FadingModel
from core.models.protocol import RelayConfig
from core.services import relay
from core.services.channel import draw_channel
from core.services.bounds import prob_all_distinct

PARAMS = LinkParams(rho=10.0, beta0=1.0)
LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------

class TestConfigs:
    def test_sqrt_relay_config(self):
        cfg = relay.sqrt_relay_config(100)
        assert cfg.m == 7
        assert cfg.model == FadingModel.extremal(1.0, 1.0, 100)
        assert cfg.m_rule == "paper_sqrt"
        assert cfg.params.beta0 == 1.0

    def test_sqrt_relay_config_needs_pairs(self):
        with pytest.raises(DomainError):
            relay.sqrt_relay_config(1)

    def test_pareto_linear_config(self):
        cfg = relay.pareto_linear_config(100, 4.0)
        assert cfg.m == cfg.n == 100
        assert cfg.params.beta0 == pytest.approx(0.5)
        assert cfg.params.r0 == pytest.approx(math.log(1.5))

    def test_pareto_linear_needs_alpha_above_two(self):
        with pytest.raises(DomainError):
            relay.pareto_linear_config(100, 2.0)


# ---------------------------------------------------------------------------
# First hop
# ---------------------------------------------------------------------------

class TestFirstHop:
    def test_strongest_source_per_relay(self):
        H = ChannelMatrix([[1.0, 5.0], [3.0, 2.0], [2.0, 1.0]])
        assert relay.schedule_first_hop(H) == (1, 0)

    def test_distinct_picks_all_pass(self):
        H = ChannelMatrix([[5.0, 0.1], [0.1, 5.0], [0.1, 0.1]])
        report = relay.first_hop_throughput(H, PARAMS)
        assert report.selections == (0, 1)
        assert report.distinct_event
        assert (report.successes, report.delivered) == (2, 2)
        assert report.throughput_bits == pytest.approx(2 * LN2)
        assert relay.conditional_first_hop_throughput(report) == report.throughput_bits

    def test_shared_source_credited_once(self):
        H = ChannelMatrix([[5.0, 5.0], [0.1, 0.1]])
        report = relay.first_hop_throughput(H, PARAMS)
        assert report.selections == (0, 0)
        assert report.active == (0,)
        assert report.successes == 2
        assert report.delivered == 1
        assert not report.distinct_event
        assert relay.conditional_first_hop_throughput(report) == 0.0

    def test_interference_blocks(self):
        H = ChannelMatrix([[1.0, 0.95], [0.95, 1.0]])
        report = relay.first_hop_throughput(H, PARAMS)
        assert report.successes == 0
        assert report.throughput_bits == 0.0

    def test_relabelling_sources_permutes_selections(self):
        rng = make_rng(31)
        for _ in range(20):
            H = draw_channel(20, 5, FadingModel.extremal(1.0, 1.0, 20), rng)
            perm = rng.permutation(20)
            inverse = np.argsort(perm)
            shuffled = ChannelMatrix(H.gains[perm])
            before = relay.first_hop_throughput(H, PARAMS)
            after = relay.first_hop_throughput(shuffled, PARAMS)
            assert after.selections == tuple(int(inverse[s]) for s in before.selections)
            assert (after.successes, after.delivered) == (before.successes, before.delivered)
            assert after.throughput_bits == pytest.approx(before.throughput_bits)
            assert after.distinct_event == before.distinct_event

    def test_to_schedule(self):
        H = ChannelMatrix([[5.0, 0.1], [0.1, 5.0]])
        outcome = relay.first_hop_throughput(H, PARAMS).to_schedule()
        assert outcome.active_tx == frozenset({0, 1})
        assert outcome.successes == ((0, 0), (1, 1))


# ---------------------------------------------------------------------------
# Second hop
# ---------------------------------------------------------------------------

class TestSecondHop:
    def test_feedback_only_when_passing(self):
        H = ChannelMatrix([[5.0, 0.1, 0.1], [0.1, 0.1, 5.0]])
        report = relay.schedule_second_hop(H, PARAMS)
        assert report.selections == (0, -1, 1)
        assert report.served == ((0, 0), (1, 2))
        assert report.throughput_bits == pytest.approx(2 * LN2)

    def test_served_links_pass_with_only_scheduled_relays(self):
        rng = make_rng(32)
        served_total = 0
        for _ in range(20):
            H = draw_channel(6, 30, FadingModel.rayleigh(1.0), rng)
            report = relay.schedule_second_hop(H, PARAMS)
            scheduled = {r for r, _ in report.served}
            for r, d in report.served:
                interference = sum(H.gain(k, d) for k in scheduled if k != r)
                assert H.gain(r, d) / (PARAMS.noise + interference) >= PARAMS.beta0
            served_total += len(report.served)
        assert served_total > 0

    def test_relay_serves_lowest_destination(self):
        H = ChannelMatrix([[5.0, 5.0], [0.1, 0.1]])
        report = relay.schedule_second_hop(H, PARAMS)
        assert report.served == ((0, 0),)
        assert report.successes == 1
        assert not report.distinct_event


class TestTwoHop:
    def test_combination(self):
        cfg = relay.sqrt_relay_config(64)
        outcome = relay.simulate_two_hop(cfg, make_rng(5))
        assert outcome.throughput_bits == pytest.approx(
            0.5 * min(outcome.first.throughput_bits, outcome.second.throughput_bits)
        )
        assert outcome.conditional_bits <= outcome.throughput_bits
        assert len(outcome.first.selections) == cfg.m
        assert len(outcome.second.selections) == cfg.n

    def test_deterministic(self):
        cfg = relay.sqrt_relay_config(64)
        assert relay.two_hop_throughput(cfg, make_rng(6)) == relay.two_hop_throughput(cfg, make_rng(6))


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

class TestEstimators:
    def test_distinct_probability(self):
        estimate = relay.estimate_distinct_prob(100, 10, 20_000, make_rng(7))
        assert estimate.exact == pytest.approx(prob_all_distinct(100, 10))
        assert abs(estimate.z_score) < 4

    def test_first_hop_distinct_rate_matches_product(self):
        rng = make_rng(33)
        trials = 4_000
        hits = 0
        for _ in range(trials):
            picks = relay.schedule_first_hop(draw_channel(100, 10, FadingModel.rayleigh(1.0), rng))
            hits += len(set(picks)) == 10
        p = hits / trials
        std_err = math.sqrt(p * (1.0 - p) / trials)
        assert abs(p - prob_all_distinct(100, 10)) < 4 * std_err

    def test_distinct_probability_through_channel(self):
        estimate = relay.estimate_distinct_prob(100, 10, 5_000, make_rng(34), model=FadingModel.extremal(1.0, 1.0, 100))
        assert abs(estimate.z_score) < 4

    def test_distinct_channel_chunks(self, monkeypatch):
        whole = relay.estimate_distinct_prob(20, 4, 60, make_rng(35), model=FadingModel.rayleigh(1.0))
        monkeypatch.setattr(relay, "_CHUNK_ENTRIES", 200)
        chunked = relay.estimate_distinct_prob(20, 4, 60, make_rng(35), model=FadingModel.rayleigh(1.0))
        assert chunked.estimate == whole.estimate

    def test_distinct_single_relay(self):
        estimate = relay.estimate_distinct_prob(5, 1, 100, make_rng(8))
        assert estimate.estimate == 1.0
        assert estimate.z_score == 0.0

    def test_distinct_domain(self):
        with pytest.raises(DomainError):
            relay.estimate_distinct_prob(3, 4, 10, make_rng(0))

    def test_scheduled_fraction(self):
        cfg = relay.pareto_linear_config(200, 4.0)
        fraction = relay.scheduled_fraction(cfg, 5, make_rng(9))
        assert fraction == pytest.approx(1.0 - (1.0 - 1.0 / 200) ** 200, abs=0.05)

    def test_scheduled_fraction_needs_square(self):
        with pytest.raises(DomainError):
            relay.scheduled_fraction(relay.sqrt_relay_config(64), 1, make_rng(0))

    def test_per_relay_success_without_interference(self):
        cfg = RelayConfig(n=4, m=1, params=PARAMS, model=FadingModel.rayleigh(1.0))
        p, std_err = relay.per_relay_success(cfg, 2_000, make_rng(10))
        assert p > 0.99
        assert std_err < 0.01

    def test_feige_event_rate(self):
        p, std_err = relay.feige_event_rate(FadingModel.rayleigh(1.0), 8, 20_000, make_rng(11))
        assert p - 3 * std_err >= 1.0 / 13.0

    def test_feige_event_rate_domain(self):
        with pytest.raises(DomainError):
            relay.feige_event_rate(FadingModel.rayleigh(1.0), 1, 10, make_rng(0))
        with pytest.raises(DomainError, match="infinite mean"):
            relay.feige_event_rate(FadingModel.pareto_pathloss(4.0), 8, 10, make_rng(0))

    def test_ratio_moment(self):
        result = relay.ratio_moment(FadingModel.pareto_pathloss(4.0), 100, 2_000, make_rng(12))
        assert result.limit == pytest.approx(2.0)
        assert 1.0 <= result.mean_ratio < 5.0
        assert 0.0 < result.good_fraction < 1.0

    def test_ratio_mean_near_limit(self):
        result = relay.ratio_moment(FadingModel.pareto_pathloss(4.0), 1_000, 4_000, make_rng(36))
        assert abs(result.mean_ratio - result.limit) <= 0.1 + 4 * result.mean_ratio_std_err

    def test_max_dominates_rate_stable_across_n(self):
        model = FadingModel.pareto_pathloss(4.0)
        rng = make_rng(37)
        rates = [relay.ratio_moment(model, n, 1_000, rng).good_fraction for n in (100, 1_000, 10_000)]
        assert min(rates) > 0
        assert (max(rates) - min(rates)) / (sum(rates) / len(rates)) < 0.30

    def test_ratio_moment_requires_pareto(self):
        with pytest.raises(DomainError):
            relay.ratio_moment(FadingModel.rayleigh(1.0), 10, 10, make_rng(0))

    def test_chunking_matches_single_block(self, monkeypatch):
        model = FadingModel.pareto_pathloss(4.0)
        whole = relay.ratio_moment(model, 10, 50, make_rng(13))
        monkeypatch.setattr(relay, "_CHUNK_ENTRIES", 30)
        chunked = relay.ratio_moment(model, 10, 50, make_rng(13))
        assert chunked.mean_ratio == pytest.approx(whole.mean_ratio, rel=1e-12)
        np.testing.assert_allclose(chunked.good_fraction, whole.good_fraction)
