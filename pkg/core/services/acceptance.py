"""
services/acceptance.py
The acceptance suite behind ``verify``: each check reproduces one scaling or
probability claim numerically and records what it measured.

Trial budgets come from a :class:`~core.run_profiles.RunProfile`. Every check
draws from its own stream, ``mix_seed(base_seed, check_number)``, so checks
can be re-run one at a time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from rich.console import Console
from rich.table import Table

from ..common.observability import get_logger, log_event
from ..common.results import records_to_csv, summary_to_json
from ..common.seeding import make_rng, mix_seed
from ..common.tracing import traced
from ..models.channel import LinkParams
from ..models.experiment import ExperimentConfig
from ..models.fading import FadingModel
from ..run_profiles import RunProfile
from . import bounds, experiments, fading, genie, relay
from .channel import compensated_sum, draw_channel

logger = get_logger("acceptance")

DEFAULT_VERIFY_SEED = 20_240_601
FEIGE_M_GRID = (8, 64, 512)
GENIE_ORACLE_MAX_N = 6
FIRST_MOMENT_SIZES = (2, 3, 4)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""
    gating: bool = True
    evaluated: bool = True
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "gating": self.gating,
            "evaluated": self.evaluated,
            "detail": self.detail,
            "measured": self.measured,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class AcceptanceReport:
    profile: str
    base_seed: int
    workers: int
    reduced: bool = False
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if c.gating and not c.passed]

    @property
    def not_evaluated(self) -> list[CheckResult]:
        """Checks that ran below the sizes their criterion needs."""
        return [c for c in self.checks if not c.evaluated]

    def to_json(self) -> str:
        return summary_to_json(
            {
                "profile": self.profile,
                "base_seed": self.base_seed,
                "workers": self.workers,
                "reduced": self.reduced,
                "passed": self.passed,
                "not_evaluated": [c.number for c in self.not_evaluated],
                "checks": [c.to_dict() for c in self.checks],
            }
        )


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _within(value: float, target: float, std_err: float, sigmas: float = 3.0) -> bool:
    return abs(value - target) <= sigmas * std_err + 1e-15


def _relative_spread(values: list[float]) -> float:
    """(max - min) / mean; infinite when any value is zero."""
    if min(values) <= 0:
        return math.inf
    return (max(values) - min(values)) / (sum(values) / len(values))


def _maxima(model: FadingModel, count: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Maxima of *count* direct draws, *trials* times, in bounded blocks."""
    out = np.empty(trials)
    rows = max(1, 2_000_000 // count)
    done = 0
    while done < trials:
        block = min(rows, trials - done)
        out[done:done + block] = fading.sample_many(model, rng, (block, count)).max(axis=1)
        done += block
    return out


def _single_link_success(
    model: FadingModel, m: int, params: LinkParams, samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    hits = 0
    rows = max(1, 2_000_000 // m)
    done = 0
    while done < samples:
        block = min(rows, samples - done)
        draws = fading.sample_many(model, rng, (block, m))
        interference = compensated_sum(draws[:, 1:], axis=1) if m > 1 else np.zeros(block)
        hits += int((draws[:, 0] / (params.noise + interference) >= params.beta0).sum())
        done += block
    return experiments.estimate_probability(hits, samples)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_extreme_statistics(profile: RunProfile, rng: np.random.Generator, **_) -> CheckResult:
    n = 100
    model = FadingModel.extremal(1.0, 1.0, n)
    maxima = _maxima(model, n, profile.extreme_trials, rng)
    trials = len(maxima)
    mean_target = fading.extreme_mean(model)
    p_mean, se_mean = experiments.estimate_probability(int((maxima > mean_target).sum()), trials)
    centered = (n - 1) / math.sqrt(2 * n - 1)
    p_centered, se_centered = experiments.estimate_probability(int((maxima > centered).sum()), trials)
    exact_centered = fading.extreme_exceedance(model, centered)
    empirical_mean = float(maxima.mean())
    relative = abs(empirical_mean - mean_target) / mean_target

    passed = 0.49 <= p_mean <= 0.51 and relative <= 0.01 and _within(p_centered, exact_centered, se_centered)
    return CheckResult(
        number=1,
        name="extremal maximum statistics",
        passed=passed,
        measured={
            "trials": trials,
            "exceed_extreme_mean": p_mean,
            "exceed_extreme_mean_std_err": se_mean,
            "empirical_extreme_mean": empirical_mean,
            "extreme_mean": mean_target,
            "relative_error": relative,
            "exceed_centered_threshold": p_centered,
            "exceed_centered_threshold_exact": exact_centered,
        },
        detail=f"Pr[M>E[M]]={p_mean:.4f} E[M]={empirical_mean:.4f} (target {mean_target:.4f})",
    )


def check_sqrt_scaling(profile: RunProfile, rng: np.random.Generator, base_seed: int, workers: int) -> CheckResult:
    config = ExperimentConfig(
        scheme="opportunistic_two_hop",
        model={"family": "extremal", "params": {"mu": 1.0, "sigma": 1.0, "n": profile.relay_grid[0]}},
        n_grid=list(profile.relay_grid),
        m_rule="paper_sqrt",
        link={"rho": 10.0, "beta0": 1.0},
        trials=profile.relay_trials,
        base_seed=mix_seed(base_seed, 2),
    )
    result = experiments.run(config, workers=workers)
    fit = result.fit
    per_relay = {
        n: relay.per_relay_success(experiments.relay_config_for(config, n), profile.per_relay_trials, rng)
        for n in profile.relay_grid
    }
    floor = 1.0 / 26.0
    slope_ok = fit is not None and 0.40 <= fit.slope <= 0.60
    floor_ok = all(p >= floor for p, _ in per_relay.values())
    lowest = min(p for p, _ in per_relay.values())
    return CheckResult(
        number=2,
        name="square-root relaying scaling",
        passed=slope_ok and floor_ok,
        evaluated=not profile.reduced,
        measured={
            "slope": fit.slope if fit else None,
            "ci": [fit.ci_low, fit.ci_high] if fit else None,
            "per_relay_success": {str(n): p for n, (p, _) in per_relay.items()},
            "per_relay_success_std_err": {str(n): se for n, (_, se) in per_relay.items()},
            "floor": floor,
            "means": {str(s.n): s.mean for s in result.summaries},
        },
        detail=f"slope={fit.slope:.3f} min per-relay success={lowest:.4f}" if fit else "no fit",
    )


def check_feige(profile: RunProfile, rng: np.random.Generator, **_) -> CheckResult:
    rows = {}
    passed = True
    for m in FEIGE_M_GRID:
        for label, model in (("rayleigh", FadingModel.rayleigh(1.0)), ("extremal", FadingModel.extremal(1.0, 1.0, m))):
            p, se = relay.feige_event_rate(model, m, profile.feige_trials, rng)
            ok = p + 3 * se >= bounds.feige_lower(1.0)
            passed &= ok
            rows[f"{label}_m{m}"] = p
    return CheckResult(
        number=3,
        name="Feige lower bound dominance",
        passed=passed,
        measured={"rates": rows, "bound": bounds.feige_lower(1.0)},
        detail=f"min rate={min(rows.values()):.4f} >= 1/13",
    )


def check_linear_scaling(profile: RunProfile, rng: np.random.Generator, base_seed: int, workers: int) -> CheckResult:
    alpha = 4.0
    config = ExperimentConfig(
        scheme="pareto_linear",
        model={"family": "pareto_pathloss", "params": {"alpha": alpha}},
        n_grid=list(profile.pareto_grid),
        m_rule="equal_n",
        link={"rho": 10.0, "beta0": 0.5},
        trials=profile.pareto_trials,
        base_seed=mix_seed(base_seed, 4),
    )
    result = experiments.run(config, workers=workers)
    fit = result.fit
    per_link = {
        n: relay.per_relay_success(experiments.relay_config_for(config, n), profile.per_relay_trials, rng)[0]
        for n in profile.pareto_grid
    }
    spread = _relative_spread(list(per_link.values()))
    cfg = relay.pareto_linear_config(profile.scheduled_fraction_n, alpha)
    fraction = relay.scheduled_fraction(cfg, profile.scheduled_fraction_trials, rng)
    ratios = [relay.ratio_moment(cfg.model, n, profile.ratio_trials, rng) for n in profile.ratio_grid]
    good = [r.good_fraction for r in ratios]
    good_spread = _relative_spread(good)
    largest = ratios[-1]

    slope_ok = fit is not None and 0.90 <= fit.slope <= 1.10
    fraction_ok = 0.62 <= fraction <= 0.65
    stable_ok = spread < 0.30
    ratio_ok = (
        min(good) > 0
        and good_spread < 0.30
        and abs(largest.mean_ratio - largest.limit) <= 0.1 * largest.limit + 4 * largest.mean_ratio_std_err
    )
    return CheckResult(
        number=4,
        name="linear scaling under Pareto gains",
        passed=slope_ok and fraction_ok and stable_ok and ratio_ok,
        evaluated=not profile.reduced,
        measured={
            "slope": fit.slope if fit else None,
            "ci": [fit.ci_low, fit.ci_high] if fit else None,
            "scheduled_fraction": fraction,
            "scheduled_fraction_n": profile.scheduled_fraction_n,
            "scheduled_fraction_exact": bounds.linear_scheduled_mean(profile.scheduled_fraction_n)
            / profile.scheduled_fraction_n,
            "scheduled_fraction_limit": bounds.linear_scheduled_limit(profile.scheduled_fraction_n)
            / profile.scheduled_fraction_n,
            "per_link_success": {str(n): p for n, p in per_link.items()},
            "relative_spread": spread,
            "max_dominates_fraction": {str(r.n): r.good_fraction for r in ratios},
            "max_dominates_spread": good_spread,
            "mean_sum_to_max": {str(r.n): r.mean_ratio for r in ratios},
            "mean_sum_to_max_limit": largest.limit,
        },
        detail=(
            f"slope={fit.slope:.3f} scheduled={fraction:.4f} spread={spread:.3f} "
            f"E[I/M]={largest.mean_ratio:.3f} (limit {largest.limit:.3f})"
        ) if fit else "no fit",
    )


def check_first_moment(profile: RunProfile, rng: np.random.Generator, **_) -> CheckResult:
    n = 10
    model = FadingModel.rayleigh(1.0)
    params = LinkParams(rho=10.0, beta0=1.0)
    counts = {m: [] for m in FIRST_MOMENT_SIZES}
    for _ in range(profile.first_moment_draws):
        H = draw_channel(n, n, model, rng)
        for m in FIRST_MOMENT_SIZES:
            counts[m].append(genie.count_valid_sets(H, m, params, "single"))

    measured = {}
    passed = True
    for m in FIRST_MOMENT_SIZES:
        values = np.asarray(counts[m], dtype=np.float64)
        mean_x = float(values.mean())
        se_x = float(values.std(ddof=1) / math.sqrt(len(values)))
        p_hat, se_p = _single_link_success(model, m, params, profile.first_moment_p_samples, rng)
        predicted = genie.expected_valid_sets(n, m, p_hat)
        se_pred = math.comb(n, m) * m * p_hat ** (m - 1) * se_p
        combined = math.hypot(se_x, se_pred)
        ok = _within(mean_x, predicted, combined)
        passed &= ok
        measured[f"m{m}"] = {"mean_x": mean_x, "predicted": predicted, "p_hat": p_hat, "combined_std_err": combined}
    return CheckResult(
        number=5,
        name="first-moment identity for valid sets",
        passed=passed,
        measured=measured,
        detail=", ".join(f"{key}: {v['mean_x']:.3f} vs {v['predicted']:.3f}" for key, v in measured.items()),
    )


def check_bound_dominance(profile: RunProfile, rng: np.random.Generator, **_) -> CheckResult:
    params = LinkParams(rho=10.0, beta0=1.0)
    measured = {}
    passed = True
    grid = profile.dominance_m_grid
    scaled = []
    for m in grid:
        bound = bounds.sinr_success_upper(m, 1.0, 1.0, params.beta0, params.rho)
        scaled.append(bound * m * m)
        for label, model in (("rayleigh", FadingModel.rayleigh(1.0)), ("extremal", FadingModel.extremal(1.0, 1.0, m))):
            p, se = _single_link_success(model, m, params, profile.dominance_trials, rng)
            ok = bound + 3 * se >= p
            passed &= ok
            measured[f"{label}_m{m}"] = {"empirical": p, "bound": bound}
    upper = scaled[len(scaled) // 2:]
    decay_ok = all(b <= a for a, b in zip(upper, upper[1:]))
    measured["bound_times_m_squared"] = {str(m): v for m, v in zip(grid, scaled)}
    return CheckResult(
        number=6,
        name="SINR success upper bound dominance",
        passed=passed and decay_ok,
        measured=measured,
        detail=f"max bound*m^2={max(scaled):.1f} tail nonincreasing={decay_ok}",
    )


def check_genie_oracle(profile: RunProfile, rng: np.random.Generator, **_) -> CheckResult:
    params = LinkParams(rho=10.0, beta0=1.0)
    model = FadingModel.rayleigh(1.0)
    mismatches = 0
    dominance_failures = 0
    for k in range(profile.oracle_instances):
        n = 2 + k % (GENIE_ORACLE_MAX_N - 1)
        H = draw_channel(n, n, model, rng)
        fast = genie.max_valid_two_hop(H, params)
        slow = genie.max_valid_two_hop_bruteforce(H, params)
        single = genie.max_valid_single_hop(H, params)
        mismatches += fast.m_star != slow.m_star
        dominance_failures += fast.m_star < single.m_star
    return CheckResult(
        number=7,
        name="two-hop genie matching equals brute force",
        passed=mismatches == 0 and dominance_failures == 0,
        measured={
            "instances": profile.oracle_instances,
            "mismatches": mismatches,
            "two_hop_below_single": dominance_failures,
        },
        detail=f"{mismatches} mismatches, {dominance_failures} dominance failures",
    )


def check_distinct_limit(profile: RunProfile, rng: np.random.Generator, **_) -> CheckResult:
    n, m = 10_000, 100
    lower = bounds.all_distinct_lower(n, m)
    exact = bounds.prob_all_distinct(n, m)
    limit = bounds.all_distinct_limit(m / math.sqrt(n))
    limit_ok = abs(lower - limit) <= 0.02 * limit and exact >= lower
    estimate = relay.estimate_distinct_prob(100, 10, profile.distinct_trials, rng)
    protocol = relay.estimate_distinct_prob(100, 10, profile.distinct_trials, rng, model=FadingModel.rayleigh(1.0))
    mc_ok = all(_within(e.estimate, e.exact or 0.0, e.std_err) for e in (estimate, protocol))
    return CheckResult(
        number=8,
        name="all-distinct relay selection probability",
        passed=limit_ok and mc_ok,
        measured={
            "lower_bound": lower,
            "exact": exact,
            "limit": limit,
            "mc_estimate": estimate.estimate,
            "mc_exact": estimate.exact,
            "mc_std_err": estimate.std_err,
            "first_hop_estimate": protocol.estimate,
            "first_hop_std_err": protocol.std_err,
        },
        detail=(
            f"bound={lower:.4f} vs e^-1={limit:.4f}; MC {estimate.estimate:.4f}, "
            f"first hop {protocol.estimate:.4f} vs {estimate.exact:.4f}"
        ),
    )


def check_determinism(profile: RunProfile, rng: np.random.Generator, base_seed: int, workers: int) -> CheckResult:
    config = ExperimentConfig(
        scheme="opportunistic_two_hop",
        model={"family": "extremal", "params": {"mu": 1.0, "sigma": 1.0, "n": 16}},
        n_grid=[16, 32, 64],
        m_rule="paper_sqrt",
        trials=8,
        base_seed=mix_seed(base_seed, 9),
    )
    first = records_to_csv(experiments.run(config, workers=1).records)
    second = records_to_csv(experiments.run(config, workers=1).records)
    parallel = records_to_csv(experiments.run(config, workers=max(2, min(4, workers * 4))).records)
    return CheckResult(
        number=9,
        name="byte-identical results across runs and workers",
        passed=first == second == parallel,
        measured={"bytes": len(first.encode()), "repeat_equal": first == second, "parallel_equal": first == parallel},
        detail="identical" if first == second == parallel else "results differ",
    )


def check_rayleigh_sanity(profile: RunProfile, rng: np.random.Generator, base_seed: int, workers: int) -> CheckResult:
    config = ExperimentConfig(
        scheme="opportunistic_two_hop",
        model={"family": "rayleigh", "params": {"mu": 1.0}},
        n_grid=list(profile.relay_grid[:4]),
        m_rule="paper_sqrt",
        trials=max(10, profile.relay_trials // 2),
        base_seed=mix_seed(base_seed, 10),
    )
    result = experiments.run(config, workers=workers)
    slope = result.fit.slope if result.fit else None
    return CheckResult(
        number=10,
        name="Rayleigh square-root relaying (informational)",
        passed=slope is not None and slope < 0.5,
        gating=False,
        measured={"slope": slope, "notes": result.notes},
        detail=f"slope={slope:.3f}" if slope is not None else "; ".join(result.notes),
    )


CHECKS: tuple[Callable[..., CheckResult], ...] = (
    check_extreme_statistics,
    check_sqrt_scaling,
    check_feige,
    check_linear_scaling,
    check_first_moment,
    check_bound_dominance,
    check_genie_oracle,
    check_distinct_limit,
    check_determinism,
    check_rayleigh_sanity,
)


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------

def run_acceptance(
    profile: RunProfile,
    base_seed: int = DEFAULT_VERIFY_SEED,
    workers: int = 1,
    only: Optional[set[int]] = None,
) -> AcceptanceReport:
    report = AcceptanceReport(profile=profile.name, base_seed=base_seed, workers=workers, reduced=profile.reduced)
    for number, check in enumerate(CHECKS, start=1):
        if only is not None and number not in only:
            continue
        started = time.perf_counter()
        with traced("acceptance.check", number=number, profile=profile.name) as span:
            result = check(profile, make_rng(mix_seed(base_seed, number)), base_seed=base_seed, workers=workers)
            span.set_attribute("passed", result.passed)
        result.seconds = time.perf_counter() - started
        report.checks.append(result)
        log_event(
            logger, "acceptance.check_done",
            number=number, name=result.name, passed=result.passed, gating=result.gating,
            seconds=result.seconds,
        )
    return report


def render_table(report: AcceptanceReport, console: Optional[Console] = None) -> None:
    console = console or Console()
    table = Table(title=f"Acceptance suite (profile={report.profile}, seed={report.base_seed})")
    table.add_column("#", justify="right")
    table.add_column("Check")
    table.add_column("Result")
    table.add_column("Measured")
    table.add_column("s", justify="right")
    for check in report.checks:
        if not check.evaluated:
            status = f"[yellow]{'pass' if check.passed else 'fail'} (not evaluated)[/yellow]"
        elif check.passed:
            status = "[green]PASS[/green]"
        elif check.gating:
            status = "[red]FAIL[/red]"
        else:
            status = "[yellow]INFO[/yellow]"
        table.add_row(str(check.number), check.name, status, check.detail, f"{check.seconds:.1f}")
    console.print(table)
    verdict = "[bold green]all checks passed[/bold green]" if report.passed else (
        f"[bold red]{len(report.failures)} check(s) failed[/bold red]"
    )
    console.print(verdict)
    if report.not_evaluated:
        numbers = ", ".join(str(c.number) for c in report.not_evaluated)
        console.print(
            f"[yellow]profile {report.profile} is reduced: criteria {numbers} not evaluated at acceptance size; "
            "run with --profile full[/yellow]"
        )
