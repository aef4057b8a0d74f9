"""
services/experiments.py
Monte Carlo harness: sweeps the n grid, runs independent trials, aggregates
them and fits the log-log scaling exponent.

Every trial is a pure function of ``(config, n, trial_index)``; its random
stream comes from ``trial_seed(base_seed, n, trial_index)``. Trials may run in
any order on any number of worker processes; records are merged by
``(n, trial_index)`` before anything is summarised or written.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from ..common.errors import ConfigError, DomainError
from ..common.observability import get_logger, log_event
from ..common.results import ResultSink
from ..common.seeding import make_rng, mix_seed, trial_rng, trial_seed
from ..common.tracing import traced
from ..models.experiment import ExperimentConfig, NSummary, ScalingFit, Scheme, TrialResult
from ..models.fading import FadingFamily, FadingModel
from ..models.protocol import GenieMode, RelayConfig, relays_for
from . import bounds, genie
from .channel import compensated_sum, draw_channel, evaluate_schedule
from .fading import diversity_gain, extreme_mean, feller_constant, moments, sample_many
from .relay import pareto_linear_config, simulate_two_hop

logger = get_logger("experiments")

BOOTSTRAP_RESAMPLES = 200
_BOOTSTRAP_SEED = 0x5CA1AB1E
# stream word for the run-level diagnostics draws, apart from every trial stream
_DIAGNOSTICS_STREAM = 0xD1A6

HOP_COLUMNS = ["n", "trial", "hop", "m", "distinct_event", "successes", "throughput_bits"]


def default_workers() -> int:
    """``SCALING_LAB_WORKERS`` or 1."""
    try:
        return max(1, int(os.getenv("SCALING_LAB_WORKERS", "1")))
    except ValueError:
        logger.warning("experiments.invalid_workers value=%r using=1", os.getenv("SCALING_LAB_WORKERS"))
        return 1


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def estimate_probability(successes: int, trials: int) -> tuple[float, float]:
    """``(p_hat, std_err)`` of a Bernoulli proportion."""
    if trials < 1:
        raise DomainError(f"estimate_probability: trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"estimate_probability: need 0 <= successes <= trials, got {successes}/{trials}")
    p = successes / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


def fit_scaling(
    points: Sequence[tuple[float, float]],
    resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = _BOOTSTRAP_SEED,
) -> ScalingFit:
    """
    Least squares of ln(y) on ln(n), with a percentile bootstrap over points
    for the 95% interval on the slope.
    """
    if len(points) < 3:
        raise DomainError(f"fit_scaling: need at least 3 points, got {len(points)}")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise DomainError("fit_scaling: every n and every value must be positive (log undefined)")
    lx, ly = np.log(xs), np.log(ys)
    if np.ptp(lx) == 0:
        raise DomainError("fit_scaling: need at least two distinct n values")

    fit = stats.linregress(lx, ly)
    slope = float(fit.slope)
    r_squared = float(fit.rvalue ** 2) if np.ptp(ly) > 0 else 1.0

    rng = make_rng(seed)
    boot = []
    for _ in range(resamples):
        idx = rng.integers(0, len(points), size=len(points))
        if np.ptp(lx[idx]) == 0:
            continue
        boot.append(stats.linregress(lx[idx], ly[idx]).slope)
    if boot:
        low, high = np.percentile(boot, [2.5, 97.5])
    else:
        low = high = slope
    return ScalingFit(
        slope=slope,
        intercept=float(fit.intercept),
        ci_low=min(float(low), slope),
        ci_high=max(float(high), slope),
        r_squared=min(1.0, r_squared),
        points=len(points),
        resamples=resamples,
    )


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

def model_for(config: ExperimentConfig, n: int) -> FadingModel:
    """The fading law used at grid point *n*."""
    model = config.fading_model()
    if model.family is FadingFamily.EXTREMAL and config.couple_population:
        return FadingModel.extremal(model["mu"], model["sigma"], n)
    return model


def relay_config_for(config: ExperimentConfig, n: int) -> RelayConfig:
    if config.scheme is Scheme.PARETO_LINEAR:
        return pareto_linear_config(n, config.fading_model()["alpha"], rho=config.link.rho)
    return RelayConfig(
        n=n,
        m=relays_for(config.m_rule, n),
        params=config.link_params(),
        model=model_for(config, n),
        m_rule=config.m_rule,
    )


def _genie_trial(config: ExperimentConfig, n: int, rng: np.random.Generator) -> dict:
    params = config.link_params()
    H = draw_channel(n, n, model_for(config, n), rng)
    mode = GenieMode.SINGLE if config.scheme is Scheme.GENIE_SINGLE else GenieMode.TWO_HOP
    result = genie.max_valid(H, params, mode, force_exponential=config.force_exponential)
    witness = evaluate_schedule(H, result.witness, result.assignment, params)
    # one hop is searched; for two-hop the same bound stands for both hops
    bits = result.m_star * params.r0
    if mode is GenieMode.TWO_HOP:
        bits *= 0.5
    return {
        "m": result.m_star,
        "throughput_bits": bits,
        "per_link_success_rate": result.m_star / n,
        "extra": {
            "m_star": float(result.m_star),
            "subsets_checked": float(result.subsets_checked),
            "witness_verified": float(len(witness.successes) == result.m_star),
        },
    }


def _relay_trial(config: ExperimentConfig, n: int, rng: np.random.Generator) -> dict:
    cfg = relay_config_for(config, n)
    outcome = simulate_two_hop(cfg, rng)
    first, second = outcome.first, outcome.second
    return {
        "m": cfg.m,
        "throughput_bits": outcome.throughput_bits,
        "distinct_event": first.distinct_event,
        "per_link_success_rate": first.successes / cfg.m,
        "scheduled_fraction": first.scheduled_count / n,
        "extra": {
            "first_hop_bits": first.throughput_bits,
            "second_hop_bits": second.throughput_bits,
            "conditional_bits": outcome.conditional_bits,
            "second_hop_scheduled": float(second.scheduled_count),
            "first_hop_successes": float(first.successes),
            "second_hop_successes": float(second.successes),
            "second_hop_distinct": float(second.distinct_event),
        },
    }


def _diagnostics_trial(config: ExperimentConfig, n: int, rng: np.random.Generator) -> dict:
    model = model_for(config, n)
    draws = sample_many(model, rng, n)
    top = float(draws.max())
    total = float(math.fsum(draws))
    extra = {"max": top, "sum": total}
    if model.family is FadingFamily.EXTREMAL:
        extra["exceeds_extreme_mean"] = float(top > extreme_mean(model))
        extra["exceeds_centered_threshold"] = float(top > (n - 1) / math.sqrt(2 * n - 1))
    if model.family.is_pareto:
        nu = model.nu or 0.0
        extra["ratio_sum_to_max"] = total / top
        extra["max_dominates"] = float(top / total >= 1.0 - nu)
    return {"m": n, "throughput_bits": 0.0, "extra": extra}


def _overlay_trial(config: ExperimentConfig, m: int, rng: np.random.Generator) -> dict:
    model = model_for(config, m)
    params = config.link_params()
    draws = sample_many(model, rng, (config.samples, m))
    signal = draws[:, 0]
    interference = compensated_sum(draws[:, 1:], axis=1)
    hits = int((signal / (params.noise + interference) >= params.beta0).sum())
    report = moments(model)
    try:
        bound = bounds.sinr_success_upper(m, report.mean, report.variance, params.beta0, params.rho)
    except DomainError:
        bound = math.nan
    return {
        "m": m,
        "throughput_bits": 0.0,
        "per_link_success_rate": hits / config.samples,
        "extra": {"successes": float(hits), "sinr_success_upper": bound},
    }


_TRIALS = {
    Scheme.GENIE_SINGLE: _genie_trial,
    Scheme.GENIE_TWO_HOP: _genie_trial,
    Scheme.OPPORTUNISTIC_TWO_HOP: _relay_trial,
    Scheme.PARETO_LINEAR: _relay_trial,
    Scheme.DISTRIBUTION_DIAGNOSTICS: _diagnostics_trial,
    Scheme.BOUND_OVERLAY: _overlay_trial,
}


def run_trial(config: ExperimentConfig, n: int, trial_index: int) -> TrialResult:
    """Run one trial; depends only on its arguments."""
    fields = _TRIALS[config.scheme](config, n, trial_rng(config.base_seed, n, trial_index))
    return TrialResult(n=n, trial_index=trial_index, seed=trial_seed(config.base_seed, n, trial_index), **fields)


def _run_trial_task(task: tuple[ExperimentConfig, int, int]) -> TrialResult:
    return run_trial(*task)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def primary_value(record: TrialResult, scheme: Scheme) -> float:
    """The per-trial statistic that summaries average and fits regress."""
    if scheme is Scheme.DISTRIBUTION_DIAGNOSTICS:
        return record.extra["max"]
    if scheme is Scheme.BOUND_OVERLAY:
        return float(record.per_link_success_rate or 0.0)
    return record.throughput_bits


def _mean_or_none(values: list[float]) -> Optional[float]:
    return float(math.fsum(values) / len(values)) if values else None


def summarize(records: Sequence[TrialResult], scheme: Scheme) -> NSummary:
    """Aggregate the trials of one grid point."""
    if not records:
        raise DomainError("summarize: no records")
    values = np.array([primary_value(r, scheme) for r in records], dtype=np.float64)
    count = len(values)
    std_err = float(values.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0

    distinct = [r.distinct_event for r in records if r.distinct_event is not None]
    distinct_p = distinct_se = None
    if distinct:
        distinct_p, distinct_se = estimate_probability(sum(distinct), len(distinct))

    extra_keys = sorted({key for r in records for key in r.extra})
    extra_means = {}
    for key in extra_keys:
        finite = [r.extra[key] for r in records if key in r.extra and math.isfinite(r.extra[key])]
        if finite:
            extra_means[key] = math.fsum(finite) / len(finite)

    return NSummary(
        n=records[0].n,
        m=int(round(np.mean([r.m for r in records]))),
        trials=count,
        mean=float(math.fsum(values) / count),
        median=float(np.median(values)),
        std_err=std_err,
        distinct_frequency=distinct_p,
        distinct_std_err=distinct_se,
        per_link_success_mean=_mean_or_none([r.per_link_success_rate for r in records if r.per_link_success_rate is not None]),
        scheduled_fraction_mean=_mean_or_none([r.scheduled_fraction for r in records if r.scheduled_fraction is not None]),
        conditional_mean=extra_means.get("conditional_bits"),
        extra_means=extra_means,
    )


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list[TrialResult]
    summaries: list[NSummary]
    fit: Optional[ScalingFit] = None
    notes: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def summary_payload(self) -> dict:
        payload = {
            "scheme": self.config.scheme.value,
            "base_seed": self.config.base_seed,
            "summaries": [s.model_dump(mode="json") for s in self.summaries],
            "fit": self.fit.model_dump(mode="json") if self.fit else None,
            "notes": list(self.notes),
        }
        payload.update(self.diagnostics)
        return payload


def diagnostics_payload(config: ExperimentConfig) -> dict:
    """
    Mean maximum of n draws at every grid point, sampled through the maximum's
    own law, plus the tail scale of a Pareto law.
    """
    rng = make_rng(mix_seed(config.base_seed, _DIAGNOSTICS_STREAM))
    rows = []
    for n in config.n_grid:
        model = model_for(config, n)
        ((_, mean, std_err),) = diversity_gain(model, [n], config.trials, rng)
        row = {"n": n, "mean_max": mean, "std_err": std_err}
        if model.family is FadingFamily.EXTREMAL:
            row["extreme_mean"] = extreme_mean(model)
        rows.append(row)
    payload: dict = {"diversity_gain": rows}
    if config.fading_model().family.is_pareto:
        payload["feller_constant"] = feller_constant(config.fading_model())
    return payload


def hop_rows(records: Iterable[TrialResult]) -> list[list]:
    """Per-trial, per-hop rows of a relay run, columns :data:`HOP_COLUMNS`."""
    rows = []
    for r in records:
        extra = r.extra
        if "first_hop_successes" not in extra:
            continue
        rows.append([r.n, r.trial_index, 1, r.m, int(bool(r.distinct_event)),
                     int(extra["first_hop_successes"]), extra["first_hop_bits"]])
        rows.append([r.n, r.trial_index, 2, r.m, int(extra["second_hop_distinct"]),
                     int(extra["second_hop_successes"]), extra["second_hop_bits"]])
    return rows


def _fit_if_possible(summaries: Sequence[NSummary], scheme: Scheme) -> tuple[Optional[ScalingFit], list[str]]:
    if scheme is Scheme.BOUND_OVERLAY:
        return None, []
    points = [(s.n, s.mean) for s in summaries]
    if len(points) < 3:
        return None, ["scaling fit skipped: fewer than 3 grid points"]
    if any(mean <= 0 for _, mean in points):
        return None, ["scaling fit skipped: a grid point has zero mean"]
    return fit_scaling(points), []


# ---------------------------------------------------------------------------
# Run
# ---------------------------------------------------------------------------

def validate_run(config: ExperimentConfig) -> None:
    """Checks that need the runtime environment; raised before any trial starts."""
    if config.scheme.is_genie and not config.force_exponential:
        limit = genie.single_hop_limit() if config.scheme is Scheme.GENIE_SINGLE else genie.two_hop_limit()
        too_big = [n for n in config.n_grid if n > limit]
        if too_big:
            raise ConfigError(
                f"n_grid entries {too_big} exceed the exhaustive genie limit {limit}; "
                "set force_exponential to accept exponential cost",
                fields=("n_grid",),
            )
    # An extremal law coupled to n reaches negative support at small grid points.
    for n in config.n_grid:
        try:
            model = relay_config_for(config, n).model if config.scheme is Scheme.PARETO_LINEAR else model_for(config, n)
            sample_many(model, make_rng(0), 1)
        except DomainError as exc:
            raise ConfigError(f"n={n}: {exc}", fields=("model", "n_grid")) from None


def _iter_results(
    config: ExperimentConfig, n: int, workers: int, executor: Optional[ProcessPoolExecutor]
) -> Iterable[TrialResult]:
    tasks = [(config, n, t) for t in range(config.trials)]
    if executor is None:
        return map(_run_trial_task, tasks)
    chunksize = max(1, len(tasks) // (workers * 4))
    return executor.map(_run_trial_task, tasks, chunksize=chunksize)


def run(
    config: ExperimentConfig,
    workers: Optional[int] = None,
    sink: Optional[ResultSink] = None,
) -> RunResult:
    """Run every trial at every grid point and summarise."""
    validate_run(config)
    workers = default_workers() if workers is None else max(1, workers)
    sink = sink if sink is not None else ResultSink()
    log_event(
        logger, "experiment.start",
        scheme=config.scheme.value, grid=len(config.n_grid), trials=config.trials,
        workers=workers, base_seed=config.base_seed,
    )
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    summaries: list[NSummary] = []
    try:
        with traced("experiment.run", scheme=config.scheme, trials=config.trials, workers=workers):
            for n in config.n_grid:
                with traced("experiment.grid_point", n=n) as span:
                    sink.extend(_iter_results(config, n, workers, executor))
                    summary = summarize(sink.for_n(n), config.scheme)
                    span.set_attribute("m", summary.m)
                    summaries.append(summary)
                log_event(
                    logger, "experiment.n_done",
                    scheme=config.scheme.value, n=n, m=summary.m, trials=summary.trials,
                    mean=summary.mean, std_err=summary.std_err,
                )
    finally:
        if executor is not None:
            executor.shutdown()

    fit, notes = _fit_if_possible(summaries, config.scheme)
    if fit is not None:
        log_event(logger, "experiment.fit", slope=fit.slope, ci_low=fit.ci_low, ci_high=fit.ci_high,
                  r_squared=fit.r_squared)
    for note in notes:
        log_event(logger, "experiment.note", level=logging.INFO, note=note)
    diagnostics = diagnostics_payload(config) if config.scheme is Scheme.DISTRIBUTION_DIAGNOSTICS else {}
    return RunResult(
        config=config, records=sink.sorted_records(), summaries=summaries, fit=fit, notes=notes,
        diagnostics=diagnostics,
    )

