"""
ScalingLab - command line entry point

Monte Carlo experiments and analytic bounds for the throughput scaling of
opportunistic relaying when every link succeeds or fails on its own SINR.

Subcommands:
    sample   draw gains from a fading law and summarise them
    genie    exhaustive search for the largest simultaneously valid link set
    relay    opportunistic two-hop experiment over an n grid
    run      any experiment scheme from a JSON config file
    bounds   emit an analytic bound as a CSV curve
    verify   run the acceptance suite

Examples:
    python -m core.main relay --model extremal --n-grid 256,512,1024 --trials 100 --out runs/relay
    python -m core.main genie --mode two-hop --n 4,6,8 --trials 50 --seed 7
    python -m core.main bounds --bound sinr_success_upper --grid 4,8,16,32
    python -m core.main verify --quick --json report.json

Exit codes: 0 success, 1 verification failure, 2 usage / config / domain error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Optional

from dotenv import load_dotenv
from rich.console import Console
from rich.table import Table

from . import __version__
from .common.errors import ConfigError, ScalingLabError, VerificationFailure
from .common.observability import configure_logging, get_logger, log_event, new_run_id
from .common.results import records_to_csv, records_to_json, rows_to_csv, summary_to_json, utc_now, write_text
from .common.seeding import make_rng, random_base_seed, trial_rng
from .common.tracing import configure_tracing, shutdown_tracing, traced
from .models.experiment import ExperimentConfig, RunManifest, Scheme
from .models.fading import FAMILY_PARAMS, FadingFamily, FadingModel
from .run_profiles import log_active_profile
from .services import acceptance, bounds, experiments, fading
from .services.channel import draw_channel, matrix_to_csv

logger = get_logger("cli")

console = Console()
err_console = Console(stderr=True)

# Command-line flag -> model parameter name
_MODEL_FLAGS = {
    "mu": "mu",
    "sigma": "sigma",
    "pop": "n",
    "sigma_db": "sigma_db",
    "shape": "shape",
    "alpha": "alpha",
    "nu": "nu",
    "c0": "c0",
}
_MODEL_DEFAULTS = {"mu": 1.0, "sigma": 1.0, "n": 100.0, "shape": 1.0, "sigma_db": 8.0, "c0": 1.0}
DEFAULT_RELAY_GRID = [256, 512, 1024, 2048]


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_model_flags(parser: argparse.ArgumentParser, default_family: Optional[str]) -> None:
    group = parser.add_argument_group("fading law")
    group.add_argument(
        "--model",
        action=_ModelGiven,
        choices=[f.value for f in FadingFamily],
        default=default_family,
        required=default_family is None,
        help="gain distribution family",
    )
    group.add_argument("--mu", type=float, help="mean power (rayleigh, nakagami, extremal)")
    group.add_argument("--sigma", type=float, help="standard deviation (extremal)")
    group.add_argument("--pop", type=int, help="population size n of the extremal law")
    group.add_argument("--sigma-db", dest="sigma_db", type=float, help="shadowing spread in dB (lognormal)")
    group.add_argument("--shape", type=float, help="Nakagami shape")
    group.add_argument("--alpha", type=float, help="path-loss exponent (pareto_pathloss)")
    group.add_argument("--nu", type=float, help="tail index (pareto_general)")
    group.add_argument("--c0", type=float, help="tail constant (pareto_general)")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON experiment config; flags override its fields")
    parser.add_argument("--seed", type=int, help="base seed (random and printed when omitted)")
    parser.add_argument("--trials", type=int, help="trials per grid point")
    parser.add_argument("--rho", type=float, help="SNR (noise power is 1/rho)")
    parser.add_argument("--beta0", type=float, help="SINR threshold")
    parser.add_argument("--workers", type=int, help="worker processes (default SCALING_LAB_WORKERS or 1)")
    parser.add_argument(
        "--out", type=Path, help="directory for results.csv, results.json, summary.json and manifest.json"
    )
    parser.add_argument(
        "--force-exponential",
        action="store_true",
        help="allow exhaustive genie search above the configured size limit",
    )
    parser.add_argument(
        "--no-couple-population",
        dest="couple_population",
        action="store_false",
        default=None,
        help="keep the extremal population fixed instead of tying it to each grid n",
    )


def model_params(args: argparse.Namespace) -> dict[str, float]:
    """Parameters of ``args.model`` from flags, filling documented defaults."""
    family = FadingFamily(args.model)
    params: dict[str, float] = {}
    missing = []
    for flag, name in _MODEL_FLAGS.items():
        if name not in FAMILY_PARAMS[family]:
            continue
        value = getattr(args, flag, None)
        if value is None:
            value = _MODEL_DEFAULTS.get(name)
        if value is None:
            missing.append(f"--{flag.replace('_', '-')}")
        else:
            params[name] = float(value)
    if missing:
        raise ConfigError(f"{family.value} requires {', '.join(missing)}", fields=("model",))
    return params


def model_from_args(args: argparse.Namespace) -> FadingModel:
    return FadingModel.from_spec(args.model, **model_params(args))


def _load_config_file(path: Optional[Path]) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found", fields=("config",)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}", fields=("config",)) from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object", fields=("config",))
    return data


def build_config(
    args: argparse.Namespace,
    overrides: dict[str, Any],
    defaults: Optional[dict[str, Any]] = None,
) -> ExperimentConfig:
    """Merge the JSON config file, the command's fixed fields and explicit flags.

    *defaults* fill fields that neither the file nor a flag provides.
    """
    data = _load_config_file(getattr(args, "config", None))
    for key, value in (defaults or {}).items():
        data.setdefault(key, value)
    data.update({key: value for key, value in overrides.items() if value is not None})

    if getattr(args, "model", None) is not None and (args.model_given or "model" not in data):
        data["model"] = {"family": args.model, "params": model_params(args)}
    link = dict(data.get("link", {}))
    for key in ("rho", "beta0"):
        if getattr(args, key, None) is not None:
            link[key] = getattr(args, key)
    if link:
        data["link"] = link
    if getattr(args, "trials", None) is not None:
        data["trials"] = args.trials
    if getattr(args, "force_exponential", False):
        data["force_exponential"] = True
    if getattr(args, "couple_population", None) is not None:
        data["couple_population"] = args.couple_population
    if getattr(args, "seed", None) is not None:
        data["base_seed"] = args.seed
    elif "base_seed" not in data:
        data["base_seed"] = random_base_seed()
        err_console.print(f"seed={data['base_seed']}", markup=False)
    return ExperimentConfig.parse(data)


# ---------------------------------------------------------------------------
# Experiment output
# ---------------------------------------------------------------------------

def _summary_table(result: experiments.RunResult) -> Table:
    table = Table(title=f"{result.config.scheme.value} (seed={result.config.base_seed})")
    for column in ("n", "m", "trials", "mean", "std err", "distinct", "per-link success"):
        table.add_column(column, justify="right")
    for s in result.summaries:
        table.add_row(
            str(s.n),
            str(s.m),
            str(s.trials),
            f"{s.mean:.6g}",
            f"{s.std_err:.3g}",
            "" if s.distinct_frequency is None else f"{s.distinct_frequency:.4f}",
            "" if s.per_link_success_mean is None else f"{s.per_link_success_mean:.4f}",
        )
    return table


def execute(config: ExperimentConfig, workers: Optional[int], out: Optional[Path],
            extra_payload: Optional[Callable[[experiments.RunResult], dict]] = None) -> experiments.RunResult:
    """Run *config* and write results.csv, results.json, summary.json and manifest.json under *out*.

    Relay schemes also get hops.csv, one row per trial and hop.
    """
    workers = experiments.default_workers() if workers is None else workers
    started = utc_now()
    result = experiments.run(config, workers=workers)
    finished = utc_now()

    payload = result.summary_payload()
    if extra_payload is not None:
        payload.update(extra_payload(result))
    err_console.print(_summary_table(result))
    if result.fit is not None:
        err_console.print(
            f"slope={result.fit.slope:.4f} ci=[{result.fit.ci_low:.4f}, {result.fit.ci_high:.4f}] "
            f"r2={result.fit.r_squared:.4f}",
            markup=False,
        )

    if out is None:
        sys.stdout.write(summary_to_json(payload))
        return result

    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        artifact_version=__version__,
        run_id=new_run_id(),
        config=config.echo(),
        base_seed=config.base_seed,
        workers=workers,
        started_at=started,
        finished_at=finished,
        summaries=result.summaries,
        fit=result.fit,
    )
    write_text(str(out / "results.csv"), records_to_csv(result.records))
    write_text(str(out / "results.json"), records_to_json(result.records))
    if config.scheme.is_relay:
        write_text(str(out / "hops.csv"), rows_to_csv(experiments.HOP_COLUMNS, experiments.hop_rows(result.records)))
    write_text(str(out / "summary.json"), summary_to_json(payload))
    write_text(str(out / "manifest.json"), summary_to_json(manifest.model_dump(mode="json")))
    log_event(logger, "cli.written", out=str(out), records=len(result.records), run_id=manifest.run_id)
    return result


def _m_star_distribution(result: experiments.RunResult) -> dict:
    by_n: dict[str, dict[str, int]] = {}
    for record in result.records:
        counts = by_n.setdefault(str(record.n), {})
        key = str(int(record.extra["m_star"]))
        counts[key] = counts.get(key, 0) + 1
    return {"m_star_distribution": {n: dict(sorted(c.items(), key=lambda kv: int(kv[0]))) for n, c in by_n.items()}}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_sample(args: argparse.Namespace) -> int:
    model = model_from_args(args)
    seed = args.seed if args.seed is not None else random_base_seed()
    if args.seed is None:
        err_console.print(f"seed={seed}", markup=False)
    draws = fading.sample_many(model, make_rng(seed), args.n_samples)

    summary: dict[str, Any] = {
        "model": model.to_spec(),
        "seed": seed,
        "samples": int(draws.size),
        "empirical_mean": float(draws.mean()),
        "empirical_variance": float(draws.var(ddof=1)) if draws.size > 1 else 0.0,
        "moments": fading.moments(model).to_dict(),
    }
    if model.family is FadingFamily.EXTREMAL:
        pop = model.population
        blocks = draws[: (draws.size // pop) * pop].reshape(-1, pop)
        if len(blocks):
            maxima = blocks.max(axis=1)
            centered = (pop - 1) / math.sqrt(2 * pop - 1)
            summary["maxima"] = len(maxima)
            summary["exceed_extreme_mean"] = float((maxima > fading.extreme_mean(model)).mean())
            summary["exceed_centered_threshold"] = float((maxima > centered).mean())
            summary["exceed_centered_threshold_exact"] = fading.extreme_exceedance(model, centered)
    if model.family.is_pareto:
        threshold = fading.quantile(model, 0.99)
        exact = 1.0 - fading.cdf(model, threshold)
        summary["tail_threshold"] = threshold
        summary["tail_ratio"] = float((draws > threshold).mean()) / exact
        summary["ratio_sum_to_max"] = float(draws.sum() / draws.max())
        summary["feller_constant"] = fading.feller_constant(model)

    table = Table(title=f"sample {model.describe()}")
    table.add_column("statistic")
    table.add_column("value", justify="right")
    for key, value in summary.items():
        if not isinstance(value, dict):
            table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    err_console.print(table)

    samples_csv = rows_to_csv(["index", "gain"], ((i, float(v)) for i, v in enumerate(draws)))
    if args.out is None:
        sys.stdout.write(samples_csv)
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        write_text(str(args.out / "samples.csv"), samples_csv)
        write_text(str(args.out / "summary.json"), summary_to_json(summary))
    log_event(logger, "cli.sample", model=model.describe(), samples=int(draws.size))
    return 0


def cmd_genie(args: argparse.Namespace) -> int:
    scheme = Scheme.GENIE_SINGLE if args.mode == "single" else Scheme.GENIE_TWO_HOP
    config = build_config(args, {"scheme": scheme.value, "n_grid": args.n})
    execute(config, args.workers, args.out, extra_payload=_m_star_distribution)
    if args.dump_channel is not None:
        dump_channels(config, args.dump_channel)
    return 0


def dump_channels(config: ExperimentConfig, directory: Path) -> None:
    """Write the channel of trial 0 at every grid point, redrawn from that trial's own stream."""
    directory.mkdir(parents=True, exist_ok=True)
    for n in config.n_grid:
        H = draw_channel(n, n, experiments.model_for(config, n), trial_rng(config.base_seed, n, 0))
        write_text(str(directory / f"channel_n{n}_trial0.csv"), matrix_to_csv(H))
    log_event(logger, "cli.channels_dumped", out=str(directory), grid=len(config.n_grid))


def cmd_relay(args: argparse.Namespace) -> int:
    overrides: dict[str, Any] = {"n_grid": args.n_grid, "m_rule": args.m_rule}
    if args.scheme == "pareto-linear":
        overrides.update(scheme=Scheme.PARETO_LINEAR.value, m_rule="equal_n")
    else:
        overrides["scheme"] = Scheme.OPPORTUNISTIC_TWO_HOP.value
    config = build_config(args, overrides, defaults={"n_grid": DEFAULT_RELAY_GRID})
    execute(config, args.workers, args.out)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {"n_grid": args.n_grid}
    config = build_config(args, overrides)
    extra = _m_star_distribution if config.scheme.is_genie else None
    execute(config, args.workers, args.out, extra_payload=extra)
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    name = args.bound
    if name == "sinr_success_upper":
        curves = bounds.sinr_success_curve([int(m) for m in args.grid], args.mu, args.sigma2, args.beta0, args.rho)
        parameter = "m"
    elif name == "genie_existence_upper":
        if args.n is None:
            raise ConfigError("genie_existence_upper requires --n", fields=("n",))
        curves = bounds.genie_existence_curve(
            args.n, [int(m) for m in args.grid], args.mu, args.sigma2, args.beta0, args.rho, args.mode
        )
        parameter = "m"
        knee = bounds.genie_bound_knee(args.n, args.mu, args.sigma2, args.beta0, args.rho, args.mode)
        err_console.print(f"knee m={knee}", markup=False)
    else:
        curves = bounds.scalar_curve(name, args.grid)
        parameter = curves[0].inputs[0][0] if curves else "x"

    text = rows_to_csv([parameter, "bound_value", "raw", "kind"], bounds.curve_rows(curves, parameter))
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        write_text(str(args.out / f"{name}.csv"), text)
    log_event(logger, "cli.bounds", bound=name, points=len(curves))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    profile = log_active_profile("quick" if args.quick else args.profile)
    workers = experiments.default_workers() if args.workers is None else args.workers
    only = set(args.only) if args.only else None
    report = acceptance.run_acceptance(profile, base_seed=args.seed, workers=workers, only=only)
    acceptance.render_table(report, console)
    if args.json is not None:
        write_text(str(args.json), report.to_json())
    if not report.passed:
        names = ", ".join(f"{c.number} ({c.name})" for c in report.failures)
        raise VerificationFailure(f"acceptance checks failed: {names}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _ModelGiven(argparse.Action):
    """Stores ``--model`` and remembers that it was passed explicitly."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.model_given = True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scalinglab",
        description="Throughput scaling experiments and bounds for opportunistic relaying",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="logging level (default LOG_LEVEL or INFO)")
    parser.add_argument("--log-format", choices=["text", "json"], help="log format (default LOG_FORMAT or text)")
    parser.set_defaults(model_given=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw gains and summarise their distribution")
    _add_model_flags(p, default_family=None)
    p.add_argument("--n-samples", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("genie", help="exhaustive maximum valid link set")
    p.add_argument("--mode", choices=["single", "two-hop"], default="single")
    p.add_argument("--n", type=_int_list, required=True, help="network sizes, e.g. 4,6,8")
    p.add_argument("--dump-channel", type=Path, help="also write the trial-0 channel matrix of every n here")
    _add_model_flags(p, default_family="rayleigh")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_genie)

    p = sub.add_parser("relay", help="opportunistic two-hop relaying over an n grid")
    p.add_argument("--scheme", choices=["opportunistic", "pareto-linear"], default="opportunistic")
    p.add_argument("--n-grid", type=_int_list, help="comma-separated n values (default 256,512,1024,2048)")
    p.add_argument("--m-rule", help="paper-sqrt | equal-n | fixed:<k> (default paper-sqrt)")
    _add_model_flags(p, default_family="extremal")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_relay)

    p = sub.add_parser("run", help="run any experiment scheme from a JSON config")
    p.add_argument("--n-grid", type=_int_list)
    _add_run_flags(p)
    p.set_defaults(handler=cmd_run, model=None)

    p = sub.add_parser("bounds", help="evaluate an analytic bound over a grid")
    p.add_argument("--bound", choices=list(bounds.CURVE_NAMES), required=True)
    p.add_argument("--grid", type=_float_list, required=True, help="parameter values, e.g. 4,8,16")
    p.add_argument("--n", type=int, help="network size for genie_existence_upper")
    p.add_argument("--mode", choices=["single", "two-hop"], default="single")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=10.0)
    p.add_argument("--beta0", type=float, default=1.0)
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="use the quick profile")
    p.add_argument("--profile", help="quick | standard | full (default SCALING_LAB_PROFILE or full)")
    p.add_argument("--json", type=Path, help="write the machine-readable report here")
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_VERIFY_SEED)
    p.add_argument("--workers", type=int)
    p.add_argument("--only", type=_int_list, help="run only these check numbers, e.g. 1,8")
    p.set_defaults(handler=cmd_verify)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(level=args.log_level, fmt=args.log_format)
    configure_tracing()
    try:
        with traced("cli.command", command=args.command):
            return args.handler(args)
    except ScalingLabError as exc:
        log_event(logger, "cli.error", command=args.command, error=type(exc).__name__, exit_code=exc.exit_code)
        err_console.print(f"error: {exc}", markup=False, style="bold red")
        return exc.exit_code
    finally:
        shutdown_tracing()


if __name__ == "__main__":
    sys.exit(main())
