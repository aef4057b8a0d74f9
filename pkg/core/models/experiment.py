"""
models/experiment.py
Experiment configuration and result records (pydantic).

``ExperimentConfig`` is what a JSON config file parses into; flags on the
command line are merged on top of it before validation.
"""

from __future__ import annotations

from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..common.errors import ConfigError, DomainError
from .channel import LinkParams
from .fading import FadingFamily, FadingModel
from .protocol import parse_m_rule

SCHEMA_VERSION = 1
_MAX_SEED = (1 << 64) - 1


class Scheme(str, Enum):
    GENIE_SINGLE = "genie_single"
    GENIE_TWO_HOP = "genie_two_hop"
    OPPORTUNISTIC_TWO_HOP = "opportunistic_two_hop"
    PARETO_LINEAR = "pareto_linear"
    DISTRIBUTION_DIAGNOSTICS = "distribution_diagnostics"
    BOUND_OVERLAY = "bound_overlay"

    @property
    def is_genie(self) -> bool:
        return self in (Scheme.GENIE_SINGLE, Scheme.GENIE_TWO_HOP)

    @property
    def is_relay(self) -> bool:
        return self in (Scheme.OPPORTUNISTIC_TWO_HOP, Scheme.PARETO_LINEAR)


class FadingSpec(BaseModel):
    """Serialisable form of a :class:`FadingModel`."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    family: FadingFamily
    params: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_model(self) -> "FadingSpec":
        try:
            self.to_model()
        except DomainError as exc:
            raise ValueError(str(exc)) from None
        return self

    def to_model(self) -> FadingModel:
        return FadingModel.from_spec(self.family.value, **self.params)

    @classmethod
    def from_model(cls, model: FadingModel) -> "FadingSpec":
        return cls(family=model.family, params=model.param_map())


class LinkSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    rho: float = Field(default=10.0, gt=0)
    beta0: float = Field(default=1.0, gt=0)

    def to_params(self) -> LinkParams:
        return LinkParams(rho=self.rho, beta0=self.beta0)


class ExperimentConfig(BaseModel):
    """A complete, reproducible description of one experiment run."""

    model_config = ConfigDict(extra="forbid")

    scheme: Scheme
    model: FadingSpec
    n_grid: list[int]
    m_rule: str = "paper_sqrt"
    link: LinkSpec = Field(default_factory=LinkSpec)
    trials: int = Field(default=100, ge=1)
    base_seed: int = Field(default=0, ge=0, le=_MAX_SEED)
    force_exponential: bool = False
    # extremal gains take the grid n as their population size unless disabled
    couple_population: bool = True
    # SINR draws per trial for bound_overlay
    samples: int = Field(default=10_000, ge=1)

    @field_validator("n_grid")
    @classmethod
    def _check_grid(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("n_grid must not be empty")
        if any(n < 1 for n in value):
            raise ValueError("n_grid entries must be >= 1")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("n_grid must be strictly increasing")
        return value

    @field_validator("m_rule")
    @classmethod
    def _check_m_rule(cls, value: str) -> str:
        try:
            kind, k = parse_m_rule(value)
        except DomainError as exc:
            raise ValueError(str(exc)) from None
        return f"fixed:{k}" if k is not None else kind.value

    @model_validator(mode="after")
    def _check_scheme(self) -> "ExperimentConfig":
        family = self.model.family
        if self.scheme is Scheme.PARETO_LINEAR:
            if family is not FadingFamily.PARETO_PATHLOSS:
                raise ValueError("pareto_linear requires the pareto_pathloss fading family")
            if self.model.params.get("alpha", 0.0) <= 2:
                raise ValueError("pareto_linear requires alpha > 2")
        if self.scheme is Scheme.GENIE_TWO_HOP and self.link.beta0 < 1:
            raise ValueError("genie_two_hop requires beta0 >= 1")
        if self.scheme is Scheme.BOUND_OVERLAY:
            if family.is_pareto:
                raise ValueError("bound_overlay requires a fading family with finite mean and variance")
            if self.n_grid[0] < 2:
                raise ValueError("bound_overlay reads n_grid as active-set sizes and needs every entry >= 2")
        return self

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def parse(cls, data: dict[str, Any]) -> "ExperimentConfig":
        """Validate *data*, reporting every failing field as a :class:`ConfigError`."""
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            fields = tuple(".".join(str(part) for part in err["loc"]) or "<root>" for err in exc.errors())
            messages = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
            )
            raise ConfigError(f"invalid experiment config: {messages}", fields=fields) from None

    def fading_model(self) -> FadingModel:
        return self.model.to_model()

    def link_params(self) -> LinkParams:
        return self.link.to_params()

    def echo(self) -> dict:
        return self.model_dump(mode="json")


class TrialResult(BaseModel):
    """One trial at one grid point."""

    model_config = ConfigDict(frozen=True)

    n: int
    m: int
    trial_index: int
    seed: int
    throughput_bits: float = Field(ge=0)
    distinct_event: Optional[bool] = None
    per_link_success_rate: Optional[float] = None
    scheduled_fraction: Optional[float] = None
    extra: dict[str, float] = Field(default_factory=dict)

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.n, self.trial_index)


class NSummary(BaseModel):
    """Aggregate over all trials at one grid point."""

    n: int
    m: int
    trials: int
    mean: float
    median: float
    std_err: float
    distinct_frequency: Optional[float] = None
    distinct_std_err: Optional[float] = None
    per_link_success_mean: Optional[float] = None
    scheduled_fraction_mean: Optional[float] = None
    conditional_mean: Optional[float] = None
    extra_means: dict[str, float] = Field(default_factory=dict)


class ScalingFit(BaseModel):
    """Least-squares slope of ln(throughput) against ln(n) with a bootstrap CI."""

    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    r_squared: float
    points: int
    resamples: int = 200

    @model_validator(mode="after")
    def _check_interval(self) -> "ScalingFit":
        if not (self.ci_low <= self.slope <= self.ci_high):
            raise ValueError(f"slope {self.slope} outside its interval [{self.ci_low}, {self.ci_high}]")
        return self


class RunManifest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    artifact_version: str
    run_id: str
    config: dict
    base_seed: int
    workers: int = 1
    started_at: str
    finished_at: str
    summaries: list[NSummary] = Field(default_factory=list)
    fit: Optional[ScalingFit] = None
