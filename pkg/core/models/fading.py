"""
models/fading.py
Channel power-gain laws and their moment metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..common.errors import DomainError


class FadingFamily(str, Enum):
    RAYLEIGH = "rayleigh"
    LOGNORMAL = "lognormal"
    NAKAGAMI = "nakagami"
    EXTREMAL = "extremal"
    PARETO_PATHLOSS = "pareto_pathloss"
    PARETO_GENERAL = "pareto_general"

    @property
    def is_pareto(self) -> bool:
        return self in (FadingFamily.PARETO_PATHLOSS, FadingFamily.PARETO_GENERAL)


# Required parameters per family, in canonical order.
FAMILY_PARAMS: dict[FadingFamily, tuple[str, ...]] = {
    FadingFamily.RAYLEIGH: ("mu",),
    FadingFamily.LOGNORMAL: ("sigma_db",),
    FadingFamily.NAKAGAMI: ("shape", "mu"),
    FadingFamily.EXTREMAL: ("mu", "sigma", "n"),
    FadingFamily.PARETO_PATHLOSS: ("alpha",),
    FadingFamily.PARETO_GENERAL: ("nu", "c0"),
}


def _require(condition: bool, family: FadingFamily, message: str) -> None:
    if not condition:
        raise DomainError(f"{family.value}: {message}")


@dataclass(frozen=True)
class FadingModel:
    """
    Immutable channel power-gain law: a family plus its parameters.

    Construct through the family classmethods (``FadingModel.rayleigh(1.0)``)
    or ``FadingModel.from_spec`` for config-driven construction. Parameters are
    validated here, never at evaluation time.
    """

    family: FadingFamily
    params: tuple[tuple[str, float], ...] = field(default=())

    def __post_init__(self) -> None:
        family = FadingFamily(self.family)
        object.__setattr__(self, "family", family)
        names = tuple(name for name, _ in self.params)
        expected = FAMILY_PARAMS[family]
        if sorted(names) != sorted(expected):
            raise DomainError(f"{family.value}: expected parameters {expected}, got {names}")
        ordered = tuple((name, float(self.param_map()[name])) for name in expected)
        object.__setattr__(self, "params", ordered)
        for name, value in ordered:
            _require(math.isfinite(value), family, f"parameter {name} must be finite")
        self._validate()

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def rayleigh(cls, mu: float = 1.0) -> "FadingModel":
        return cls(FadingFamily.RAYLEIGH, (("mu", mu),))

    @classmethod
    def lognormal(cls, sigma_db: float) -> "FadingModel":
        return cls(FadingFamily.LOGNORMAL, (("sigma_db", sigma_db),))

    @classmethod
    def nakagami(cls, shape: float, mu: float = 1.0) -> "FadingModel":
        return cls(FadingFamily.NAKAGAMI, (("shape", shape), ("mu", mu)))

    @classmethod
    def extremal(cls, mu: float, sigma: float, n: int) -> "FadingModel":
        return cls(FadingFamily.EXTREMAL, (("mu", mu), ("sigma", sigma), ("n", n)))

    @classmethod
    def pareto_pathloss(cls, alpha: float) -> "FadingModel":
        return cls(FadingFamily.PARETO_PATHLOSS, (("alpha", alpha),))

    @classmethod
    def pareto_general(cls, nu: float, c0: float) -> "FadingModel":
        return cls(FadingFamily.PARETO_GENERAL, (("nu", nu), ("c0", c0)))

    @classmethod
    def from_spec(cls, family: str, **params: float) -> "FadingModel":
        try:
            fam = FadingFamily(family)
        except ValueError:
            raise DomainError(
                f"unknown fading family {family!r}; choose one of {[f.value for f in FadingFamily]}"
            ) from None
        return cls(fam, tuple(params.items()))

    def to_spec(self) -> dict:
        return {"family": self.family.value, **self.param_map()}

    # ------------------------------------------------------------------
    # Accessors
    # ------------------------------------------------------------------

    def param_map(self) -> dict[str, float]:
        return dict(self.params)

    def __getitem__(self, name: str) -> float:
        return self.param_map()[name]

    @property
    def nu(self) -> Optional[float]:
        """Tail index for the Pareto families, ``None`` otherwise."""
        if self.family is FadingFamily.PARETO_PATHLOSS:
            return 2.0 / self["alpha"]
        if self.family is FadingFamily.PARETO_GENERAL:
            return self["nu"]
        return None

    @property
    def population(self) -> int:
        if self.family is not FadingFamily.EXTREMAL:
            raise DomainError(f"{self.family.value}: no population size parameter")
        return int(self["n"])

    def describe(self) -> str:
        inner = ",".join(f"{name}={value:g}" for name, value in self.params)
        return f"{self.family.value}({inner})"

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def _validate(self) -> None:
        family = self.family
        p = self.param_map()
        if family is FadingFamily.RAYLEIGH:
            _require(p["mu"] > 0, family, "mean power mu must be > 0")
        elif family is FadingFamily.LOGNORMAL:
            _require(p["sigma_db"] > 0, family, "sigma_db must be > 0")
        elif family is FadingFamily.NAKAGAMI:
            _require(p["shape"] >= 0.5, family, "shape must be >= 0.5")
            _require(p["mu"] > 0, family, "mean power mu must be > 0")
        elif family is FadingFamily.EXTREMAL:
            _require(p["sigma"] > 0, family, "sigma must be > 0")
            _require(p["n"] >= 2 and float(p["n"]).is_integer(), family, "n must be an integer >= 2")
        elif family is FadingFamily.PARETO_PATHLOSS:
            _require(p["alpha"] >= 2, family, "path-loss exponent alpha must be >= 2")
        elif family is FadingFamily.PARETO_GENERAL:
            _require(0 < p["nu"] < 1, family, "tail index nu must lie in (0, 1)")
            _require(p["c0"] > 0, family, "scale c0 must be > 0")


@dataclass(frozen=True)
class MomentReport:
    """Mean and variance of a fading law; ``math.inf`` marks an infinite moment."""

    mean: float
    variance: float
    tail_index: Optional[float] = None

    @property
    def mean_infinite(self) -> bool:
        return math.isinf(self.mean)

    @property
    def variance_infinite(self) -> bool:
        return math.isinf(self.variance)

    def to_dict(self) -> dict:
        return {
            "mean": "inf" if self.mean_infinite else self.mean,
            "variance": "inf" if self.variance_infinite else self.variance,
            "tail_index": self.tail_index,
        }
