"""Domain types, parameter validation and systematic-factor coefficients."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .errors import (
    BadWeights,
    EmptyPortfolio,
    NegativeParameter,
    NonFiniteInput,
    TimeOffGrid,
    ValidationError,
)

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ObligorParams:
    """Intensity dynamics of one name (or one exchangeable type of names).

    The intensity follows a square-root diffusion with mean reversion
    ``alpha`` towards ``lambda_bar``, volatility ``sigma``, a contagion jump of
    ``beta_c / N`` per default in the pool, and multiplicative exposure
    ``beta_s`` to increments of the systematic factor.
    """

    alpha: float
    lambda_bar: float
    sigma: float
    beta_c: float
    beta_s: float
    lambda0: float

    def __post_init__(self):
        for name in ("alpha", "lambda_bar", "sigma", "beta_c", "beta_s", "lambda0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise NonFiniteInput(f"{name} must be finite, got {value!r}")
            if name != "beta_s" and value < 0:
                raise NegativeParameter(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class SystematicRiskSpec:
    """Drift and volatility of the common factor ``dX = b0(X) dt + sigma0(X) dV``.

    ``kind`` is one of ``"ou"`` (``b0 = speed * (mean - x)``, ``sigma0 = vol``),
    ``"constant"`` (frozen factor at ``level``) or ``"custom"`` (user callables
    that must accept numpy arrays).
    """

    kind: str = "ou"
    mean: float = 0.0
    speed: float = 0.0
    vol: float = 0.0
    x0: float = 0.0
    level: float = 0.0
    drift_fn: Callable[[Any], Any] | None = field(default=None, compare=False)
    vol_fn: Callable[[Any], Any] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("ou", "constant", "custom"):
            raise ValidationError(f"unknown systematic kind {self.kind!r}")
        for name in ("mean", "speed", "vol", "x0", "level"):
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteInput(f"systematic.{name} must be finite")
        if self.kind == "ou" and (self.speed < 0 or self.vol < 0):
            raise NegativeParameter("OU speed and vol must be >= 0")
        if self.kind == "custom" and (self.drift_fn is None or self.vol_fn is None):
            raise ValidationError("custom systematic factor needs drift_fn and vol_fn")
        if self.kind == "constant":
            object.__setattr__(self, "x0", self.level)

    @classmethod
    def ou(cls, mean: float, speed: float, vol: float, x0: float) -> "SystematicRiskSpec":
        return cls(kind="ou", mean=mean, speed=speed, vol=vol, x0=x0)

    @classmethod
    def constant(cls, level: float) -> "SystematicRiskSpec":
        return cls(kind="constant", level=level, x0=level)

    @property
    def is_frozen(self) -> bool:
        return self.kind == "constant" or (self.kind == "ou" and self.speed == 0 and self.vol == 0)


@dataclass(frozen=True)
class PortfolioSpec:
    """A pool of ``names`` obligors split into weighted exchangeable types."""

    names: int
    types: tuple[tuple[ObligorParams, float], ...]

    @property
    def is_homogeneous(self) -> bool:
        return len(self.types) == 1

    @property
    def params(self) -> ObligorParams:
        """Parameters of a homogeneous pool."""
        if not self.is_homogeneous:
            raise ValidationError("portfolio has more than one type")
        return self.types[0][0]

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.types], dtype=float)

    def type_counts(self) -> np.ndarray:
        """Integer number of names per type (largest-remainder rounding)."""
        raw = self.weights * self.names
        counts = np.floor(raw).astype(int)
        short = self.names - counts.sum()
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
        return counts

    @classmethod
    def homogeneous(cls, params: ObligorParams, names: int) -> "PortfolioSpec":
        return cls(names=names, types=((params, 1.0),))


@dataclass(frozen=True)
class TimeGrid:
    """Equispaced grid ``0, dt, ..., horizon``."""

    horizon: float
    dt: float

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and math.isfinite(self.dt)):
            raise NonFiniteInput("grid horizon and dt must be finite")
        if self.dt <= 0 or self.horizon <= 0:
            raise ValidationError("grid needs dt > 0 and horizon > 0")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValidationError(f"horizon/dt = {ratio} is not an integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dt

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; raises :class:`TimeOffGrid` otherwise."""
        pos = t / self.dt
        idx = int(round(pos))
        if abs(pos - idx) > 1e-9 * max(1.0, pos) or idx < 0 or idx > self.n_steps:
            raise TimeOffGrid(f"time {t} is not on the grid (dt={self.dt}, T={self.horizon})")
        return idx

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.dt / factor)


def validate_portfolio(spec: PortfolioSpec) -> PortfolioSpec:
    """Check pool size, type weights and parameter bounds.

    Returns a normalized copy; validating an already validated spec returns
    an equal spec.
    """
    if spec.names < 1 or not spec.types:
        raise EmptyPortfolio("portfolio needs at least one name and one type")
    types = []
    for params, weight in spec.types:
        if not isinstance(params, ObligorParams):
            params = ObligorParams(**params)
        weight = float(weight)
        if not math.isfinite(weight) or weight <= 0:
            raise BadWeights(f"type weights must be positive, got {weight!r}")
        types.append((params, weight))
    total = sum(w for _, w in types)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise BadWeights(f"type weights sum to {total!r}, not 1")
    return PortfolioSpec(names=int(spec.names), types=tuple(types))


def eval_risk_coeffs(spec: SystematicRiskSpec, x):
    """Drift ``b0(x)`` and volatility ``sigma0(x)`` of the systematic factor.

    Works on scalars and numpy arrays alike.
    """
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise NonFiniteInput("systematic factor value is not finite")
    if spec.kind == "ou":
        b0 = spec.speed * (spec.mean - xa)
        s0 = np.full_like(xa, spec.vol)
    elif spec.kind == "constant":
        b0 = np.zeros_like(xa)
        s0 = np.zeros_like(xa)
    else:
        b0 = np.asarray(spec.drift_fn(xa), dtype=float) * np.ones_like(xa)
        s0 = np.asarray(spec.vol_fn(xa), dtype=float) * np.ones_like(xa)
    if xa.ndim == 0:
        return float(b0), float(s0)
    return b0, s0


# --------------------------------------------------------------------------
# configuration files


@dataclass(frozen=True)
class RunConfig:
    portfolio: PortfolioSpec
    risk: SystematicRiskSpec
    grid: TimeGrid
    options: Mapping[str, Any] = field(default_factory=dict, compare=False)
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def option(self, key: str, default=None):
        return self.options.get(key, default)


_TYPE_KEYS = ("alpha", "lambda_bar", "sigma", "beta_c", "beta_s", "lambda0")


def parse_config(data: Mapping[str, Any]) -> RunConfig:
    """Build a :class:`RunConfig` from the JSON structure.

    Unknown top-level sections other than ``portfolio``, ``systematic`` and
    ``grid`` are kept verbatim in ``options`` (run settings such as ``K``,
    ``paths`` or ``budget_seconds``).
    """
    try:
        pf = data["portfolio"]
        types = []
        for entry in pf["types"]:
            params = ObligorParams(**{k: float(entry[k]) for k in _TYPE_KEYS})
            types.append((params, float(entry.get("weight", 1.0))))
        portfolio = validate_portfolio(PortfolioSpec(names=int(pf["names"]), types=tuple(types)))

        sy = dict(data.get("systematic", {"kind": "constant", "level": 0.0}))
        kind = sy.pop("kind", "ou")
        if kind == "custom":
            raise ValidationError("custom systematic factors cannot be read from a config file")
        risk = SystematicRiskSpec(kind=kind, **{k: float(v) for k, v in sy.items()})

        gr = data["grid"]
        grid = TimeGrid(float(gr["horizon"]), float(gr["dt"]))
    except KeyError as exc:
        raise ValidationError(f"config is missing key {exc}") from None
    except TypeError as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    options = {k: v for k, v in data.items() if k not in ("portfolio", "systematic", "grid")}
    flat = {}
    for key, value in options.items():
        if isinstance(value, Mapping):
            flat.update(value)
        else:
            flat[key] = value
    return RunConfig(portfolio=portfolio, risk=risk, grid=grid, options=flat, raw=dict(data))


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(data)

