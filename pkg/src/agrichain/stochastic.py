"""Seeded demand and lead-time sources.

Parameter conventions (configurable, see docs/config_schema.md):

* ``normal(mu, sigma)`` -- the second number is a standard deviation.
* ``gamma(shape, scale)`` and ``weibull(shape, scale)`` -- first shape, then scale,
  so ``gamma(2, 10)`` has mean 20.
* ``exponential(rate)`` -- mean ``1 / rate``.
* ``uniform_int(low, high)`` -- integers ``low..high`` inclusive, equally likely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

KINDS = {"normal": 2, "gamma": 2, "weibull": 2, "exponential": 1, "deterministic": 1, "uniform_int": 2}
LEAD_TIME_KINDS = ("exponential", "gamma", "deterministic")


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if len(self.params) != KINDS[self.kind]:
            raise ValueError(f"{self.kind} takes {KINDS[self.kind]} parameter(s), got {len(self.params)}")
        if not all(math.isfinite(p) for p in self.params):
            raise ValueError(f"{self.kind}: non-finite parameter")
        if self.kind == "normal" and self.params[1] < 0:
            raise ValueError("normal: sigma must be >= 0")
        if self.kind in ("gamma", "weibull", "exponential") and min(self.params) <= 0:
            raise ValueError(f"{self.kind}: parameters must be > 0")
        if self.kind == "deterministic" and self.params[0] < 0:
            raise ValueError("deterministic: value must be >= 0")
        if self.kind == "uniform_int":
            lo, hi = self.params
            if lo < 0 or hi < lo or lo != int(lo) or hi != int(hi):
                raise ValueError("uniform_int: need integers 0 <= low <= high")

    @classmethod
    def parse(cls, value) -> "DistributionSpec":
        """Accept ``["normal", 3, 1.5]`` or ``{"kind": ..., "params": [...]}``."""
        if isinstance(value, DistributionSpec):
            return value
        if isinstance(value, dict):
            return cls(str(value["kind"]), tuple(value["params"]))
        kind, *params = value
        return cls(str(kind), tuple(params))

    def to_list(self) -> list:
        return [self.kind, *self.params]

    def mean(self) -> float:
        """Analytic mean of the untruncated distribution."""
        a = self.params
        if self.kind == "normal":
            return a[0]
        if self.kind == "gamma":
            return a[0] * a[1]
        if self.kind == "weibull":
            return a[1] * math.gamma(1.0 + 1.0 / a[0])
        if self.kind == "exponential":
            return 1.0 / a[0]
        if self.kind == "uniform_int":
            return 0.5 * (a[0] + a[1])
        return a[0]

    def std(self) -> float:
        a = self.params
        if self.kind == "normal":
            return a[1]
        if self.kind == "gamma":
            return math.sqrt(a[0]) * a[1]
        if self.kind == "weibull":
            k, lam = a
            g1 = math.gamma(1.0 + 1.0 / k)
            return lam * math.sqrt(max(math.gamma(1.0 + 2.0 / k) - g1 * g1, 0.0))
        if self.kind == "exponential":
            return 1.0 / a[0]
        if self.kind == "uniform_int":
            n = a[1] - a[0] + 1.0
            return math.sqrt((n * n - 1.0) / 12.0)
        return 0.0

    def draw(self, rng: np.random.Generator) -> float:
        a = self.params
        if self.kind == "normal":
            return float(a[0] + a[1] * rng.standard_normal())
        if self.kind == "gamma":
            return float(rng.gamma(a[0], a[1]))
        if self.kind == "weibull":
            return float(a[1] * rng.weibull(a[0]))
        if self.kind == "exponential":
            return float(rng.exponential(1.0 / a[0]))
        if self.kind == "uniform_int":
            return float(rng.integers(int(a[0]), int(a[1]) + 1))
        return a[0]

    def draw_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        a = self.params
        if self.kind == "normal":
            return a[0] + a[1] * rng.standard_normal(n)
        if self.kind == "gamma":
            return rng.gamma(a[0], a[1], size=n)
        if self.kind == "weibull":
            return a[1] * rng.weibull(a[0], size=n)
        if self.kind == "exponential":
            return rng.exponential(1.0 / a[0], size=n)
        if self.kind == "uniform_int":
            return rng.integers(int(a[0]), int(a[1]) + 1, size=n).astype(float)
        return np.full(n, a[0])

    def with_spread(self, factor: float) -> "DistributionSpec":
        """Same mean, standard deviation multiplied by ``factor``.

        Exponential, deterministic and uniform_int specs have no free spread
        and come back unchanged.
        """
        a = self.params
        if factor == 1.0 or self.kind in ("exponential", "deterministic", "uniform_int"):
            return self
        if self.kind == "normal":
            return DistributionSpec("normal", (a[0], a[1] * factor))
        if self.kind == "gamma":
            f2 = factor * factor
            return DistributionSpec("gamma", (a[0] / f2, a[1] * f2))
        return _weibull_with_cv(self.mean(), factor * self.std() / self.mean())


def _weibull_cv(k: float) -> float:
    g1 = math.gamma(1.0 + 1.0 / k)
    return math.sqrt(max(math.gamma(1.0 + 2.0 / k) / (g1 * g1) - 1.0, 0.0))


def _weibull_with_cv(mean: float, cv: float) -> DistributionSpec:
    from scipy.optimize import brentq

    # cv is strictly decreasing in the shape parameter
    lo, hi = 0.05, 200.0
    cv = min(max(cv, _weibull_cv(hi)), _weibull_cv(lo))
    k = brentq(lambda s: _weibull_cv(s) - cv, lo, hi)
    return DistributionSpec("weibull", (k, mean / math.gamma(1.0 + 1.0 / k)))


class RngStream:
    """One independent generator per ``(seed, stream_id)`` pair."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.generator = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))))

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def _gen(rng) -> np.random.Generator:
    return rng.generator if isinstance(rng, RngStream) else rng


@dataclass(frozen=True)
class DemandModel:
    """Weekday schedules keyed by ``(retailer, product)`` (day 0 = Monday)."""

    schedules: dict

    def __post_init__(self):
        for key, slots in self.schedules.items():
            if len(slots) != 7:
                raise ValueError(f"demand schedule {key} needs 7 weekday slots, got {len(slots)}")

    def spec(self, retailer: int, product: int, day_of_week: int) -> DistributionSpec:
        return self.schedules[(retailer, product)][day_of_week]


def weekday_schedule(mon_wed, thu_fri, sat_sun) -> tuple[DistributionSpec, ...]:
    a, b, c = (DistributionSpec.parse(s) for s in (mon_wed, thu_fri, sat_sun))
    return (a, a, a, b, b, c, c)


def sample_demand(model: DemandModel, retailer: int, product: int, day_of_week: int, rng) -> float:
    if not 0 <= day_of_week <= 6:
        raise ValueError(f"day_of_week must be in 0..6, got {day_of_week}")
    return max(0.0, model.spec(retailer, product, day_of_week).draw(_gen(rng)))


@dataclass(frozen=True)
class LeadTimeModel:
    """Lead-time distribution per edge; draws are rounded up, then floored."""

    edges: dict
    floor: int = 1

    def __post_init__(self):
        if self.floor not in (0, 1):
            raise ValueError("lead-time floor must be 0 or 1")
        for edge, spec in self.edges.items():
            if spec.kind not in LEAD_TIME_KINDS:
                raise ValueError(f"lead time on {edge}: kind {spec.kind!r} not allowed")

    def mean(self, edge) -> float:
        return self.edges[edge].mean()


def round_lead_time(raw: float, floor: int = 1) -> int:
    # guard against 2.0000000001 style noise before the ceiling
    return max(int(floor), int(math.ceil(round(raw, 9))))


def sample_lead_time(model: LeadTimeModel, edge, rng) -> int:
    return round_lead_time(model.edges[edge].draw(_gen(rng)), model.floor)


def forecast_demand(history: Sequence[float], window: int = 7) -> float:
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(history) == 0:
        return 0.0
    tail = list(history)[-window:]
    return float(sum(tail) / len(tail))


def forecast_lead_time(history: Iterable[float], smoothing: float = 0.3, prior: float = 1.0) -> float:
    """Exponential smoothing of realized lead times, started at ``prior``."""
    if not (0.0 < smoothing <= 1.0):
        raise ValueError("smoothing must lie in (0, 1]")
    est = float(prior)
    for x in history:
        est = smoothing * float(x) + (1.0 - smoothing) * est
    return est
