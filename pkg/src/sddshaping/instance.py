"""Service geographies, fleet settings and daily request generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Two-sided 99.9% normal quantile, used for the nominal bounding box of a normal law.
_Z999 = 3.2905267314918945


class ConfigError(ValueError):
    """Invalid geography, fleet or experiment configuration."""


@dataclass(frozen=True)
class SpatialLaw:
    """Per-axis coordinate law: ``normal(a=mean, b=sd)`` or ``uniform(a=lo, b=hi)``."""

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in ("normal", "uniform"):
            raise ConfigError(f"unknown spatial law {self.kind!r}")
        if self.kind == "normal" and self.b <= 0:
            raise ConfigError("normal law needs a positive standard deviation")
        if self.kind == "uniform" and not self.a < self.b:
            raise ConfigError("uniform law needs lo < hi")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.a, self.b, size)
        return rng.uniform(self.a, self.b, size)

    def bounds(self) -> tuple[float, float]:
        """Interval holding 99.9% of the mass (the full support for uniform)."""
        if self.kind == "normal":
            return self.a - _Z999 * self.b, self.a + _Z999 * self.b
        return self.a, self.b


@dataclass(frozen=True)
class Region:
    id: int
    spatial_law: SpatialLaw
    initial_expected_demand: float
    demand_cap: float
    x_shift_km: float = 0.0
    y_shift_km: float = 0.0

    def __post_init__(self):
        if self.initial_expected_demand < 0:
            raise ConfigError(f"region {self.id}: negative initial demand")
        if self.demand_cap <= 0:
            raise ConfigError(f"region {self.id}: demand cap must be positive")

    def sample_locations(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        xs = self.spatial_law.sample(rng, size) + self.x_shift_km
        ys = self.spatial_law.sample(rng, size) + self.y_shift_km
        return xs, ys

    def bounding_box(self) -> tuple[float, float, float, float]:
        lo, hi = self.spatial_law.bounds()
        return (lo + self.x_shift_km, hi + self.x_shift_km,
                lo + self.y_shift_km, hi + self.y_shift_km)


@dataclass(frozen=True)
class Geography:
    name: str
    regions: tuple[Region, ...]
    warehouse: tuple[float, float]
    circuity_factor: float = 1.4
    speed_kmh: float = 30.0

    def __post_init__(self):
        if not self.regions:
            raise ConfigError("a geography needs at least one region")
        if [r.id for r in self.regions] != list(range(len(self.regions))):
            raise ConfigError("region ids must be 0..I-1 in order")
        if self.circuity_factor < 1:
            raise ConfigError("circuity factor must be >= 1")
        if self.speed_kmh <= 0:
            raise ConfigError("speed must be positive")

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def minutes_per_km(self) -> float:
        return self.circuity_factor * 60.0 / self.speed_kmh

    @property
    def initial_demands(self) -> np.ndarray:
        return np.array([r.initial_expected_demand for r in self.regions], dtype=float)

    @property
    def demand_caps(self) -> np.ndarray:
        return np.array([r.demand_cap for r in self.regions], dtype=float)

    def max_proxy_distance(self) -> float:
        """Largest warehouse travel time to a corner of any region's 99.9% box."""
        best = 0.0
        for region in self.regions:
            x0, x1, y0, y1 = region.bounding_box()
            for x in (x0, x1):
                for y in (y0, y1):
                    best = max(best, travel_time(self, self.warehouse, (x, y)))
        return best


@dataclass(frozen=True)
class Fleet:
    """Intra-day operating parameters, all durations in minutes."""

    n_vehicles: int = 5
    request_window: float = 420.0   # T_C
    shift_end: float = 480.0        # T_V
    deadline: float = 240.0         # delivery promise after the request
    load_time: float = 3.0          # t_W, once per trip
    service_time: float = 3.0       # t_C, once per stop
    departure: str = "latest"       # when an open trip leaves: "latest" feasible or "earliest"

    def __post_init__(self):
        if self.n_vehicles < 1:
            raise ConfigError("fleet needs at least one vehicle")
        for name in ("request_window", "shift_end", "deadline"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.load_time < 0 or self.service_time < 0:
            raise ConfigError("load and service times must be nonnegative")
        if self.departure not in ("latest", "earliest"):
            raise ConfigError(f"unknown departure rule {self.departure!r}")
        if self.shift_end < self.request_window:
            raise ConfigError("shift_end must be >= request_window")


@dataclass(frozen=True, slots=True)
class Customer:
    id: int
    region_id: int
    x: float
    y: float
    request_time: float
    deadline: float

    @property
    def location(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class DayScenario:
    customers: tuple[Customer, ...]
    expected_demands: tuple[float, ...] = field(default=())

    def __len__(self):
        return len(self.customers)

    def counts_by_region(self, n_regions: int) -> np.ndarray:
        counts = np.zeros(n_regions, dtype=int)
        for c in self.customers:
            counts[c.region_id] += 1
        return counts


def travel_time(geo: Geography, a, b) -> float:
    """Road travel time in minutes between two points given in km."""
    return geo.minutes_per_km * math.hypot(a[0] - b[0], a[1] - b[1])


def sample_day(geo: Geography, expected_demands, rng: np.random.Generator,
               fleet: Fleet = Fleet()) -> DayScenario:
    """Draw one day of requests.

    Each region gets a Poisson(D_i) count with uniform request times on
    ``[0, T_C]``, which is a homogeneous Poisson process on the window.
    """
    demands = [float(d) for d in expected_demands]
    if len(demands) != geo.n_regions:
        raise ConfigError("need one expected demand per region")
    if any(d < 0 or not math.isfinite(d) for d in demands):
        raise ConfigError("expected demands must be finite and nonnegative")

    horizon = fleet.request_window
    records = []
    for region, d in zip(geo.regions, demands):
        n = int(rng.poisson(d)) if d > 0 else 0
        if n == 0:
            continue
        times = rng.uniform(0.0, horizon, n)
        xs, ys = region.sample_locations(rng, n)
        records.extend(zip(times.tolist(), [region.id] * n, xs.tolist(), ys.tolist()))

    records.sort(key=lambda rec: rec[0])  # stable: generation order breaks ties
    seen = set()
    for i, rec in enumerate(records):
        t = rec[0]
        while t in seen:
            t = float(rng.uniform(0.0, horizon))
        seen.add(t)
        records[i] = (t,) + rec[1:]
    records.sort(key=lambda rec: rec[0])

    customers = tuple(
        Customer(k, rid, x, y, t, t + fleet.deadline)
        for k, (t, rid, x, y) in enumerate(records)
    )
    return DayScenario(customers, tuple(demands))


# Nominal region boxes are mean +/- 2 km per axis, so in (a)/(b) Region 1 spans
# x in [3, 7] and the shifted Region 2 spans x in [8, 12]; the gap is the
# no-service strip.
_NORMAL_5_3 = SpatialLaw("normal", 5.0, 3.0)
_UNIFORM_0_5 = SpatialLaw("uniform", 0.0, 5.0)


def builtin_geography(which: str) -> Geography:
    """The three service areas used in the experiments: ``a``, ``b`` or ``c``."""
    if which == "a":
        return Geography("a", (
            Region(0, _NORMAL_5_3, 200.0, 250.0),
            Region(1, _NORMAL_5_3, 50.0, 250.0, x_shift_km=5.0),
        ), warehouse=(7.5, 5.0))
    if which == "b":
        return Geography("b", (
            Region(0, _NORMAL_5_3, 125.0, 250.0),
            Region(1, _NORMAL_5_3, 125.0, 250.0, x_shift_km=5.0),
        ), warehouse=(7.0, 5.0))
    if which == "c":
        # 2x2 tiling of 5 km squares around a central warehouse.
        return Geography("c", (
            Region(0, _UNIFORM_0_5, 50.0, 125.0),
            Region(1, _UNIFORM_0_5, 100.0, 125.0, x_shift_km=5.0),
            Region(2, _UNIFORM_0_5, 25.0, 125.0, y_shift_km=5.0),
            Region(3, _UNIFORM_0_5, 75.0, 125.0, x_shift_km=5.0, y_shift_km=5.0),
        ), warehouse=(5.0, 5.0))
    raise ConfigError(f"unknown geography {which!r}; expected one of a, b, c")


def scale_geography(geo: Geography, scale: float) -> Geography:
    """Divide initial demands and caps by ``scale`` (desk-scale runs)."""
    if scale < 1:
        raise ConfigError("scale must be >= 1")
    regions = tuple(
        Region(r.id, r.spatial_law, r.initial_expected_demand / scale,
               r.demand_cap / scale, r.x_shift_km, r.y_shift_km)
        for r in geo.regions
    )
    return Geography(geo.name, regions, geo.warehouse, geo.circuity_factor, geo.speed_kmh)
