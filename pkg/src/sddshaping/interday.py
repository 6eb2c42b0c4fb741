"""Multi-month loop: blocks of days, service levels and demand updates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .instance import ConfigError, Fleet, Geography, sample_day
from .intraday import run_day, service_level


@dataclass(frozen=True)
class DemandModel:
    """``capacitated`` smooths toward cap * r with weight ``param`` (alpha);
    ``uncapacitated`` multiplies by 1 + r - ``param`` (the threshold r-bar)."""

    kind: str
    param: float
    caps: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("capacitated", "uncapacitated"):
            raise ConfigError(f"unknown demand model {self.kind!r}")
        if not 0 < self.param < 1:
            raise ConfigError(f"{self.kind} parameter must lie in (0, 1), got {self.param}")
        if self.kind == "capacitated" and (not self.caps or min(self.caps) <= 0):
            raise ConfigError("capacitated model needs positive per-region caps")

    @classmethod
    def capacitated(cls, alpha: float, caps) -> "DemandModel":
        return cls("capacitated", float(alpha), tuple(float(c) for c in caps))

    @classmethod
    def uncapacitated(cls, r_bar: float) -> "DemandModel":
        return cls("uncapacitated", float(r_bar))

    def label(self) -> str:
        name = "alpha" if self.kind == "capacitated" else "rbar"
        return f"{self.kind}-{name}{self.param:g}"


@dataclass(frozen=True)
class HorizonConfig:
    days: int = 720
    update_every: int = 30

    def __post_init__(self):
        if self.days <= 0 or self.update_every <= 0:
            raise ConfigError("horizon lengths must be positive")
        if self.days % self.update_every:
            raise ConfigError("update period must divide the horizon")

    @property
    def n_updates(self) -> int:
        return self.days // self.update_every


@dataclass
class HorizonResult:
    daily_requested: np.ndarray     # (days, regions)
    daily_accepted: np.ndarray
    trajectory: np.ndarray          # (updates + 1, regions); row 0 is the initial demand
    service_levels: np.ndarray      # (updates, regions)
    seed: int = 0

    @property
    def total_services(self) -> int:
        return int(self.daily_accepted.sum())

    @property
    def avg_daily_services(self) -> float:
        return self.total_services / self.daily_accepted.shape[0]

    @property
    def end_demand(self) -> np.ndarray:
        return self.trajectory[-1]


def update_demand(model: DemandModel, d_prev, r) -> np.ndarray:
    d = np.asarray(d_prev, dtype=float)
    r = np.asarray(r, dtype=float)
    if model.kind == "capacitated":
        out = (1.0 - model.param) * d + model.param * np.asarray(model.caps) * r
    else:
        out = d * (1.0 + r - model.param)
    return np.maximum(out, 0.0)


def run_horizon(geo: Geography, model: DemandModel, horizon: HorizonConfig, policy, seed: int,
                fleet: Fleet = Fleet(), empty_service_level: float = 1.0) -> HorizonResult:
    """Simulate ``horizon.days`` days with a demand update after every block.

    ``policy`` is one policy for the whole horizon or a sequence with one
    policy per block.
    """
    n_blocks = horizon.n_updates
    per_block = list(policy) if isinstance(policy, (list, tuple)) else [policy] * n_blocks
    if len(per_block) != n_blocks:
        raise ConfigError(f"need {n_blocks} block policies, got {len(per_block)}")

    rng = np.random.default_rng(seed)
    I = geo.n_regions
    req = np.zeros((horizon.days, I), dtype=int)
    acc = np.zeros((horizon.days, I), dtype=int)
    traj = np.zeros((n_blocks + 1, I))
    levels = np.zeros((n_blocks, I))
    demand = geo.initial_demands
    traj[0] = demand
    day = 0
    for block in range(n_blocks):
        start = day
        for _ in range(horizon.update_every):
            scenario = sample_day(geo, demand, rng, fleet)
            res = run_day(geo, scenario, per_block[block], demand, fleet)
            req[day], acc[day] = res.requested, res.accepted
            day += 1
        r = service_level(req[start:day], acc[start:day], empty_service_level)
        levels[block] = r
        demand = update_demand(model, demand, r)
        traj[block + 1] = demand
    return HorizonResult(req, acc, traj, levels, seed)


def relative_improvement(policy_value: float, baseline_value: float) -> float:
    if baseline_value == 0:
        raise ZeroDivisionError("baseline value is zero")
    return (policy_value - baseline_value) / baseline_value


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def summarize(results, baseline=None) -> dict:
    """Mean and standard error of daily services and end demand, plus improvement vs ``baseline``."""
    if not results:
        raise ConfigError("no results to summarize")
    services = [r.avg_daily_services for r in results]
    ends = np.array([r.end_demand for r in results])
    mean, se = _mean_se(services)
    out = {
        "replications": len(results),
        "avg_daily_services": mean,
        "avg_daily_services_se": se,
        "end_demand": ends.mean(axis=0),
        "end_demand_se": (ends.std(axis=0, ddof=1) / math.sqrt(len(results))
                          if len(results) > 1 else np.zeros(ends.shape[1])),
        "end_demand_total": float(ends.sum(axis=1).mean()),
    }
    if baseline is not None:
        if len(baseline) != len(results):
            raise ConfigError(f"replication counts differ: {len(results)} vs {len(baseline)}")
        base = summarize(baseline)
        out["improvement_services"] = relative_improvement(mean, base["avg_daily_services"])
        out["improvement_end_demand"] = relative_improvement(out["end_demand_total"],
                                                             base["end_demand_total"])
    return out


TRAJECTORY_COLUMNS = ["replication", "block", "region", "expected_demand", "requested",
                      "accepted", "service_level"]
DAILY_COLUMNS = ["replication", "day", "region", "requested", "accepted"]


def trajectory_rows(result: HorizonResult, replication: int, update_every: int):
    """Block n (1-based) carries the demand in force during it and its counts;
    the extra final block carries only the end-of-horizon demand."""
    n_blocks, I = result.service_levels.shape
    for b in range(n_blocks):
        sl = slice(b * update_every, (b + 1) * update_every)
        req = result.daily_requested[sl].sum(axis=0)
        acc = result.daily_accepted[sl].sum(axis=0)
        for i in range(I):
            yield [replication, b + 1, i + 1, repr(float(result.trajectory[b, i])), int(req[i]),
                   int(acc[i]), repr(float(result.service_levels[b, i]))]
    for i in range(I):
        yield [replication, n_blocks + 1, i + 1, repr(float(result.trajectory[-1, i])), "", "", ""]


def daily_rows(result: HorizonResult, replication: int):
    days, I = result.daily_requested.shape
    for d in range(days):
        for i in range(I):
            yield [replication, d + 1, i + 1, int(result.daily_requested[d, i]),
                   int(result.daily_accepted[d, i])]


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
