"""Intra-day decision process: one request per decision point, accept-to-vehicle or reject."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .instance import Customer, DayScenario, Fleet, Geography, travel_time
from .routing import (EPS, InsertionResult, VehiclePlan, advance_plan, apply_insertion,
                      cheapest_insertion)

REJECT = 0


class SimulationFault(RuntimeError):
    """A policy or the simulator broke the day's contract."""


@dataclass(frozen=True)
class IntraDayState:
    now: float
    pending_customer: Customer
    plans: tuple[VehiclePlan, ...]
    insertions: tuple[InsertionResult, ...]
    region_expected: np.ndarray
    region_requested_today: np.ndarray
    region_accepted_today: np.ndarray

    @property
    def feasible(self) -> tuple[int, ...]:
        """Reject plus every vehicle (1-based) that can take the request."""
        return (REJECT,) + tuple(p + 1 for p, ins in enumerate(self.insertions) if ins.feasible)


@dataclass
class DayResult:
    requested: np.ndarray
    accepted: np.ndarray
    accepted_customers: list[Customer] = field(default_factory=list)
    delivered: dict[int, float] = field(default_factory=dict)   # customer id -> arrival
    decisions: list[tuple[float, int, int, float]] = field(default_factory=list)
    final_returns: list[float] = field(default_factory=list)

    @property
    def total_services(self) -> int:
        return int(self.accepted.sum())

    @classmethod
    def empty(cls, n_regions: int) -> "DayResult":
        return cls(np.zeros(n_regions, dtype=int), np.zeros(n_regions, dtype=int))


def service_level(requested, accepted, empty_value: float = 1.0) -> np.ndarray:
    """Per-region accepted/requested over a window.

    Inputs are per-region counts, or a (days, regions) array that is summed
    over days first. Regions without requests get ``empty_value``.
    """
    req = np.asarray(requested, dtype=float)
    acc = np.asarray(accepted, dtype=float)
    if req.ndim == 2:
        req, acc = req.sum(axis=0), acc.sum(axis=0)
    if np.any(acc > req):
        raise ValueError("accepted exceeds requested")
    out = np.full(req.shape, float(empty_value))
    mask = req > 0
    out[mask] = acc[mask] / req[mask]
    return out


class DaySimulation:
    """Step-wise simulator for one day; used by ``run_day`` and by training."""

    def __init__(self, geo: Geography, fleet: Fleet, scenario: DayScenario, region_expected):
        self.geo = geo
        self.fleet = fleet
        self.customers = scenario.customers
        self.region_expected = np.asarray(region_expected, dtype=float)
        self.plans = [VehiclePlan(p) for p in range(fleet.n_vehicles)]
        n = geo.n_regions
        self.requested = np.zeros(n, dtype=int)
        self.accepted = np.zeros(n, dtype=int)
        self.result = DayResult.empty(n)
        self.k = 0
        self._state: IntraDayState | None = None
        self._last_return = [0.0] * fleet.n_vehicles

    def _advance(self, to_time: float) -> None:
        for p, plan in enumerate(self.plans):
            if plan.current_trip is not None or plan.pending_trips:
                self._last_return[p] = plan.return_time
            self.plans[p] = advance_plan(plan, to_time, self.geo, self.fleet)

    def observe(self) -> IntraDayState | None:
        """State at the next decision point, or None once the request window is exhausted."""
        if self._state is not None:
            return self._state
        if self.k >= len(self.customers):
            return None
        c = self.customers[self.k]
        now = c.request_time
        self._advance(now)
        insertions = tuple(cheapest_insertion(p, c, now, self.geo, self.fleet) for p in self.plans)
        self._state = IntraDayState(now, c, tuple(self.plans), insertions, self.region_expected,
                                    self.requested.copy(), self.accepted.copy())
        return self._state

    def step(self, choice: int) -> float:
        """Apply ``choice`` at the current decision point; returns the reward (0 or 1)."""
        state = self.observe()
        if state is None:
            raise SimulationFault("no pending decision point")
        if choice not in state.feasible:
            raise SimulationFault(f"choice {choice} not feasible at t={state.now:.3f} "
                                  f"(feasible: {state.feasible})")
        c = state.pending_customer
        self.requested[c.region_id] += 1
        delta = 0.0
        if choice != REJECT:
            ins = state.insertions[choice - 1]
            self.plans[choice - 1] = apply_insertion(self.plans[choice - 1], c, ins, self.geo,
                                                     self.fleet)
            self.accepted[c.region_id] += 1
            self.result.accepted_customers.append(c)
            delta = ins.delta_time
        self.result.decisions.append((state.now, c.region_id, choice, delta))
        self.k += 1
        self._state = None
        return 0.0 if choice == REJECT else 1.0

    def finish(self) -> DayResult:
        """Run every vehicle to the end of the shift and audit deliveries."""
        if self.k < len(self.customers):
            raise SimulationFault("day finished with undecided requests")
        end = self.fleet.shift_end
        self._advance(end)
        res = self.result
        res.requested = self.requested.copy()
        res.accepted = self.accepted.copy()
        res.final_returns = list(self._last_return)
        if max(res.final_returns) > end + EPS:
            raise SimulationFault(f"a vehicle returns at {max(res.final_returns):.3f} after shift end")
        for plan in self.plans:
            if plan.current_trip is not None or plan.pending_trips:
                raise SimulationFault(f"vehicle {plan.vehicle_id} still has work at shift end")
            for d in plan.delivered:
                if d.arrival_time > d.customer.deadline + EPS:
                    raise SimulationFault(f"customer {d.customer.id} delivered late")
                res.delivered[d.customer.id] = d.arrival_time
        if set(res.delivered) != {c.id for c in res.accepted_customers}:
            raise SimulationFault("accepted and delivered customers differ")
        return res


def run_day(geo: Geography, scenario: DayScenario, policy, region_expected,
            fleet: Fleet = Fleet()) -> DayResult:
    sim = DaySimulation(geo, fleet, scenario, region_expected)
    while (state := sim.observe()) is not None:
        sim.step(policy.decide(state, state.feasible))
    return sim.finish()


def write_event_log(result: DayResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "region", "choice", "delta"])
        for t, region, choice, delta in result.decisions:
            w.writerow([repr(t), region, choice, repr(delta)])


class FeatureEncoder:
    """Min-max normalised state features with bounds fixed up front.

    Layout: time | region one-hot | warehouse proxy distance | per-vehicle
    return time | per-vehicle feasibility | per-vehicle insertion delta |
    per-region expected demand | per-region service level today.
    """

    def __init__(self, geo: Geography, fleet: Fleet, demand_norm: float | None = None):
        self.geo = geo
        self.fleet = fleet
        self.n_regions = geo.n_regions
        self.n_vehicles = fleet.n_vehicles
        self.max_proxy = geo.max_proxy_distance()
        self.max_delta = 2.0 * self.max_proxy
        if demand_norm is None:
            demand_norm = 2.0 * float(geo.initial_demands.max())
        self.demand_norm = max(float(demand_norm), 1e-9)

    @property
    def size(self) -> int:
        return 2 + 3 * self.n_vehicles + 3 * self.n_regions

    def encode(self, state: IntraDayState) -> np.ndarray:
        I, P = self.n_regions, self.n_vehicles
        f = np.zeros(self.size)
        f[0] = state.now / self.fleet.request_window
        c = state.pending_customer
        f[1 + c.region_id] = 1.0
        f[1 + I] = travel_time(self.geo, self.geo.warehouse, c.location) / self.max_proxy
        o = 2 + I
        for p, (plan, ins) in enumerate(zip(state.plans, state.insertions)):
            f[o + p] = max(state.now, plan.return_time) / self.fleet.shift_end
            if ins.feasible:
                f[o + P + p] = 1.0
                f[o + 2 * P + p] = min(ins.delta_time / self.max_delta, 1.0)
            else:
                f[o + 2 * P + p] = 1.0
        o += 3 * P
        f[o:o + I] = state.region_expected / self.demand_norm
        f[o + I:o + 2 * I] = service_level(state.region_requested_today,
                                           state.region_accepted_today)
        return np.clip(f, 0.0, 1.0)


def extract_features(state: IntraDayState, geo: Geography, fleet: Fleet = Fleet(),
                     demand_norm: float | None = None) -> np.ndarray:
    return FeatureEncoder(geo, fleet, demand_norm).encode(state)
