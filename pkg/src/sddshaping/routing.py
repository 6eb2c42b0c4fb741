"""Multi-trip vehicle plans and the cheapest-insertion heuristic.

A vehicle runs a sequence of warehouse-to-warehouse trips. The trip it is
currently driving is locked; all later trips stay open for insertions and
leave the warehouse at their latest feasible departure time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .instance import Customer, Fleet, Geography

EPS = 1e-9
INFEASIBLE = math.inf


class ContractViolation(RuntimeError):
    """Raised when a caller breaks a routing precondition."""


@dataclass(frozen=True)
class Trip:
    stops: tuple[Customer, ...]
    departure_time: float
    duration: float      # loading + legs + service + return leg
    travel: float        # legs only, including the return leg
    slack: float         # latest departure meeting every stop deadline
    locked: bool = False

    @property
    def return_time(self) -> float:
        return self.departure_time + self.duration

    def arrival_times(self, geo: Geography, fleet: Fleet) -> list[float]:
        return [self.departure_time + off for off in _offsets(self.stops, geo, fleet)]


@dataclass(frozen=True)
class Delivery:
    customer: Customer
    arrival_time: float


@dataclass(frozen=True)
class VehiclePlan:
    vehicle_id: int
    current_trip: Trip | None = None
    pending_trips: tuple[Trip, ...] = ()
    delivered: tuple[Delivery, ...] = ()

    @property
    def return_time(self) -> float:
        """When the vehicle is back at the warehouse after its last planned trip."""
        if self.pending_trips:
            return self.pending_trips[-1].return_time
        if self.current_trip is not None:
            return self.current_trip.return_time
        return 0.0

    def open_customers(self) -> list[Customer]:
        out = []
        if self.current_trip is not None:
            out.extend(self.current_trip.stops)
        for trip in self.pending_trips:
            out.extend(trip.stops)
        return out

    def n_stops(self) -> int:
        return len(self.open_customers()) + len(self.delivered)

    def travel_time(self) -> float:
        """Total travel of the trips not yet completed."""
        total = sum(t.travel for t in self.pending_trips)
        if self.current_trip is not None:
            total += self.current_trip.travel
        return total


@dataclass(frozen=True)
class InsertionResult:
    feasible: bool
    delta_time: float = INFEASIBLE
    trip_index: int = -1
    stop_index: int = -1
    new_trip: bool = False

    @property
    def position(self):
        return "new trip" if self.new_trip else (self.trip_index, self.stop_index)


def _leg(geo: Geography, a, b) -> float:
    return geo.minutes_per_km * math.hypot(a[0] - b[0], a[1] - b[1])


def _offsets(stops, geo: Geography, fleet: Fleet) -> list[float]:
    """Arrival time at each stop relative to the trip's departure."""
    t = fleet.load_time
    here = geo.warehouse
    out = []
    for c in stops:
        t += _leg(geo, here, (c.x, c.y))
        out.append(t)
        t += fleet.service_time
        here = (c.x, c.y)
    return out


def _profile(stops, geo: Geography, fleet: Fleet) -> tuple[float, float, float]:
    """(duration, travel, slack) of a trip visiting ``stops`` in order."""
    here = geo.warehouse
    travel = 0.0
    t = fleet.load_time
    slack = math.inf
    for c in stops:
        leg = _leg(geo, here, (c.x, c.y))
        travel += leg
        t += leg
        slack = min(slack, c.deadline - t)
        t += fleet.service_time
        here = (c.x, c.y)
    back = _leg(geo, here, geo.warehouse)
    return t + back, travel + back, slack


def make_trip(stops, geo: Geography, fleet: Fleet, departure_time: float = 0.0,
              locked: bool = False) -> Trip:
    duration, travel, slack = _profile(stops, geo, fleet)
    return Trip(tuple(stops), departure_time, duration, travel, slack, locked)


def _earliest_start(plan: VehiclePlan, now: float) -> float:
    if plan.current_trip is not None:
        return max(now, plan.current_trip.return_time)
    return now


def _forward_feasible(start: float, durations, slacks, shift_end: float) -> bool:
    t = start
    for dur, slack in zip(durations, slacks):
        if t > slack + EPS:
            return False
        t += dur
    return t <= shift_end + EPS


def latest_departures(durations, slacks, shift_end: float) -> list[float]:
    """Backward pass: the latest departure of each trip that keeps all later trips feasible."""
    out = [0.0] * len(durations)
    bound = shift_end
    for j in range(len(durations) - 1, -1, -1):
        dep = min(slacks[j], bound - durations[j])
        out[j] = dep
        bound = dep
    return out


def earliest_departures(start: float, durations) -> list[float]:
    out = []
    t = start
    for dur in durations:
        out.append(t)
        t += dur
    return out


def _reschedule(plan: VehiclePlan, trips, now: float, fleet: Fleet) -> tuple[Trip, ...]:
    durations = [t.duration for t in trips]
    if fleet.departure == "latest":
        deps = latest_departures(durations, [t.slack for t in trips], fleet.shift_end)
    else:
        deps = earliest_departures(_earliest_start(plan, now), durations)
    return tuple(replace(t, departure_time=d) for t, d in zip(trips, deps))


def cheapest_insertion(plan: VehiclePlan, c: Customer, now: float, geo: Geography,
                       fleet: Fleet) -> InsertionResult:
    """Best feasible position for ``c`` among the open trips or a new trailing trip.

    Ties go to the lowest (trip, stop) index; the new trip ranks last.
    """
    start = _earliest_start(plan, now)
    trips = plan.pending_trips
    durations = [t.duration for t in trips]
    slacks = [t.slack for t in trips]
    loc = (c.x, c.y)
    wh = geo.warehouse

    best = InsertionResult(False)
    for j, trip in enumerate(trips):
        stops = trip.stops
        for s in range(len(stops) + 1):
            prev = wh if s == 0 else (stops[s - 1].x, stops[s - 1].y)
            nxt = wh if s == len(stops) else (stops[s].x, stops[s].y)
            delta = _leg(geo, prev, loc) + _leg(geo, loc, nxt) - _leg(geo, prev, nxt)
            if delta >= best.delta_time:
                continue
            new_stops = stops[:s] + (c,) + stops[s:]
            dur, _, slack = _profile(new_stops, geo, fleet)
            durations[j], slacks[j] = dur, slack
            ok = _forward_feasible(start, durations, slacks, fleet.shift_end)
            durations[j], slacks[j] = trip.duration, trip.slack
            if ok:
                best = InsertionResult(True, max(delta, 0.0), j, s)

    delta = 2.0 * _leg(geo, wh, loc)
    if delta < best.delta_time:
        dur, _, slack = _profile((c,), geo, fleet)
        if _forward_feasible(start, durations + [dur], slacks + [slack], fleet.shift_end):
            best = InsertionResult(True, delta, len(trips), 0, new_trip=True)
    return best


def apply_insertion(plan: VehiclePlan, c: Customer, result: InsertionResult, geo: Geography,
                    fleet: Fleet, now: float | None = None) -> VehiclePlan:
    if not result.feasible:
        raise ContractViolation(f"cannot apply an infeasible insertion of customer {c.id}")
    trips = list(plan.pending_trips)
    if result.new_trip:
        trips.append(make_trip((c,), geo, fleet))
    else:
        old = trips[result.trip_index].stops
        s = result.stop_index
        trips[result.trip_index] = make_trip(old[:s] + (c,) + old[s:], geo, fleet)
    now = c.request_time if now is None else now
    return replace(plan, pending_trips=_reschedule(plan, trips, now, fleet))


def advance_plan(plan: VehiclePlan, to_time: float, geo: Geography, fleet: Fleet) -> VehiclePlan:
    """Move the plan forward to ``to_time``.

    Open trips whose latest departure has passed are locked, and trips that
    are back at the warehouse by ``to_time`` are retired into ``delivered``.
    """
    current = plan.current_trip
    pending = list(plan.pending_trips)
    delivered = list(plan.delivered)
    changed = False
    while True:
        if current is not None and current.return_time <= to_time + EPS:
            for cust, arr in zip(current.stops, current.arrival_times(geo, fleet)):
                delivered.append(Delivery(cust, arr))
            current = None
            changed = True
        elif current is None and pending and pending[0].departure_time <= to_time + EPS:
            current = replace(pending.pop(0), locked=True)
            changed = True
        else:
            break
    if not changed:
        return plan
    return replace(plan, current_trip=current, pending_trips=tuple(pending),
                   delivered=tuple(delivered))


def validate_plan(plan: VehiclePlan, geo: Geography, fleet: Fleet) -> list[str]:
    """Full recheck of trip timing, deadlines and the shift end. Empty list means valid."""
    problems = []
    trips = ([plan.current_trip] if plan.current_trip is not None else []) + list(plan.pending_trips)
    prev_return = -math.inf
    for trip in trips:
        duration, travel, _ = _profile(trip.stops, geo, fleet)
        if abs(duration - trip.duration) > 1e-6 or abs(travel - trip.travel) > 1e-6:
            problems.append(f"vehicle {plan.vehicle_id}: stale trip profile")
        if trip.departure_time < prev_return - EPS:
            problems.append(f"vehicle {plan.vehicle_id}: overlapping trips")
        for cust, arr in zip(trip.stops, trip.arrival_times(geo, fleet)):
            if arr > cust.deadline + EPS:
                problems.append(f"customer {cust.id} late by {arr - cust.deadline:.3f} min")
        prev_return = trip.return_time
    if prev_return > fleet.shift_end + EPS:
        problems.append(f"vehicle {plan.vehicle_id}: returns at {prev_return:.3f} after shift end")
    for d in plan.delivered:
        if d.arrival_time > d.customer.deadline + EPS:
            problems.append(f"customer {d.customer.id} delivered late")
    return problems
