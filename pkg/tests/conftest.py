import numpy as np
import pytest

from sddshaping.instance import Customer, Fleet, builtin_geography, scale_geography
from sddshaping.routing import VehiclePlan, advance_plan, apply_insertion, cheapest_insertion


@pytest.fixture
def desk_geo():
    return scale_geography(builtin_geography("a"), 10)


def random_customer(rng, geo, cid, now, fleet=Fleet(), gap=60.0):
    region = geo.regions[int(rng.integers(geo.n_regions))]
    xs, ys = region.sample_locations(rng, 1)
    t = now + float(rng.uniform(0, gap))
    return Customer(cid, region.id, float(xs[0]), float(ys[0]), t, t + fleet.deadline)


def random_plan(rng, geo, fleet, max_stops=6, horizon=None):
    """Grow a plan by cheapest insertions of random customers; returns (plan, now)."""
    plan = VehiclePlan(0)
    now = float(rng.uniform(0, horizon or fleet.request_window * 0.4))
    target = int(rng.integers(0, max_stops + 1))
    cid = 0
    tries = 0
    while sum(len(t.stops) for t in plan.pending_trips) < target and tries < 50:
        tries += 1
        c = random_customer(rng, geo, cid, now, fleet)
        now = c.request_time
        plan = advance_plan(plan, now, geo, fleet)
        res = cheapest_insertion(plan, c, now, geo, fleet)
        if res.feasible:
            plan = apply_insertion(plan, c, res, geo, fleet)
            cid += 1
    return plan, now, cid
