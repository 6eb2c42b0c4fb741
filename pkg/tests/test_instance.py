import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sddshaping.instance import (ConfigError, Fleet, Geography, Region, SpatialLaw,
                                 builtin_geography, sample_day, scale_geography, travel_time)

coord = st.floats(-50, 50, allow_nan=False)


def test_travel_time_identity_and_345():
    geo = builtin_geography("a")
    assert travel_time(geo, (1.0, 2.0), (1.0, 2.0)) == 0.0
    flat = Geography("t", geo.regions, (0, 0), circuity_factor=1.0, speed_kmh=30.0)
    assert travel_time(flat, (0, 0), (3, 4)) == pytest.approx(10.0, abs=1e-12)


@given(coord, coord, coord, coord)
def test_travel_time_matches_independent_formula(x0, y0, x1, y1):
    geo = builtin_geography("b")
    # independent oracle: km -> hours at 30 km/h, times circuity, -> minutes
    km = math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2) * 1.4
    assert abs(travel_time(geo, (x0, y0), (x1, y1)) - km / 30.0 * 60.0) <= 1e-9


def test_builtin_geographies():
    assert builtin_geography("a").initial_demands.tolist() == [200, 50]
    assert builtin_geography("b").initial_demands.tolist() == [125, 125]
    assert builtin_geography("c").initial_demands.tolist() == [50, 100, 25, 75]
    with pytest.raises(ConfigError):
        builtin_geography("d")


def test_zero_demand_gives_empty_day():
    geo = builtin_geography("a")
    day = sample_day(geo, (0, 0), np.random.default_rng(1))
    assert len(day) == 0


def test_monte_carlo_counts():
    geo = builtin_geography("a")
    rng = np.random.default_rng(7)
    counts = np.array([sample_day(geo, (200, 50), rng).counts_by_region(2) for _ in range(10_000)])
    mean = counts.mean(axis=0)
    assert np.all(np.abs(mean - [200, 50]) <= 0.01 * np.array([200, 50]))
    ratio = counts.var(axis=0, ddof=1) / mean
    assert np.all(np.abs(ratio - 1) < 0.1)


def test_region2_shift():
    geo = builtin_geography("a")
    xs, _ = geo.regions[1].sample_locations(np.random.default_rng(3), 1_000_000)
    assert abs(xs.mean() - 10.0) <= 0.1


def test_day_structure():
    geo = builtin_geography("c")
    fleet = Fleet()
    day = sample_day(geo, geo.initial_demands, np.random.default_rng(11), fleet)
    times = [c.request_time for c in day.customers]
    assert times == sorted(times) and len(set(times)) == len(times)
    assert [c.id for c in day.customers] == list(range(len(day)))
    for c in day.customers:
        assert 0 <= c.request_time <= fleet.request_window
        assert c.deadline == pytest.approx(c.request_time + fleet.deadline)
        x0, x1, y0, y1 = geo.regions[c.region_id].bounding_box()
        assert x0 <= c.x <= x1 and y0 <= c.y <= y1


def test_sampling_is_deterministic():
    geo = builtin_geography("a")
    a = sample_day(geo, (20, 5), np.random.default_rng(5))
    b = sample_day(geo, (20, 5), np.random.default_rng(5))
    assert a == b


def test_scale_geography():
    geo = scale_geography(builtin_geography("a"), 10)
    assert geo.initial_demands.tolist() == [20, 5]
    assert geo.demand_caps.tolist() == [25, 25]
    with pytest.raises(ConfigError):
        scale_geography(geo, 0.5)


@pytest.mark.parametrize("kwargs", [dict(n_vehicles=0), dict(deadline=0), dict(load_time=-1),
                                    dict(shift_end=400), dict(departure="noon")])
def test_fleet_validation(kwargs):
    with pytest.raises(ConfigError):
        Fleet(**kwargs)


def test_region_and_law_validation():
    with pytest.raises(ConfigError):
        SpatialLaw("normal", 0, 0)
    with pytest.raises(ConfigError):
        SpatialLaw("uniform", 2, 1)
    with pytest.raises(ConfigError):
        Region(0, SpatialLaw("uniform", 0, 1), -1, 10)
    with pytest.raises(ConfigError):
        sample_day(builtin_geography("a"), (1,), np.random.default_rng(0))
    with pytest.raises(ConfigError):
        sample_day(builtin_geography("a"), (1, -1), np.random.default_rng(0))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 40), st.floats(0, 40), st.integers(0, 2**31))
def test_counts_match_customers(d1, d2, seed):
    geo = builtin_geography("b")
    day = sample_day(geo, (d1, d2), np.random.default_rng(seed))
    assert day.counts_by_region(2).sum() == len(day)
    if d1 == 0:
        assert day.counts_by_region(2)[0] == 0
