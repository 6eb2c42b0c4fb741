import csv

import numpy as np
import pytest

from sddshaping.instance import (Customer, DayScenario, Fleet, builtin_geography, sample_day,
                                 scale_geography)
from sddshaping.intraday import (REJECT, DaySimulation, FeatureEncoder, SimulationFault,
                                 extract_features, run_day, service_level, write_event_log)
from sddshaping.policies import MyopicPolicy, RejectAllPolicy
from sddshaping.routing import VehiclePlan, advance_plan, apply_insertion, cheapest_insertion

DESK = scale_geography(builtin_geography("a"), 10)
ONE = Fleet(n_vehicles=1)


class RandomPolicy:
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)

    def decide(self, state, feasible):
        return feasible[int(self.rng.integers(len(feasible)))]


def test_empty_day():
    res = run_day(DESK, DayScenario(()), MyopicPolicy(), (20, 5), ONE)
    assert res.requested.tolist() == [0, 0] and res.accepted.tolist() == [0, 0]
    assert res.total_services == 0 and res.decisions == []


def test_single_customer_served():
    c = Customer(0, 0, 6.0, 5.0, 30.0, 270.0)
    res = run_day(DESK, DayScenario((c,)), MyopicPolicy(), (20, 5), ONE)
    assert res.total_services == 1 and 0 in res.delivered
    assert res.delivered[0] <= c.deadline
    # latest-departure rule: the lone trip leaves as late as the deadline allows
    leg = 1.4 * 2 * 1.5
    assert res.delivered[0] == pytest.approx(c.deadline, abs=1e-9)
    assert res.final_returns == [pytest.approx(c.deadline + 3.0 + leg, abs=1e-9)]


def test_infeasible_choice_is_a_fault():
    c = Customer(0, 0, 6.0, 5.0, 30.0, 270.0)
    sim = DaySimulation(DESK, ONE, DayScenario((c,)), (20, 5))
    with pytest.raises(SimulationFault):
        sim.step(2)  # only vehicle 1 exists

    far = Customer(0, 0, 60.0, 5.0, 30.0, 40.0)
    sim = DaySimulation(DESK, ONE, DayScenario((far,)), (20, 5))
    assert sim.observe().feasible == (REJECT,)
    with pytest.raises(SimulationFault):
        sim.step(1)


def test_finish_with_open_requests_is_a_fault():
    c = Customer(0, 0, 6.0, 5.0, 30.0, 270.0)
    with pytest.raises(SimulationFault):
        DaySimulation(DESK, ONE, DayScenario((c,)), (20, 5)).finish()


def test_decision_log_replay():
    """Myopic days replayed by a straight loop over routing primitives give the same acceptances."""
    rng = np.random.default_rng(500)
    for _ in range(500):
        scenario = sample_day(DESK, (20, 5), rng, ONE)
        res = run_day(DESK, scenario, MyopicPolicy(), (20, 5), ONE)
        plans = [VehiclePlan(p) for p in range(ONE.n_vehicles)]
        replay = []
        for c, (t, region, choice, delta) in zip(scenario.customers, res.decisions):
            assert t == c.request_time and region == c.region_id
            plans = [advance_plan(p, c.request_time, DESK, ONE) for p in plans]
            ins = [cheapest_insertion(p, c, c.request_time, DESK, ONE) for p in plans]
            ok = [i for i, r in enumerate(ins) if r.feasible]
            if not ok:
                assert choice == REJECT
                continue
            best = min(ok, key=lambda i: (ins[i].delta_time, i))
            assert choice == best + 1 and delta == ins[best].delta_time
            plans[best] = apply_insertion(plans[best], c, ins[best], DESK, ONE)
            replay.append(c.id)
        assert replay == [c.id for c in res.accepted_customers]
        assert set(replay) == set(res.delivered)


def test_service_level_basics():
    assert service_level([5, 3], [5, 3]).tolist() == [1.0, 1.0]
    assert service_level([5, 3], [0, 0]).tolist() == [0.0, 0.0]
    assert service_level([0, 4], [0, 1]).tolist() == [1.0, 0.25]
    assert service_level([0, 4], [0, 1], empty_value=0.0).tolist() == [0.0, 0.25]
    with pytest.raises(ValueError):
        service_level([1], [2])


def test_service_level_recount_from_log():
    rng = np.random.default_rng(30)
    policy = RandomPolicy(1)
    req, acc = [], []
    tally_req = np.zeros(2)
    tally_acc = np.zeros(2)
    for _ in range(30):
        res = run_day(DESK, sample_day(DESK, (20, 5), rng, ONE), policy, (20, 5), ONE)
        req.append(res.requested)
        acc.append(res.accepted)
        for _, region, choice, _ in res.decisions:
            tally_req[region] += 1
            tally_acc[region] += choice != REJECT
    got = service_level(np.array(req), np.array(acc))
    assert np.all(np.abs(got - tally_acc / tally_req) <= 1e-12)


def test_event_log_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    res = run_day(DESK, sample_day(DESK, (20, 5), rng, ONE), MyopicPolicy(), (20, 5), ONE)
    path = tmp_path / "log.csv"
    write_event_log(res, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert [(float(r["time"]), int(r["region"]), int(r["choice"]), float(r["delta"]))
            for r in rows] == res.decisions


def test_feature_layout_and_sentinels():
    fleet = Fleet(n_vehicles=2)
    enc = FeatureEncoder(DESK, fleet)
    assert enc.size == 2 + 3 * 2 + 3 * 2
    c0 = Customer(0, 1, 10.0, 5.0, 0.0, 240.0)
    far = Customer(1, 0, 60.0, 5.0, 1.0, 10.0)
    sim = DaySimulation(DESK, fleet, DayScenario((c0, far)), (20, 5))
    f = enc.encode(sim.observe())
    assert f[0] == 0.0
    assert f[1:3].tolist() == [0.0, 1.0]
    sim.step(1)
    state = sim.observe()
    f = extract_features(state, DESK, fleet)
    P, I = 2, 2
    o = 2 + I
    assert f[o + P:o + 2 * P].tolist() == [0.0, 0.0]       # nobody can reach it
    assert f[o + 2 * P:o + 3 * P].tolist() == [1.0, 1.0]   # infeasible delta sentinel
    assert f[o + 3 * P + I] == 1.0                         # region 2 served 1 of 1


def test_feature_fuzz():
    """About 1e5 states from random-policy days on all geographies stay inside [0, 1]."""
    rng = np.random.default_rng(12)
    n = 0
    geos = [scale_geography(builtin_geography(g), 2) for g in "abc"]
    while n < 100_000:
        geo = geos[n % 3]
        fleet = Fleet(n_vehicles=int(rng.integers(1, 4)))
        demands = geo.initial_demands * rng.uniform(0.2, 3.0, geo.n_regions)
        enc = FeatureEncoder(geo, fleet)
        sim = DaySimulation(geo, fleet, sample_day(geo, demands, rng, fleet), demands)
        policy = RandomPolicy(n)
        while (state := sim.observe()) is not None:
            f = enc.encode(state)
            assert f.shape == (enc.size,)
            assert np.all((f >= 0) & (f <= 1))
            n += 1
            sim.step(policy.decide(state, state.feasible))
        sim.finish()


def test_reject_all_day():
    rng = np.random.default_rng(0)
    scenario = sample_day(DESK, (20, 5), rng, ONE)
    res = run_day(DESK, scenario, RejectAllPolicy(), (20, 5), ONE)
    assert res.total_services == 0 and res.requested.sum() == len(scenario)
