import numpy as np
import pytest

from sddshaping.dqn import GreedyQPolicy, QNetwork, forward
from sddshaping.instance import ConfigError, Customer, Fleet, builtin_geography, sample_day
from sddshaping.intraday import REJECT, FeatureEncoder, IntraDayState, run_day
from sddshaping.policies import (BucketPolicy, MRLPolicy, bucket_cap, bucket_decide,
                                 demand_weights, make_policy, mrl_decide, myopic_decide,
                                 rrl_reward, rrl_reward_rule)
from sddshaping.routing import InsertionResult, VehiclePlan

C = Customer(0, 1, 9.0, 5.0, 100.0, 340.0)


def state(deltas, region_expected=(200.0, 50.0), accepted=(0, 0), customer=C):
    ins = tuple(InsertionResult(True, d) if d is not None else InsertionResult(False)
                for d in deltas)
    plans = tuple(VehiclePlan(p) for p in range(len(deltas)))
    return IntraDayState(customer.request_time, customer, plans, ins,
                         np.array(region_expected, dtype=float),
                         np.array(accepted, dtype=int), np.array(accepted, dtype=int))


def test_myopic():
    assert myopic_decide(state([None, None]), (REJECT,)) == REJECT
    assert myopic_decide(state([None, 4.0]), (0, 2)) == 2
    s = state([7.2, 3.1, 3.1])
    assert myopic_decide(s, s.feasible) == 2


def test_bucket():
    assert bucket_cap((200, 50)) == 125
    s = state([1.0], accepted=(0, 125))
    assert bucket_decide(s, s.feasible) == REJECT
    s = state([1.0], accepted=(0, 124))
    assert bucket_decide(s, s.feasible) == 1
    assert bucket_decide(s, s.feasible, expected_demands=(150, 150)) == 1
    assert bucket_decide(s, s.feasible, expected_demands=(200, 48)) == REJECT


def test_bucket_caps_hold_over_full_days():
    geo = builtin_geography("a")
    fleet = Fleet()
    rng = np.random.default_rng(8)
    for demands in ((200, 50), (300, 20), (60, 220)):
        res = run_day(geo, sample_day(geo, demands, rng, fleet), BucketPolicy(), demands, fleet)
        assert np.all(res.accepted <= bucket_cap(demands))


def test_rrl_rewards():
    assert [rrl_reward(i, (200, 50)) for i in range(2)] == [1.0, 4.0]
    assert [rrl_reward(i, (125, 125)) for i in range(2)] == [1.0, 1.0]
    got = [rrl_reward(i, (50, 100, 25, 75)) for i in range(4)]
    assert got == pytest.approx([2.0, 1.0, 4.0, 4 / 3], rel=1e-15)
    assert rrl_reward_rule((200, 50))(1) == 4.0
    with pytest.raises(ConfigError):
        rrl_reward(1, (10, 0))


def _net_and_encoder(seed):
    geo = builtin_geography("a")
    fleet = Fleet(n_vehicles=3)
    enc = FeatureEncoder(geo, fleet)
    return QNetwork.init(enc.size, 4, (8,), np.random.default_rng(seed)), enc


def test_mrl_equal_demands_is_plain_argmax():
    rng = np.random.default_rng(9)
    for _ in range(200):
        q = rng.normal(size=4)
        s = state([1.0, None, 2.0], region_expected=(80.0, 80.0))
        feasible = s.feasible
        best = max(feasible, key=lambda c: (q[c], -c))
        assert mrl_decide(s, feasible, q) == best


def test_mrl_floor_makes_acceptance_dominant():
    s = state([1.0, 2.0, None], region_expected=(200.0, 0.0))
    assert demand_weights((200.0, 0.0))[1] == pytest.approx(2e8)
    assert mrl_decide(s, s.feasible, np.array([1e6, -5.0, -3.0, 0.0])) == 2


def test_mrl_recompute_oracle():
    rng = np.random.default_rng(10)
    for _ in range(500):
        d = rng.uniform(1, 100, 2)
        q = rng.normal(size=4)
        region = int(rng.integers(2))
        cust = Customer(0, region, 5.0, 5.0, 0.0, 240.0)
        deltas = [float(x) if rng.random() < 0.7 else None for x in rng.uniform(0, 9, 3)]
        s = state(deltas, region_expected=d, customer=cust)
        w = max(d) / d[region]
        scores = {c: q[c] + (w - 1 if c else 0.0) for c in s.feasible}
        top = max(scores.values())
        assert mrl_decide(s, s.feasible, q) == min(c for c in s.feasible if scores[c] == top)


def test_make_policy():
    net, enc = _net_and_encoder(0)
    assert make_policy("myopic").name == "myopic"
    assert make_policy("reject").name == "reject"
    assert isinstance(make_policy("mrl", net, enc), MRLPolicy)
    p = make_policy("irl-p", net, enc)
    assert isinstance(p, GreedyQPolicy) and p.name == "irl-p"
    with pytest.raises(ConfigError):
        make_policy("intraday")
    with pytest.raises(ConfigError):
        make_policy("oracle")


def test_policies_choose_feasibly_on_real_days():
    geo = builtin_geography("a")
    fleet = Fleet(n_vehicles=3)
    net, enc = _net_and_encoder(1)
    rng = np.random.default_rng(11)
    for name in ("myopic", "bucket", "intraday", "mrl"):
        policy = make_policy(name, net, enc)
        res = run_day(geo, sample_day(geo, (60, 20), rng, fleet), policy, (60, 20), fleet)
        assert res.requested.sum() == len(res.decisions)
