"""Benchmark acceptance policies and their common interface.

Every policy exposes ``name``, ``requires_training`` and
``decide(state, feasible) -> int`` where 0 rejects and p assigns to vehicle p.
"""

from __future__ import annotations

import numpy as np

from .dqn import GreedyQPolicy, QNetwork, forward
from .instance import ConfigError
from .intraday import REJECT, FeatureEncoder, IntraDayState

DEMAND_FLOOR = 1e-6


def myopic_decide(state: IntraDayState, feasible) -> int:
    """Accept whenever possible, on the vehicle with the smallest insertion delta."""
    best, best_delta = REJECT, np.inf
    for choice in sorted(feasible):
        if choice == REJECT:
            continue
        delta = state.insertions[choice - 1].delta_time
        if delta < best_delta:
            best, best_delta = choice, delta
    return best


def bucket_cap(expected_demands) -> float:
    d = np.asarray(expected_demands, dtype=float)
    return float(d.sum() / d.size)


def bucket_decide(state: IntraDayState, feasible, expected_demands=None) -> int:
    """Myopic, except a request that would push its region past the mean regional demand is rejected."""
    demands = state.region_expected if expected_demands is None else expected_demands
    region = state.pending_customer.region_id
    if state.region_accepted_today[region] + 1 > bucket_cap(demands):
        return REJECT
    return myopic_decide(state, feasible)


def rrl_reward(region: int, initial_demands) -> float:
    d = np.asarray(initial_demands, dtype=float)
    if d[region] <= 0:
        raise ConfigError(f"region {region} has no initial demand; reward undefined")
    return float(d.max() / d[region])


def rrl_reward_rule(initial_demands):
    weights = [rrl_reward(i, initial_demands) for i in range(len(initial_demands))]
    return lambda region: weights[region]


def demand_weights(current_demands) -> np.ndarray:
    d = np.maximum(np.asarray(current_demands, dtype=float), DEMAND_FLOOR)
    return d.max() / d


def mrl_scores(q_values, region: int, current_demands) -> np.ndarray:
    """Acceptance Q-values shifted by (w_region - 1); the reject value is left as is."""
    scores = np.array(q_values, dtype=float)
    scores[1:] += demand_weights(current_demands)[region] - 1.0
    return scores


def mrl_decide(state: IntraDayState, feasible, q_values, current_demands=None) -> int:
    demands = state.region_expected if current_demands is None else current_demands
    scores = mrl_scores(q_values, state.pending_customer.region_id, demands)
    best, best_s = None, -np.inf
    for choice in sorted(feasible):
        if best is None or scores[choice] > best_s:
            best, best_s = choice, scores[choice]
    return best


class MyopicPolicy:
    name = "myopic"
    requires_training = False

    def decide(self, state, feasible):
        return myopic_decide(state, feasible)


class BucketPolicy:
    """Cap uses ``state.region_expected``, i.e. the current block's expected demands."""

    name = "bucket"
    requires_training = False

    def decide(self, state, feasible):
        return bucket_decide(state, feasible)


class RejectAllPolicy:
    name = "reject"
    requires_training = False

    def decide(self, state, feasible):
        return REJECT


class MRLPolicy:
    """Intra-day network with deployment-time demand weights on acceptance."""

    name = "mrl"
    requires_training = True

    def __init__(self, net: QNetwork, encoder: FeatureEncoder):
        self.net = net
        self.encoder = encoder

    def decide(self, state, feasible):
        q = forward(self.net, self.encoder.encode(state))
        return mrl_decide(state, feasible, q)


LEARNED = ("intraday", "rrl", "mrl", "irl-e", "irl-p")
POLICY_NAMES = ("myopic", "bucket") + LEARNED


def make_policy(name: str, net: QNetwork | None = None, encoder: FeatureEncoder | None = None):
    if name == "myopic":
        return MyopicPolicy()
    if name == "bucket":
        return BucketPolicy()
    if name == "reject":
        return RejectAllPolicy()
    if name not in LEARNED:
        raise ConfigError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
    if net is None or encoder is None:
        raise ConfigError(f"policy {name!r} needs a trained network")
    if name == "mrl":
        return MRLPolicy(net, encoder)
    return GreedyQPolicy(net, encoder, name)
