"""Deep Q-learning over the reduced decision space {reject, vehicle 1..P}.

The network, its gradients and the optimiser are plain numpy so that
training is reproducible bit-for-bit from a seed.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .instance import DayScenario, Fleet, Geography, sample_day
from .intraday import REJECT, DaySimulation, FeatureEncoder, IntraDayState

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class QNetwork:
    """Feed-forward net: features -> hidden ReLU layers -> one Q-value per decision."""

    weights: list[np.ndarray]        # weights[l] has shape (fan_in, fan_out)
    biases: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, n_features: int, n_outputs: int, hidden=(50, 50), rng=None, meta=None):
        rng = np.random.default_rng(rng)
        sizes = [n_features, *hidden, n_outputs]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, fan_out))
        return cls(weights, biases, dict(meta or {}))

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "QNetwork":
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        dict(self.meta))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())


def forward(net: QNetwork, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != net.n_features:
        raise ValueError(f"expected {net.n_features} features, got {x.shape[-1]}")
    last = len(net.weights) - 1
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = x @ w + b
        if layer < last:
            x = np.maximum(x, 0.0)
    return x


def backward(net: QNetwork, states, actions, targets) -> tuple[list[np.ndarray], float]:
    """Gradient of mean((Q(s, a) - y)^2) w.r.t. [W0, b0, W1, b1, ...]; also returns the loss."""
    x = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=float)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    acts = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if layer < last else z
        acts.append(h)
    rows = np.arange(n)
    err = acts[-1][rows, actions] - targets
    loss = float(np.mean(err ** 2))
    grad_out = np.zeros_like(acts[-1])
    grad_out[rows, actions] = 2.0 * err / n

    grads = [None] * (2 * len(net.weights))
    g = grad_out
    for layer in range(last, -1, -1):
        grads[2 * layer] = acts[layer].T @ g
        grads[2 * layer + 1] = g.sum(axis=0)
        if layer > 0:
            g = (g @ net.weights[layer].T) * (pre[layer - 1] > 0)
    return grads, loss


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int, n_features: int, n_actions: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, n_features))
        self.actions = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, n_features))
        self.next_masks = np.zeros((capacity, n_actions), dtype=bool)
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._head = 0

    def __len__(self):
        return self.size

    def add(self, state, action, reward, next_state, next_mask, done):
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        if done:
            self.next_states[i] = 0.0
            self.next_masks[i] = False
        else:
            self.next_states[i] = next_state
            self.next_masks[i] = next_mask
        self.done[i] = done
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, rng: np.random.Generator, batch_size: int) -> np.ndarray:
        return rng.integers(0, self.size, batch_size)

    def sample(self, rng, batch_size):
        idx = self.sample_indices(rng, batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.next_masks[idx], self.done[idx])


@dataclass
class TrainSchedule:
    # Paper-silent defaults are engineering choices; see README.
    episodes: int = 5000
    eps_start: float = 1.0
    eps_end: float = 0.01
    learning_rate: float = 1e-3
    batch_size: int = 32
    gamma: float = 1.0
    target_sync: int = 1000
    replay_capacity: int = 10_000
    hidden: tuple[int, ...] = (50, 50)
    train_pool: int = 1500
    test_pool: int = 500
    max_loss: float = 1e6

    def epsilon(self, episode: int) -> float:
        """Exponential decay from eps_start at episode 0 to eps_end at ``episodes``."""
        if self.episodes <= 0:
            return self.eps_end
        frac = min(max(episode / self.episodes, 0.0), 1.0)
        return self.eps_start * (self.eps_end / self.eps_start) ** frac

    @classmethod
    def full_scale(cls) -> "TrainSchedule":
        return cls(episodes=200_000)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def greedy_decide(q_values, feasible) -> int:
    """Argmax of Q over the feasible decisions; ties go to the lowest index."""
    best, best_q = None, -math.inf
    for choice in sorted(feasible):
        q = q_values[choice]
        if best is None or q > best_q:
            best, best_q = choice, q
    if best is None:
        raise ValueError("empty feasible set")
    return best


def feasible_mask(feasible, n_actions: int) -> np.ndarray:
    mask = np.zeros(n_actions, dtype=bool)
    mask[list(feasible)] = True
    return mask


class GreedyQPolicy:
    """Acts greedily on a trained Q-network."""

    requires_training = True

    def __init__(self, net: QNetwork, encoder: FeatureEncoder, name: str = "intraday"):
        if encoder.size != net.n_features or net.n_outputs != encoder.n_vehicles + 1:
            raise ValueError("network shape does not match the feature encoder")
        self.net = net
        self.encoder = encoder
        self.name = name

    def q_values(self, state: IntraDayState) -> np.ndarray:
        return forward(self.net, self.encoder.encode(state))

    def decide(self, state: IntraDayState, feasible) -> int:
        return greedy_decide(self.q_values(state), feasible)


# A scenario source draws one training day: (scenario, expected demands shown to the agent).
ScenarioSource = Callable[[np.random.Generator], tuple[DayScenario, np.ndarray]]
RewardRule = Callable[[int], float]


def demand_scenarios(geo: Geography, fleet: Fleet, demand_sampler) -> ScenarioSource:
    """Source that draws expected demands with ``demand_sampler(rng)`` and then a day from them."""
    def source(rng):
        demands = np.asarray(demand_sampler(rng), dtype=float)
        return sample_day(geo, demands, rng, fleet), demands
    return source


def fixed_demands(demands) -> Callable[[np.random.Generator], np.ndarray]:
    arr = np.asarray(demands, dtype=float)
    return lambda rng: arr


def unit_reward(region: int) -> float:
    return 1.0


@dataclass
class TrainingReport:
    losses: list[float]
    episode_services: list[int]
    updates: int
    test_services: float | None = None


def train(geo: Geography, fleet: Fleet, scenario_source: ScenarioSource,
          schedule: TrainSchedule = TrainSchedule(), seed: int = 0,
          reward_rule: RewardRule = unit_reward, encoder: FeatureEncoder | None = None,
          name: str = "intraday") -> tuple[QNetwork, TrainingReport]:
    """Epsilon-greedy deep Q-learning with experience replay and a target network."""
    encoder = encoder or FeatureEncoder(geo, fleet)
    n_actions = fleet.n_vehicles + 1
    ss = np.random.SeedSequence(seed)
    init_ss, act_ss, pool_ss, test_ss = ss.spawn(4)
    act_rng = np.random.default_rng(act_ss)
    pool = pool_ss.spawn(schedule.train_pool)

    net = QNetwork.init(encoder.size, n_actions, schedule.hidden, np.random.default_rng(init_ss),
                        meta={"name": name, "n_vehicles": fleet.n_vehicles,
                              "n_regions": geo.n_regions, "demand_norm": encoder.demand_norm})
    target = net.copy()
    opt = Adam(net.params(), lr=schedule.learning_rate)
    buf = ReplayBuffer(schedule.replay_capacity, encoder.size, n_actions)
    report = TrainingReport([], [], 0)

    for episode in range(schedule.episodes):
        eps = schedule.epsilon(episode)
        scenario, demands = scenario_source(np.random.default_rng(pool[episode % len(pool)]))
        sim = DaySimulation(geo, fleet, scenario, demands)
        state = sim.observe()
        x = encoder.encode(state) if state is not None else None
        ep_loss, n_loss = 0.0, 0
        while state is not None:
            feasible = state.feasible
            if act_rng.random() < eps:
                choice = feasible[int(act_rng.integers(len(feasible)))]
            else:
                choice = greedy_decide(forward(net, x), feasible)
            reward = reward_rule(state.pending_customer.region_id) if choice != REJECT else 0.0
            sim.step(choice)
            nxt = sim.observe()
            if nxt is None:
                buf.add(x, choice, reward, None, None, True)
                x_next = None
            else:
                x_next = encoder.encode(nxt)
                buf.add(x, choice, reward, x_next, feasible_mask(nxt.feasible, n_actions), False)
            state, x = nxt, x_next

            if len(buf) >= schedule.batch_size:
                s, a, r, s2, m2, done = buf.sample(act_rng, schedule.batch_size)
                q2 = forward(target, s2)
                q2 = np.where(m2, q2, -np.inf).max(axis=1)
                y = r + schedule.gamma * np.where(done, 0.0, q2)
                grads, loss = backward(net, s, a, y)
                opt.step(net.params(), grads)
                report.updates += 1
                ep_loss += loss
                n_loss += 1
                if report.updates % schedule.target_sync == 0:
                    target = net.copy()
                if not math.isfinite(loss) or loss > schedule.max_loss or not net.all_finite():
                    raise TrainingDiverged(
                        f"loss {loss:.3g} at episode {episode}, update {report.updates}, "
                        f"eps {eps:.3f}; lr {schedule.learning_rate}, gamma {schedule.gamma}")
        result = sim.finish()
        report.episode_services.append(result.total_services)
        report.losses.append(ep_loss / n_loss if n_loss else 0.0)
        if (episode + 1) % 1000 == 0:
            recent = report.episode_services[-1000:]
            log.info("%s: episode %d eps %.3f mean services %.2f loss %.4f", name, episode + 1,
                     eps, float(np.mean(recent)), report.losses[-1])

    if schedule.test_pool:
        policy = GreedyQPolicy(net, encoder, name)
        total = 0
        for child in test_ss.spawn(schedule.test_pool):
            scenario, demands = scenario_source(np.random.default_rng(child))
            sim = DaySimulation(geo, fleet, scenario, demands)
            while (st := sim.observe()) is not None:
                sim.step(policy.decide(st, st.feasible))
            total += sim.finish().total_services
        report.test_services = total / schedule.test_pool
    return net, report


def save_network(net: QNetwork, path) -> None:
    """Write the network as JSON: header fields then row-major layers, full float precision."""
    doc = {
        "format": "sddshaping-qnet/1",
        "layer_sizes": net.layer_sizes,
        "n_features": net.n_features,
        "n_vehicles": net.n_outputs - 1,
        "meta": net.meta,
        "layers": [{"weight": w.tolist(), "bias": b.tolist()}
                   for w, b in zip(net.weights, net.biases)],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_network(path) -> QNetwork:
    with open(path) as fh:
        doc = json.load(fh)
    weights = [np.array(layer["weight"], dtype=float) for layer in doc["layers"]]
    biases = [np.array(layer["bias"], dtype=float) for layer in doc["layers"]]
    net = QNetwork(weights, biases, doc.get("meta", {}))
    if net.layer_sizes != doc["layer_sizes"]:
        raise ValueError(f"{path}: layer sizes do not match header")
    return net
