"""Experiment configs, training/evaluation pipelines and CSV artifacts."""

from __future__ import annotations

import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dqn import (QNetwork, TrainSchedule, demand_scenarios, fixed_demands, load_network,
                  save_network, train, unit_reward)
from .instance import ConfigError, Fleet, Geography, builtin_geography, scale_geography
from .interday import (DAILY_COLUMNS, TRAJECTORY_COLUMNS, DemandModel, HorizonConfig,
                       HorizonResult, daily_rows, read_csv, relative_improvement, run_horizon,
                       summarize, trajectory_rows, write_csv)
from .intraday import FeatureEncoder
from .policies import LEARNED, POLICY_NAMES, make_policy, rrl_reward_rule
from .shaping import shape_equal, shape_priority

log = logging.getLogger(__name__)

OUTPUT_ENV = "SDDSHAPING_OUTPUT"
ALPHAS = (0.25, 0.5, 0.75)
R_BARS = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85)


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "runs")


@dataclass
class ExperimentConfig:
    geography: str = "a"
    demand_model: str = "capacitated"
    demand_param: float = 0.25
    policy: str = "myopic"
    days: int = 720
    update_every: int = 30
    n_vehicles: int = 5
    request_window: float = 420.0
    shift_end: float = 480.0
    deadline: float = 240.0
    load_time: float = 3.0
    service_time: float = 3.0
    speed_kmh: float = 30.0
    circuity_factor: float = 1.4
    departure: str = "latest"
    empty_service_level: float = 1.0   # service level of a block with no requests
    replications: int = 20
    base_seed: int = 0
    scale: float = 10.0
    train_seed: int = 0
    train_episodes: int = 5000
    learning_rate: float = 1e-3
    batch_size: int = 32
    gamma: float = 1.0
    target_sync: int = 1000
    replay_capacity: int = 10_000
    priorities: str = ""           # e.g. "1,0"; empty means the default rule
    weights: str = ""              # explicit weight file; empty means <output_dir>/weights-<policy>.json
    output_dir: str = field(default_factory=default_output_dir)

    def validate(self) -> "ExperimentConfig":
        if self.geography not in ("a", "b", "c"):
            raise ConfigError(f"geography: unknown {self.geography!r}")
        if self.policy not in POLICY_NAMES + ("reject",):
            raise ConfigError(f"policy: unknown {self.policy!r}; choose from {', '.join(POLICY_NAMES)}")
        if self.demand_model not in ("capacitated", "uncapacitated"):
            raise ConfigError(f"demand_model: unknown {self.demand_model!r}")
        if not 0 < self.demand_param < 1:
            raise ConfigError("demand_param: must lie in (0, 1)")
        for name in ("days", "update_every", "n_vehicles", "replications", "train_episodes",
                     "batch_size", "target_sync", "replay_capacity"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        for name in ("request_window", "shift_end", "deadline", "speed_kmh"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if self.shift_end < self.request_window:
            raise ConfigError("shift_end: must be >= request_window")
        if self.days % self.update_every:
            raise ConfigError("update_every: must divide days")
        if self.scale < 1:
            raise ConfigError("scale: must be >= 1")
        if self.empty_service_level not in (0.0, 1.0):
            raise ConfigError("empty_service_level: must be 0 or 1")
        return self

    # resolved objects

    def geo(self) -> Geography:
        base = builtin_geography(self.geography)
        base = dataclasses.replace(base, speed_kmh=self.speed_kmh,
                                   circuity_factor=self.circuity_factor)
        return scale_geography(base, self.scale)

    def fleet(self) -> Fleet:
        return Fleet(n_vehicles=max(1, int(self.n_vehicles // self.scale)),
                     request_window=self.request_window, shift_end=self.shift_end,
                     deadline=self.deadline, load_time=self.load_time,
                     service_time=self.service_time, departure=self.departure)

    def model(self) -> DemandModel:
        if self.demand_model == "capacitated":
            return DemandModel.capacitated(self.demand_param, self.geo().demand_caps)
        return DemandModel.uncapacitated(self.demand_param)

    def horizon(self) -> HorizonConfig:
        return HorizonConfig(self.days, self.update_every)

    def schedule(self) -> TrainSchedule:
        return TrainSchedule(episodes=self.train_episodes, learning_rate=self.learning_rate,
                             batch_size=self.batch_size, gamma=self.gamma,
                             target_sync=self.target_sync, replay_capacity=self.replay_capacity)

    def priority_flags(self):
        if not self.priorities:
            return None
        flags = [bool(int(x)) for x in self.priorities.split(",")]
        if len(flags) != len(builtin_geography(self.geography).regions):
            raise ConfigError("priorities: need one flag per region")
        return tuple(flags)

    def setting(self) -> str:
        return f"{self.geography}/{self.demand_model}/{self.demand_param:g}"

    def training_policy(self) -> str:
        """Name of the network a learned policy runs on (MRL reuses the intra-day net)."""
        return "intraday" if self.policy == "mrl" else self.policy

    def weights_path(self) -> Path:
        if self.weights:
            return Path(self.weights)
        return Path(self.output_dir) / f"weights-{self.training_policy()}.json"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, value):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    kind = _FIELD_TYPES[name]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        return "" if value is None else str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot read {value!r} as {kind}") from None


def make_config(values: dict | None = None, **overrides) -> ExperimentConfig:
    merged = dict(values or {})
    merged.update(overrides)
    kwargs = {k: _coerce(k, v) for k, v in merged.items()}
    return ExperimentConfig(**kwargs).validate()


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        values = yaml.safe_load(fh) or {}
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: expected a flat key: value mapping")
    return make_config(values, **overrides)


def dump_config(config: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


def paper_grid(scale: float = 1.0, **overrides) -> list[ExperimentConfig]:
    """The 33 settings: three geographies x (three alphas + eight thresholds)."""
    if scale < 1:
        raise ConfigError("scale: must be >= 1")
    configs = []
    for geo in ("a", "b", "c"):
        for alpha in ALPHAS:
            configs.append(make_config(overrides, geography=geo, demand_model="capacitated",
                                       demand_param=alpha, scale=scale))
        for r_bar in R_BARS:
            configs.append(make_config(overrides, geography=geo, demand_model="uncapacitated",
                                       demand_param=r_bar, scale=scale))
    return configs


# training

def train_policy(config: ExperimentConfig) -> tuple[QNetwork, object]:
    """Train the network behind ``config.policy`` (no demand-model dependence)."""
    geo, fleet = config.geo(), config.fleet()
    name = config.training_policy()
    if name not in LEARNED:
        raise ConfigError(f"policy {config.policy!r} does not need training")
    reward = unit_reward
    if name in ("intraday", "rrl"):
        sampler = fixed_demands(geo.initial_demands)
        if name == "rrl":
            reward = rrl_reward_rule(geo.initial_demands)
    elif name == "irl-e":
        sampler = shape_equal(geo)
    else:
        sampler = shape_priority(geo, config.priority_flags())
    source = demand_scenarios(geo, fleet, sampler)
    encoder = FeatureEncoder(geo, fleet)
    return train(geo, fleet, source, config.schedule(), seed=config.train_seed,
                 reward_rule=reward, encoder=encoder, name=name)


def ensure_network(config: ExperimentConfig, allow_train: bool) -> QNetwork | None:
    if config.policy not in LEARNED:
        return None
    path = config.weights_path()
    if path.exists():
        return load_network(path)
    if not allow_train:
        raise ConfigError(f"no weights at {path} for learned policy {config.policy!r}; "
                          f"run `train` first or pass --train")
    net, report = train_policy(config)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_network(net, path)
    log.info("trained %s: test services %.2f -> %s", config.training_policy(),
             report.test_services or float("nan"), path)
    return net


def build_policy(config: ExperimentConfig, net: QNetwork | None):
    encoder = FeatureEncoder(config.geo(), config.fleet()) if net is not None else None
    return make_policy(config.policy, net, encoder)


# evaluation

def _replicate(args) -> HorizonResult:
    config, policy, seed = args
    return run_horizon(config.geo(), config.model(), config.horizon(), policy, seed,
                       config.fleet(), config.empty_service_level)


def evaluate(config: ExperimentConfig, policy, workers: int = 1) -> list[HorizonResult]:
    """One horizon per replication; replication i uses seed base_seed + i."""
    jobs = [(config, policy, config.base_seed + i) for i in range(config.replications)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_replicate, jobs))
    return [_replicate(job) for job in jobs]


SUMMARY_BASE = ["geography", "demand_model", "demand_param", "policy", "replication", "seed",
                "total_services", "avg_daily_services"]


def summary_columns(n_regions: int) -> list[str]:
    return SUMMARY_BASE + [f"end_demand_{i + 1}" for i in range(n_regions)]


def _g(x: float) -> str:
    return f"{x:.6g}"


def summary_rows(config: ExperimentConfig, results: list[HorizonResult]):
    for rep, res in enumerate(results):
        yield ([config.geography, config.demand_model, _g(config.demand_param), config.policy,
                rep, res.seed, res.total_services, _g(res.avg_daily_services)]
               + [_g(v) for v in res.end_demand])


@dataclass
class RunArtifacts:
    config: ExperimentConfig
    summary_csv: Path
    trajectory_csv: Path
    daily_csv: Path
    config_echo: Path
    seed_ledger: Path
    weights: Path | None
    results: list[HorizonResult]
    summary: dict


def run_experiment(config: ExperimentConfig, allow_train: bool = False, workers: int = 1,
                   quiet: bool = False) -> RunArtifacts:
    config.validate()
    net = ensure_network(config, allow_train)
    policy = build_policy(config, net)
    results = evaluate(config, policy, workers)

    out = Path(config.output_dir) / config.setting().replace("/", "-") / config.policy
    out.mkdir(parents=True, exist_ok=True)
    n_regions = config.geo().n_regions
    summary_csv = out / "summary.csv"
    write_csv(summary_csv, summary_columns(n_regions), summary_rows(config, results))
    trajectory_csv = out / "trajectory.csv"
    write_csv(trajectory_csv, TRAJECTORY_COLUMNS,
              (row for rep, res in enumerate(results)
               for row in trajectory_rows(res, rep, config.update_every)))
    daily_csv = out / "daily.csv"
    write_csv(daily_csv, DAILY_COLUMNS,
              (row for rep, res in enumerate(results) for row in daily_rows(res, rep)))
    config_echo = out / "config.yaml"
    dump_config(config, config_echo)
    seed_ledger = out / "seeds.csv"
    seeds = [("train", config.train_seed)] if net is not None else []
    seeds += [(f"replication-{i}", config.base_seed + i) for i in range(config.replications)]
    write_csv(seed_ledger, ["stream", "seed"], seeds)

    summary = summarize(results)
    if not quiet:
        print(format_summary(config, summary))
    return RunArtifacts(config, summary_csv, trajectory_csv, daily_csv, config_echo, seed_ledger,
                        config.weights_path() if net is not None else None, results, summary)


def format_summary(config: ExperimentConfig, summary: dict) -> str:
    ends = " ".join(f"{v:8.2f}" for v in summary["end_demand"])
    return (f"{config.setting():28s} {config.policy:9s} reps={summary['replications']:<4d}"
            f" services/day={summary['avg_daily_services']:8.2f}"
            f" (se {summary['avg_daily_services_se']:.2f})  end demand: {ends}")


# comparison

def read_summary(path) -> dict:
    """Aggregate one summary CSV into {setting: {...}}."""
    rows = read_csv(path)
    if not rows:
        raise ConfigError(f"{path}: empty summary")
    out = {}
    for row in rows:
        key = f"{row['geography']}/{row['demand_model']}/{float(row['demand_param']):g}"
        entry = out.setdefault(key, {"policy": row["policy"], "services": [], "end_demand": []})
        entry["services"].append(float(row["avg_daily_services"]))
        ends = [float(v) for k, v in row.items() if k.startswith("end_demand_")]
        entry["end_demand"].append(sum(ends))
    return out


def _collect(artifacts) -> dict:
    merged = {}
    for item in artifacts:
        path = item.summary_csv if isinstance(item, RunArtifacts) else Path(item)
        if path.is_dir():
            paths = sorted(path.rglob("summary.csv"))
        else:
            paths = [path]
        for p in paths:
            for key, entry in read_summary(p).items():
                if key in merged:
                    raise ConfigError(f"setting {key} appears twice")
                merged[key] = entry
    return merged


@dataclass
class Comparison:
    rows: list[dict]
    mean_services: float
    mean_end_demand: float

    def format(self) -> str:
        lines = [f"{'setting':28s} {'policy':>10s} {'baseline':>10s} {'improve':>9s}"
                 f" {'end dem.':>10s} {'base end':>10s} {'improve':>9s}"]
        for r in self.rows:
            lines.append(f"{r['setting']:28s} {r['policy_services']:10.2f} "
                         f"{r['baseline_services']:10.2f} {100 * r['improvement_services']:+8.2f}%"
                         f" {r['policy_end_demand']:10.2f} {r['baseline_end_demand']:10.2f}"
                         f" {100 * r['improvement_end_demand']:+8.2f}%")
        lines.append(f"{'grid average':28s} {'':10s} {'':10s} {100 * self.mean_services:+8.2f}%"
                     f" {'':10s} {'':10s} {100 * self.mean_end_demand:+8.2f}%")
        return "\n".join(lines)


def compare(policy_artifacts, baseline_artifacts) -> Comparison:
    """Relative improvement of a policy over a baseline per setting and on average."""
    pol = _collect(policy_artifacts)
    base = _collect(baseline_artifacts)
    missing = sorted(set(pol) ^ set(base))
    if missing:
        raise ConfigError("settings present on one side only: " + ", ".join(missing))
    rows = []
    for key in sorted(pol):
        p, b = pol[key], base[key]
        if len(p["services"]) != len(b["services"]):
            raise ConfigError(f"{key}: replication counts differ "
                              f"({len(p['services'])} vs {len(b['services'])})")
        ps, bs = float(np.mean(p["services"])), float(np.mean(b["services"]))
        pe, be = float(np.mean(p["end_demand"])), float(np.mean(b["end_demand"]))
        rows.append({"setting": key, "policy": p["policy"], "baseline": b["policy"],
                     "policy_services": ps, "baseline_services": bs,
                     "improvement_services": relative_improvement(ps, bs),
                     "policy_end_demand": pe, "baseline_end_demand": be,
                     "improvement_end_demand": relative_improvement(pe, be)})
    return Comparison(rows, float(np.mean([r["improvement_services"] for r in rows])),
                      float(np.mean([r["improvement_end_demand"] for r in rows])))
