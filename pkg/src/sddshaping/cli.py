"""Command line entry point: train, evaluate, sweep, steady-state, compare."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import (OUTPUT_ENV, ExperimentConfig, compare, ensure_network, load_config,
                      make_config, paper_grid, run_experiment)
from .instance import ConfigError
from .policies import LEARNED
from .steady_state import DomainError, StylizedInstance, analyze

# Flag name -> config key for the common overrides.
_FLAGS = {
    "geography": "geography", "policy": "policy", "demand_model": "demand_model",
    "param": "demand_param", "replications": "replications", "seed": "base_seed",
    "train_seed": "train_seed", "scale": "scale", "episodes": "train_episodes",
    "days": "days", "update_every": "update_every", "vehicles": "n_vehicles",
    "departure": "departure", "weights": "weights", "out": "output_dir",
}


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key: value YAML file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--geography", choices=["a", "b", "c"])
    p.add_argument("--policy")
    p.add_argument("--demand-model", choices=["capacitated", "uncapacitated"])
    p.add_argument("--param", type=float, help="alpha (capacitated) or r-bar (uncapacitated)")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, help="base evaluation seed")
    p.add_argument("--train-seed", type=int)
    p.add_argument("--scale", type=float, help="desk-scale divisor for demand and fleet")
    p.add_argument("--episodes", type=int, help="training episodes")
    p.add_argument("--days", type=int)
    p.add_argument("--update-every", type=int)
    p.add_argument("--vehicles", type=int)
    p.add_argument("--departure", choices=["latest", "earliest"])
    p.add_argument("--weights")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./runs)")


def _overrides(args) -> dict:
    out = {key: getattr(args, flag) for flag, key in _FLAGS.items()
           if getattr(args, flag, None) is not None}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(args) -> ExperimentConfig:
    over = _overrides(args)
    if args.config:
        return load_config(args.config, **over)
    return make_config(over)


def cmd_train(args) -> int:
    config = _config(args)
    if config.policy not in LEARNED:
        raise ConfigError(f"policy {config.policy!r} has no network to train")
    path = config.weights_path()
    if path.exists() and not args.force:
        print(f"weights already present at {path} (use --force to retrain)")
        return 0
    if args.force and path.exists():
        path.unlink()
    ensure_network(config, allow_train=True)
    print(f"wrote {path}")
    return 0


def cmd_evaluate(args) -> int:
    if args.paper_grid:
        return cmd_sweep(args)
    art = run_experiment(_config(args), allow_train=args.train, workers=args.workers)
    print(f"artifacts in {art.summary_csv.parent}")
    return 0


def cmd_sweep(args) -> int:
    over = _overrides(args)
    base = load_config(args.config, **over).to_dict() if args.config else over
    scale = base.pop("scale", None) or 10.0
    for key in ("geography", "demand_model", "demand_param"):
        base.pop(key, None)
    for config in paper_grid(float(scale), **base):
        run_experiment(config, allow_train=args.train, workers=args.workers)
    return 0


def cmd_steady_state(args) -> int:
    report = analyze(StylizedInstance(args.T, args.A, args.beta, args.M1, args.M2))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    print()
    print(f"{'candidate':18s} {'r1':>10s} {'r2':>10s} {'objective':>12s} {'resource':>12s}")
    for name, a in report.candidates.items():
        mark = " *" if name == report.winner else ""
        print(f"{name:18s} {a.r1:10.6f} {a.r2:10.6f} {a.objective:12.6f} "
              f"{a.resource_used:12.6f}{mark}")
    return 0


def cmd_compare(args) -> int:
    table = compare(args.policy, args.baseline)
    print(table.format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sddshaping",
                                     description="Same-day delivery demand shaping experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the network behind a learned policy")
    _add_config_args(p)
    p.add_argument("--force", action="store_true", help="retrain even if weights exist")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("evaluate", cmd_evaluate, "evaluate one setting"),
                                 ("sweep", cmd_sweep, "evaluate all 33 grid settings")):
        p = sub.add_parser(name, help=helptext)
        _add_config_args(p)
        p.add_argument("--train", action="store_true", help="train missing weights first")
        p.add_argument("--workers", type=int, default=1, help="processes for replications")
        p.set_defaults(func=func)
    sub.choices["evaluate"].add_argument("--paper-grid", action="store_true",
                                         help="run all 33 grid settings (same as sweep)")

    p = sub.add_parser("steady-state", help="analyze a stylized two-region instance")
    for flag in ("T", "A", "beta", "M1", "M2"):
        p.add_argument(f"--{flag}", type=float, required=True)
    p.set_defaults(func=cmd_steady_state)

    p = sub.add_parser("compare", help="relative improvement of one artifact set over another")
    p.add_argument("--policy", nargs="+", required=True, help="summary CSVs or run directories")
    p.add_argument("--baseline", nargs="+", required=True, help="summary CSVs or run directories")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors are validation errors
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime fault
        print(f"fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
