"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 configuration or data
error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import config_to_dict, list_presets, resolve_config
from .core import ConfigError, check_kappa
from .engine import ExperimentConfig, run_batch
from .output import emit_csv, emit_plot, emit_series_csv
from .policies import SingleUCB1
from .topology import ErRandomFixed, ErRandomPerRound

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _load(args) -> ExperimentConfig:
    config = resolve_config(args.config)
    changes = {}
    if getattr(args, "runs", None) is not None:
        changes["runs"] = args.runs
    if getattr(args, "horizon", None) is not None:
        changes["horizon"] = args.horizon
    if getattr(args, "seed", None) is not None:
        changes["root_seed"] = args.seed
    return replace(config, **changes) if changes else config


def _run_into(config: ExperimentConfig, out_dir: Path, workers: Optional[int]):
    result = run_batch(config, workers=workers)
    emit_csv(result, out_dir, config_to_dict(config))
    return result


def with_parameter(config: ExperimentConfig, parameter: str, value: str) -> ExperimentConfig:
    """Copy of ``config`` with one swept parameter replaced."""
    if parameter == "kappa":
        return replace(config, kappa=check_kappa(float(value), "sweep.kappa"))
    if parameter == "f":
        return replace(config, f=int(value))
    if parameter == "q":
        graph = config.graph
        if not isinstance(graph, (ErRandomFixed, ErRandomPerRound)):
            raise ConfigError("q can only be swept for ER graph models", "graph.kind")
        return replace(config, graph=type(graph)(float(value)))
    raise ConfigError(f"unknown sweep parameter {parameter!r}", "sweep.parameter")


def cmd_run(args) -> int:
    config = _load(args)
    _run_into(config, Path(args.out), args.workers)
    print(f"wrote results for {config.name or args.config} to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _load(args)
    out = Path(args.out)
    series = {}
    for value in args.values:
        try:
            config = with_parameter(base, args.parameter, value)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value {value!r}", f"sweep.{args.parameter}") from None
        label = f"{args.parameter}={value}"
        series[label] = _run_into(config, out / label, args.workers)
    emit_series_csv(series, out / "sweep_network.csv")
    print(f"wrote {len(series)} sweep points to {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _load(args)
    out = Path(args.out)
    series = {
        config.policy.kind: _run_into(config, out / config.policy.kind, args.workers),
        "single_ucb1": _run_into(replace(config, policy=SingleUCB1()), out / "single_ucb1", args.workers),
    }
    emit_series_csv(series, out / "compare_network.csv")
    for name, result in series.items():
        print(f"{name}: network-average regret at T = {result.mean_network[-1]:.3f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    checks = run_suite(args.suite)
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_plot(args) -> int:
    emit_plot(args.csv, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in list_presets():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="byzbandit", description="Byzantine-resilient decentralized bandit simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(p):
        p.add_argument("config", help="YAML config path or shipped preset name")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: $BYZBANDIT_WORKERS or 1)")
        p.add_argument("--runs", type=int, default=None, help="override the number of runs")
        p.add_argument("--horizon", type=int, default=None, help="override the horizon T")
        p.add_argument("--seed", type=int, default=None, help="override the root seed")

    p = sub.add_parser("run", help="simulate a config and write CSVs")
    experiment(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one config across values of kappa, q or f")
    experiment(p)
    p.add_argument("--parameter", required=True, choices=["kappa", "q", "f"])
    p.add_argument("--values", required=True, nargs="+")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="run the config and its single-agent UCB1 baseline")
    experiment(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="run invariant and Monte Carlo checks")
    p.add_argument("--suite", choices=["filters", "counterexample", "bounds", "all"], default="all")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="render a regret CSV to SVG")
    p.add_argument("csv")
    p.add_argument("out")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("presets", help="list shipped presets")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
