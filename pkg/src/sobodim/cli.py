"""Command line driver: ``sobodim <subcommand> [--config PATH] [--seed N] ...``.

Exit status is 0 when every check passes, 1 when any fails and 2 for a
rejected configuration.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError
from .experiments import ExperimentConfig, run

SUBCOMMANDS = {
    "sharpness": "sharpness",
    "universal": "universal_bound",
    "survey": "foliation_survey",
    "regularity": "regularity",
    "grushin": "grushin_compare",
    "carpet": "carpet_regularity",
}


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sobodim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, experiment in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {experiment} experiment")
        p.add_argument("--config", help="JSON config file (merged over the defaults)")
        p.add_argument("--seed", type=_u64, help="64-bit seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--replicates", type=int, help="number of seeded replicates")
        p.add_argument("--workers", type=int, help="worker processes for replicates")
    return parser


def make_config(args) -> ExperimentConfig:
    experiment = SUBCOMMANDS[args.command]
    data = {"experiment": experiment}
    if args.config:
        loaded = ExperimentConfig.from_json(args.config).as_dict()
        if loaded["experiment"] != experiment:
            raise ConfigError(
                f"config is for {loaded['experiment']!r}, subcommand runs {experiment!r}"
            )
        data = loaded
    for key in ("seed", "out", "replicates", "workers"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    data.setdefault("out", f"out/{args.command}")
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = run(cfg)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value} (target {c.target})")
    print(f"report: {cfg.out}/report.json  ({report.wall_clock:.1f} s)")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
