"""``explore`` command line: run, batch, render, gen-map."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from . import fixtures
from .errors import ConfigError, ContractViolation, GraphParseError, MapFormatError
from .graph import deserialize
from .harness import (EXIT_BUDGET, EXIT_COMPLETE, EXIT_CONFIG, EXIT_CONTRACT, load_config,
                      render_snapshot, run_batch, run_episode, with_seeds)
from .world import dump_map, load_map


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="explore", description="Topological frontier exploration simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one episode")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")

    b = sub.add_parser("batch", help="run a config over several seeds")
    b.add_argument("--config", required=True, action="append",
                   help="config file; repeat to batch several scenarios")
    b.add_argument("--seeds", required=True, type=_parse_seeds)
    b.add_argument("--out")
    b.add_argument("--workers", type=int, default=1)

    v = sub.add_parser("render", help="draw a saved graph over a map as SVG")
    v.add_argument("--graph", required=True)
    v.add_argument("--map", required=True)
    v.add_argument("--out", required=True)
    v.add_argument("--trajectory", help="trajectory.csv from a run")

    gm = sub.add_parser("gen-map", help="write a fixture map file")
    gm.add_argument("--kind", required=True, choices=sorted(fixtures.KINDS))
    gm.add_argument("--seed", type=int, default=0)
    gm.add_argument("--out", required=True)
    return p


def _config_error(exc: ConfigError) -> int:
    print("config error:", file=sys.stderr)
    for msg in exc.problems:
        print(f"  {msg}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    log = run_episode(config, args.out if args.out is not None else config.out)
    print(log.summary_line())
    return log.status


def cmd_batch(args) -> int:
    configs = []
    problems = []
    for path in args.config:
        try:
            configs.extend(with_seeds(load_config(path), args.seeds))
        except ConfigError as exc:
            problems += [f"{path}: {m}" for m in exc.problems]
    if problems:
        raise ConfigError(problems)
    report = run_batch(configs, args.out, workers=args.workers)
    sys.stdout.write(report.summary_csv())
    sys.stdout.write(report.latency_table())
    if any(not e.ok for e in report.entries):
        for e in report.entries:
            if not e.ok:
                print(f"failed: {e.config.name} seed {e.config.seed}: {e.error}", file=sys.stderr)
        return EXIT_CONTRACT
    if any(not e.summary["terminated"] for e in report.entries):
        return EXIT_BUDGET
    return EXIT_COMPLETE


def _read_trajectory(path):
    with open(path, newline="") as fh:
        return [(float(r["x"]), float(r["y"]), float(r["z"])) for r in csv.DictReader(fh)]


def cmd_render(args) -> int:
    try:
        world = load_map(Path(args.map).read_text())
        g = deserialize(Path(args.graph).read_text())
        traj = _read_trajectory(args.trajectory) if args.trajectory else None
    except (OSError, MapFormatError, GraphParseError, KeyError, ValueError) as exc:
        print(f"render: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    render_snapshot(world, g, traj, args.out)
    return EXIT_COMPLETE


def cmd_gen_map(args) -> int:
    gen = fixtures.KINDS[args.kind]
    world = gen(args.seed) if args.kind in fixtures.SEEDED else gen()
    Path(args.out).write_text(dump_map(world))
    return EXIT_COMPLETE


COMMANDS = {"run": cmd_run, "batch": cmd_batch, "render": cmd_render, "gen-map": cmd_gen_map}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        return _config_error(exc)
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
