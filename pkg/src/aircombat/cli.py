"""Command-line entry point: ``aircombat {probe,train,eval,duel,export}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, parse_config
from .curriculum import NoHitsFound
from .engagement import InitialConditions
from .harness import cmd_duel, cmd_export, cmd_probe, cmd_train, parse_intervals, write_resolved_config
from .netpolicy import ChecksumMismatch


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file, or the name of a bundled preset (e.g. desk)")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--no-curriculum", action="store_true", help="train on the full square throughout")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aircombat", description="Self-play air combat with a curriculum.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probe", help="find the starting intervals from untrained self-play")
    _common(p)

    p = sub.add_parser("train", help="run the seeded training experiment")
    _common(p)

    for name in ("eval", "duel"):
        p = sub.add_parser(name, help="deterministic bouts between two checkpoints")
        _common(p)
        p.add_argument("checkpoint_a")
        p.add_argument("checkpoint_b")
        p.add_argument("-n", "--episodes", type=int, default=100)
        p.add_argument("--intervals", help="a_lo,a_hi,b_lo,b_hi (default: full square)")
        p.add_argument("--no-mirror", action="store_true", help="do not replay starts with sides exchanged")

    p = sub.add_parser("export", help="write one deterministic episode as JSON lines")
    _common(p)
    p.add_argument("checkpoint")
    p.add_argument("--opponent", help="checkpoint for blue (default: same as red)")
    p.add_argument("-a", type=float, default=0.0, help="normalized aspect angle in [-1, 1]")
    p.add_argument("-b", type=float, default=0.0, help="normalized distance in [-1, 1]")
    p.add_argument("--v-red", type=float, default=300.0)
    p.add_argument("--v-blue", type=float, default=300.0)
    p.add_argument("--z-red", type=float)
    p.add_argument("--z-blue", type=float)
    p.add_argument("-o", "--output", default="trajectory.jsonl")
    return ap


def config_from_args(args):
    overrides = {}
    for flag, key in (("seed", "experiment.seed"), ("iterations", "experiment.iterations"),
                      ("runs", "experiment.runs"), ("out", "experiment.out")):
        if getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    if args.no_curriculum:
        overrides["curriculum.enabled"] = False
    return parse_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "probe":
            report = cmd_probe(cfg)
            print(json.dumps({"intervals": report["intervals"], "hits": len(report["hits"]),
                              "fallback": report["fallback"]}))
        elif args.command == "train":
            rows = cmd_train(cfg)
            print(f"wrote {len(rows)} metrics rows to {cfg.out / 'metrics.csv'}")
        elif args.command in ("eval", "duel"):
            write_resolved_config(cfg, cfg.out)
            report = cmd_duel(args.checkpoint_a, args.checkpoint_b, args.episodes,
                              parse_intervals(args.intervals), cfg.seed, cfg, not args.no_mirror)
            print(json.dumps(report))
        elif args.command == "export":
            ic = InitialConditions(args.a, args.b, args.v_red, args.v_blue, args.z_red, args.z_blue)
            records = cmd_export(args.checkpoint, ic, cfg.seed, args.output, cfg, args.opponent)
            print(f"wrote {len(records)} records to {args.output}")
    except (ConfigError, ChecksumMismatch, NoHitsFound, ValueError, OSError) as e:
        print(f"aircombat: error: {e}", file=sys.stderr)
        return 2
    return 0
