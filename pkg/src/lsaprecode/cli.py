"""``lsa-precode`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ScenarioConfig
from .errors import ConfigError, NumericalError
from .experiments import COMMANDS, PRESETS, preset_settings, write_csv, write_manifest
from .verify import run_verify

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser():
    p = argparse.ArgumentParser(prog="lsa-precode",
                                description="Recursive convolutional precoding link simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["verify"]:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON file with ScenarioConfig keys "
                                                    "(and an optional 'sweep' object)")
        s.add_argument("--preset", choices=sorted(PRESETS))
        s.add_argument("--scale", choices=("desk", "paper"), default="desk")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--out", type=Path, help="CSV output path (default: <command>.csv)")
        s.add_argument("--seed", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config field (value parsed as JSON)")
        if name == "verify":
            s.add_argument("--inject-fault", action="store_true",
                           help="flip the sign of the filter-update correction (negative control)")
    return p


def resolve(args):
    """Merge preset < config file < flags into ``(ScenarioConfig, sweep dict)``."""
    data, sweep = {}, {}
    if args.preset:
        if PRESETS[args.preset]["command"] != args.command:
            raise ConfigError(f"preset {args.preset} belongs to '{PRESETS[args.preset]['command']}'")
        data, sweep = preset_settings(args.preset, args.scale)
    if args.config:
        try:
            file_data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_data, dict):
            raise ConfigError("config file must hold a JSON object")
        sweep.update(file_data.pop("sweep", {}) or {})
        data.update(file_data)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        data[key.strip()] = _parse_value(value)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return ScenarioConfig.from_dict(data), sweep


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            ok, _ = run_verify(fault=args.inject_fault, out=sys.stdout)
            return EXIT_OK if ok else EXIT_VERIFY
        cfg, sweep = resolve(args)
        rows = COMMANDS[args.command](cfg, sweep, threads=args.threads)
        out = args.out or Path(f"{args.command}.csv")
        write_csv(rows, out)
        write_manifest(out.with_suffix(".manifest.json"), args.command, cfg, sweep,
                       preset=args.preset, scale=args.scale)
        print(f"wrote {len(rows)} rows to {out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
