"""Command-line entry point: ``wavechaos <experiment> [key=value ...]``."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavechaos", description=__doc__)
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in harness.EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("overrides", nargs="*", help="config overrides as key=value (JSON values)")
        sp.add_argument("--config", help="JSON file with config keys")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default=None, help="output directory (default: runs/<experiment>)")
    fs = sub.add_parser("fit-slope", help="log-log slope of a CSV column against L")
    fs.add_argument("csv")
    fs.add_argument("--x", default="L")
    fs.add_argument("--y", default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.experiment == "fit-slope":
        try:
            fit = harness.fit_slope_csv(args.csv, args.x, args.y)
        except (ValueError, KeyError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return harness.EXIT_VALIDATION
        print(json.dumps({"slope": fit.slope, "stderr": fit.stderr, "half_width": fit.half_width,
                          "used": fit.used, "excluded": fit.excluded}))
        return harness.EXIT_OK
    try:
        overrides = {}
        if args.config:
            with open(args.config) as fh:
                loaded = json.load(fh)
            if not isinstance(loaded, dict):
                raise harness.ConfigError("config file must hold a JSON object", "config")
            overrides.update(loaded)
        for item in args.overrides:
            key, value = harness.parse_override(item)
            overrides[key] = value
        if args.workers < 1:
            raise harness.ConfigError("workers must be >= 1", "workers")
        cfg = harness.build_config(args.experiment, overrides, args.seed)
    except (harness.ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_VALIDATION
    out = args.out or f"runs/{args.experiment}"
    code = harness.run(args.experiment, cfg, args.seed, out, args.workers)
    with open(f"{out}/manifest.json") as fh:
        manifest = json.load(fh)
    print(f"{args.experiment}: {manifest['status']}" + (f" ({manifest['message']})" if manifest.get("message") else ""))
    return code


if __name__ == "__main__":
    sys.exit(main())
