"""Command line front end.

    bridgefloer solve          [--config F] [--seed S] [--out DIR] [--grid N1xN2] [--threads N]
    bridgefloer symbol-scan    ...
    bridgefloer flow-diag      ...
    bridgefloer legendre-check ...
    bridgefloer report DIR [DIR ...]

Without ``--config`` each verb runs its named default scenario. The exit code
is 0 iff every check of the scenario passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config, override_grid
from .scenarios import SCENARIOS, VERB_DEFAULTS, run_scenario, scenario

VERB_PIPELINE = {"solve": "solutions", "symbol-scan": "symbol-scan", "flow-diag": "flow-diagnostics",
                 "legendre-check": "legendre-check"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bridgefloer", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in VERB_PIPELINE:
        p = sub.add_parser(verb)
        p.add_argument("--config", help="scenario TOML file")
        p.add_argument("--scenario", choices=sorted(SCENARIOS), help="named built-in scenario")
        p.add_argument("--seed", type=int, help="override the scenario seed (u64)")
        p.add_argument("--out", default=None, help="output directory (default results/<scenario>)")
        p.add_argument("--grid", help="override grid size, e.g. 64x64")
        p.add_argument("--threads", type=int, default=1)
    rp = sub.add_parser("report")
    rp.add_argument("dirs", nargs="+", help="output directories holding summary.json")
    return ap


def _resolve(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = scenario(args.scenario or VERB_DEFAULTS[args.verb])
    if cfg.pipeline != VERB_PIPELINE[args.verb]:
        raise ConfigError(f"{cfg.source or cfg.name}: pipeline {cfg.pipeline!r} does not match verb {args.verb!r}")
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.grid:
        cfg = override_grid(cfg, args.grid)
    return cfg


def print_checks(summary: dict, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"scenario {summary['scenario']} ({summary['pipeline']}, seed {summary['seed']})", file=stream)
    for name, c in summary["checks"].items():
        extra = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in c.items() if k != "passed")
        print(f"  {'PASS' if c['passed'] else 'FAIL'}  {name}" + (f"  ({extra})" if extra else ""), file=stream)
    print(f"  overall: {'PASS' if summary['passed'] else 'FAIL'}", file=stream)


def report(dirs) -> int:
    ok = True
    for d in dirs:
        path = Path(d) / "summary.json"
        if not path.exists():
            print(f"{d}: no summary.json", file=sys.stderr)
            ok = False
            continue
        summary = json.loads(path.read_text())
        print_checks(summary)
        ok &= summary["passed"]
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "report":
        return report(args.dirs)
    try:
        cfg = _resolve(args)
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or Path("results") / cfg.name)
    try:
        summary = run_scenario(cfg, out, threads=max(1, args.threads))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print_checks(summary)
    print(f"  wrote {out}")
    return 0 if summary["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
