"""Command line interface: ``python3 -m urans1eq {run,verify,compare,sweep}``.

The exit code is 0 only when every invoked run finished and every invoked
check passed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .runner import OUTPUT_ROOT_ENV, ScenarioConfig, compare, resolve_output_dir, run, sweep
from .verification import CHECKS, run_checks


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="urans1eq", description=__doc__,
                                epilog=f"Outputs go under ${OUTPUT_ROOT_ENV} (default ./runs) unless --out is given.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path)

    v = sub.add_parser("verify", help="run verification checks")
    v.add_argument("config", type=Path)
    v.add_argument("--out", type=Path)
    v.add_argument("--checks", nargs="+", choices=CHECKS)

    c = sub.add_parser("compare", help="compare two finished runs")
    c.add_argument("manifest_a", type=Path)
    c.add_argument("manifest_b", type=Path)
    c.add_argument("--out", type=Path, help="comparison CSV (default: next to manifest_a)")

    s = sub.add_parser("sweep", help="run a config over a list of parameter values")
    s.add_argument("config", type=Path)
    s.add_argument("--param", default=None)
    s.add_argument("--values", type=float, nargs="+")
    s.add_argument("--workers", type=int, default=1)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.cmd == "compare":
        out = args.out or args.manifest_a.parent / f"compare_{args.manifest_b.parent.name}.csv"
        cmp = compare(args.manifest_a, args.manifest_b, out)
        print(json.dumps({"csv": str(out), "time_averaged_difference": cmp.avg_diff}, indent=2))
        return 0

    cfg = ScenarioConfig.load(args.config)
    if args.cmd == "run":
        res = run(cfg, args.out, progress=args.verbose)
        print(f"{res.manifest.status}: {resolve_output_dir(cfg, args.out) / 'manifest.json'}")
        if not res.ok:
            print(res.manifest.message, file=sys.stderr)
        return 0 if res.ok else 1
    if args.cmd == "verify":
        out = args.out or resolve_output_dir(cfg, None) / "verify"
        reports = run_checks(cfg, args.checks, out)
        for r in reports:
            print(r.summary())
        print(f"report: {out / 'verification_report.json'}")
        return 0 if all(r.passed for r in reports) else 1
    # sweep
    param = args.param or cfg.sweep_param
    values = args.values or list(cfg.sweep_values)
    if not param or not values:
        print("sweep needs --param and --values (or sweep_param/sweep_values in the config)", file=sys.stderr)
        return 2
    manifests = sweep(cfg, param, values, workers=args.workers)
    for m in manifests:
        print(f"{m.status}: {m.output_dir}")
    return 0 if all(m.status == "ok" for m in manifests) else 1


if __name__ == "__main__":
    sys.exit(main())
