"""Command-line batch runner for scenario configs.

    adaptctl run <config>... [--out DIR] [--seed U64] [--format csv|json|both] [--jobs N]
    adaptctl validate <config>
    adaptctl list-scenarios

``<config>`` is a JSON file or the name of a bundled scenario.  Exit codes:
0 all criteria pass, 1 a criterion failed, 2 validation error, 3 runtime abort.
The default output directory comes from ``ADAPTCTL_OUT`` (else ``./runs``).
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .scenarios import ConfigError, bundled_names, load_bundled, resolve_config, run_scenario

EXIT_OK, EXIT_CRITERIA, EXIT_INVALID, EXIT_ABORT = 0, 1, 2, 3
OUT_ENV = "ADAPTCTL_OUT"


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _parser():
    p = argparse.ArgumentParser(prog="adaptctl", description="Run adaptive-control scenarios.")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one or more scenarios")
    r.add_argument("configs", nargs="+")
    r.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./runs)")
    r.add_argument("--seed", type=_seed, default=None)
    r.add_argument("--format", choices=("csv", "json", "both"), default="both")
    r.add_argument("--jobs", type=int, default=1)
    v = sub.add_parser("validate", help="validate a config")
    v.add_argument("config")
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    return p


def _run_one(args):
    cfg, out, seed, fmt = args
    rep = run_scenario(cfg, out, seed, fmt)
    return cfg.name, rep


def _summary(name, rep):
    if rep.abort:
        return f"{name}: ABORT ({rep.abort})"
    lines = [f"{name}: {'PASS' if rep.passed else 'FAIL'}"]
    for v in rep.verdicts:
        lines.append(f"  [{'pass' if v['pass'] else 'FAIL'}] {v['metric']} = {v['observed']} {v['op']} {v['value']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "list-scenarios":
        for name in bundled_names():
            cfg = load_bundled(name)
            print(f"{name:24s} {cfg.kind:16s} {cfg.description}")
        return EXIT_OK
    if args.cmd == "validate":
        try:
            cfg = resolve_config(args.config)
        except (ConfigError, FileNotFoundError) as exc:
            for e in getattr(exc, "errors", [str(exc)]):
                print(f"error: {e}", file=sys.stderr)
            return EXIT_INVALID
        print(f"{cfg.name}: valid {cfg.kind} scenario")
        return EXIT_OK
    cfgs, bad = [], False
    for c in args.configs:
        try:
            cfgs.append(resolve_config(c))
        except (ConfigError, FileNotFoundError) as exc:
            bad = True
            for e in getattr(exc, "errors", [str(exc)]):
                print(f"error: {c}: {e}", file=sys.stderr)
    if bad:
        return EXIT_INVALID
    out = args.out or os.environ.get(OUT_ENV, "runs")
    jobs = [(cfg, out, args.seed, args.format) for cfg in cfgs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    code = EXIT_OK
    for name, rep in results:
        print(_summary(name, rep))
        code = max(code, rep.exit_code)
    return code


if __name__ == "__main__":
    sys.exit(main())
