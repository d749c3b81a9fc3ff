"""Run every bundled scenario and print a verdict table.

    python3 scripts/run_all_scenarios.py [--out runs] [--jobs 4]
"""
import argparse
import time
from concurrent.futures import ProcessPoolExecutor

from adaptctl.scenarios import bundled_names, load_bundled, run_scenario


def _run(args):
    name, out = args
    t0 = time.perf_counter()
    rep = run_scenario(load_bundled(name), out)
    return name, rep, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    work = [(n, args.out) for n in bundled_names()]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_run, work))
    else:
        results = [_run(w) for w in work]
    for name, rep, dt in results:
        status = "ABORT" if rep.abort else ("PASS" if rep.passed else "FAIL")
        obs = ", ".join(f"{v['metric']}={v['observed']:.3g}" for v in rep.verdicts
                        if isinstance(v["observed"], (int, float)))
        print(f"{name:24s} {status:5s} {dt:6.1f}s  {obs}")


if __name__ == "__main__":
    main()
