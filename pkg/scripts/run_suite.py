"""Run every config in configs/ and print one summary line per suite.

    python scripts/run_suite.py [--out runs] [configs/*.json]
"""
import argparse
import glob
import os
import time

from mlsilab.suite import ExperimentConfig, emit_report, run_suite


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("configs", nargs="*")
    ap.add_argument("--out", default="runs")
    args = ap.parse_args()
    here = os.path.dirname(os.path.abspath(__file__))
    paths = args.configs or sorted(glob.glob(os.path.join(here, "..", "configs", "*.json")))
    bad = 0
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        cfg = ExperimentConfig.load(path).replace(output=os.path.join(args.out, name))
        t0 = time.perf_counter()
        rep = run_suite(cfg)
        emit_report(rep, cfg.output)
        s = rep.summary
        bad += rep.violated
        print(f"{name:24s} {rep.total:4d} reports  holds={s['holds']:<4d} equality={s['equality']:<3d} "
              f"violated={s['violated'] + s['violated-hypothesis']:<3d} skipped={len(rep.skips):<3d} "
              f"{time.perf_counter() - t0:6.2f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
