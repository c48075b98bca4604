"""Run the whole study with the default config and print a summary table.

Usage: python3 scripts/run_all.py OUT_DIR [--config FILE] [--seed N] [--workers N]
"""
import argparse
import logging
import time

from rxfault.pipeline import PipelineConfig, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    t0 = time.perf_counter()
    res = run_experiment(cfg, args.out, seed=args.seed, workers=args.workers)
    print(f"\n{'scheme':11s} {'model':24s} {'norm. MSE':>10s} {'max % err':>10s}")
    for r in res.reports:
        print(f"{r.scheme:11s} {r.descriptor:24s} {r.mse_normalized:10.3e} {r.max_percent_error:10.3f}")
    print(f"\nreport: {args.out}/reports/report.md  ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
