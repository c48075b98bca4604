"""Command line entry point: ``rxfault {generate,train,eval,compare,report,run}``."""
from __future__ import annotations

import argparse
import logging
import sys

from rxfault.pipeline import (
    PipelineConfig,
    compare_cmd,
    eval_cmd,
    generate,
    report_cmd,
    run_experiment,
    train_cmd,
)


def _config(path) -> PipelineConfig:
    return PipelineConfig.load(path) if path else PipelineConfig()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rxfault", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate faults and build the image dataset")
    g.add_argument("--config", help="YAML config (defaults built in)")
    g.add_argument("--out", required=True, help="dataset directory")
    g.add_argument("--debug-loci", action="store_true", help="also write t,r,x locus CSVs")
    g.add_argument("--workers", type=int, default=1)

    t = sub.add_parser("train", help="fit one per-scheme model")
    t.add_argument("--data", required=True)
    t.add_argument("--scheme", required=True)
    t.add_argument("--model", choices=("ann", "svr"), default="ann")
    t.add_argument("--trainer", default="cgb", help="lm, cgb, scg, oss or gdx")
    t.add_argument("--reduction", default="per_column")
    t.add_argument("--seed", type=int)

    for name, text in (("eval", "evaluate one model on its test rows"),
                       ("compare", "ANN vs SVR table"),
                       ("report", "markdown report over all models")):
        e = sub.add_parser(name, help=text)
        e.add_argument("--data", required=True)
        if name == "eval":
            e.add_argument("--model-file", required=True)
        else:
            e.add_argument("--models", nargs="*", help="model files (default: all in DATA/models)")
        e.add_argument("--denominator", type=float, default=195.0,
                       help="percent error denominator in km (195 default, 200 = line length)")

    r = sub.add_parser("run", help="generate, train, evaluate and report in one go")
    r.add_argument("--config")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            m = generate(_config(args.config), args.out, debug_loci=args.debug_loci, workers=args.workers)
            print(f"{len(m.scenarios)} scenarios, config hash {m.config_hash}")
        elif args.command == "train":
            print(train_cmd(args.data, args.scheme, args.model, args.trainer, args.reduction, args.seed))
        elif args.command == "eval":
            print(eval_cmd(args.data, args.model_file, args.denominator).to_markdown())
        elif args.command == "compare":
            print(compare_cmd(args.data, args.models, args.denominator)[0])
        elif args.command == "report":
            print(report_cmd(args.data, args.models, args.denominator))
        else:
            res = run_experiment(_config(args.config), args.out, seed=args.seed, workers=args.workers)
            for r in res.reports:
                print(f"{r.scheme:11s} {r.descriptor:22s} mse={r.mse_normalized:.3E} "
                      f"max%={r.max_percent_error:.3f}")
    except (ValueError, RuntimeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
