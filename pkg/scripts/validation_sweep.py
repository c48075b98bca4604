"""Choose raster knobs on a validation fold that never touches the test rows.

Models are fit on 5-140 km and scored on 145-170 km for every combination of
stroke increment and DC offset given on the command line.  The 175-200 km
rows are generated (the dataset layout needs them) but never read.

Usage: python3 scripts/validation_sweep.py WORK_DIR [--increments 8 32 128] [--dc on off]
"""
import argparse
import dataclasses
from pathlib import Path

import numpy as np

from rxfault.features import Standardizer
from rxfault.neuralnet import Topology, TrainConfig, dminmax, dminmax_inverse, forward, init_weights, train
from rxfault.pipeline import PipelineConfig, generate, load_manifest
from rxfault.pipeline.dataset import load_rows
from rxfault.svr import grid_search_svr

FIT_MAX_KM = 140.0
VAL_KM = (145.0, 150.0, 155.0, 160.0, 165.0, 170.0)
ROUTES = (("cgb", "per_column"), ("lm", "block8"))


def score(pred_km, actual_km, norm):
    err = np.abs(pred_km - actual_km) / (norm.x_max - norm.x_min) * 100
    mse = np.mean((dminmax(pred_km, norm) - dminmax(actual_km, norm)) ** 2)
    return float(err.max()), float(mse)


def sweep_one(cfg, root, seed):
    generate(cfg, root)
    m = load_manifest(root)
    norm = m.norm_spec()
    t = cfg.training
    out = []
    for scheme in cfg.scenarios.schemes:
        rows = m.entries(scheme, "train")
        fit = [e for e in rows if e.distance_km <= FIT_MAX_KM]
        val = [e for e in rows if e.distance_km in VAL_KM]
        y = dminmax([e.distance_km for e in fit], norm)
        actual = np.array([e.distance_km for e in val])
        for algo, red in ROUTES + (("svr", cfg.svr.reduction),):
            x_fit = load_rows(root, m, red, fit)
            std = Standardizer.fit(x_fit)
            x_val = std.transform(load_rows(root, m, red, val))
            if algo == "svr":
                svr, _, _ = grid_search_svr(std.transform(x_fit), y, seed=seed)
                pred = dminmax_inverse(svr.decision(x_val), norm)
            else:
                topo = Topology(x_fit.shape[1], t.hidden, 1, t.cascade)
                tc = TrainConfig(algo, max_epochs=t.max_epochs, goal_mse=t.goal_mse, seed=seed)
                net, _ = train(init_weights(topo, seed), std.transform(x_fit), y, tc)
                pred = dminmax_inverse(np.atleast_1d(forward(net, x_val)), norm)
            out.append((scheme, f"{algo}/{red}", *score(pred, actual, norm)))
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("work")
    p.add_argument("--increments", type=int, nargs="+", default=[8, 32, 128])
    p.add_argument("--dc", choices=("on", "off"), nargs="+", default=["on", "off"])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    base = PipelineConfig()
    print(f"{'incr':>4s} {'dc':3s} {'scheme':11s} {'route':18s} {'val max %':>9s} {'val MSE':>10s}")
    for inc in args.increments:
        for dc in args.dc:
            cfg = dataclasses.replace(
                base,
                raster=dataclasses.replace(base.raster, increment=inc),
                relay=dataclasses.replace(base.relay, dc_offset=dc == "on"),
            )
            root = Path(args.work) / f"inc{inc}_dc{dc}"
            for scheme, route, worst, mse in sweep_one(cfg, root, args.seed):
                print(f"{inc:4d} {dc:3s} {scheme:11s} {route:18s} {worst:9.2f} {mse:10.3e}")


if __name__ == "__main__":
    main()
