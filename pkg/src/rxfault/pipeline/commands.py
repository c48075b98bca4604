"""Train, evaluate, compare and report on a generated dataset."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rxfault.features import ReductionMode, Standardizer
from rxfault.models import AnnModel, SvrRegressor, load_model, save_model
from rxfault.neuralnet import LM_MAX_WEIGHTS, Topology, TrainConfig, dminmax, init_weights, train
from rxfault.pipeline.config import ConfigError, check_trainer
from rxfault.pipeline.dataset import load_manifest, load_rows
from rxfault.pipeline.metrics import DEFAULT_DENOMINATOR_KM, mse_normalized, percent_error
from rxfault.svr import grid_search_svr

logger = logging.getLogger(__name__)

SCHEME_TITLES = {
    "ungrounded": "Ungrounded",
    "solid": "Solidly grounded",
    "impedance": "Impedance grounded",
}


class PairingError(ConfigError):
    """Trainer and feature layout violate the LM weight-count limit."""


class CompatibilityError(RuntimeError):
    pass


def model_stem(scheme: str, kind: str, trainer: str | None, reduction: str, seed: int) -> str:
    algo = f"ann-{trainer}" if kind == "ann" else "svr"
    return f"{scheme}_{algo}_{reduction}_s{seed}"


def train_cmd(data_dir, scheme: str, kind: str = "ann", trainer: str = "cgb",
              reduction: str = "per_column", seed: int | None = None, out_dir=None) -> Path:
    """Fit one per-scheme model on the training rows; returns the model file path."""
    root = Path(data_dir)
    manifest = load_manifest(root)
    cfg = manifest.pipeline_config()
    label = ReductionMode.parse(reduction).label
    seed = cfg.training.seed if seed is None else seed
    train_rows = manifest.entries(scheme, "train")
    if any(e.split != "train" for e in train_rows):
        raise AssertionError("non-training row selected for fitting")
    x = load_rows(root, manifest, label, train_rows)
    norm = manifest.norm_spec()
    y = dminmax([e.distance_km for e in train_rows], norm)
    std = Standardizer.fit(x)
    xs = std.transform(x)
    meta = {
        "scheme": scheme,
        "reduction": label,
        "seed": seed,
        "config_hash": manifest.config_hash,
        "train_ids": [e.id for e in train_rows],
    }
    out = Path(out_dir) if out_dir else root / "models"
    out.mkdir(parents=True, exist_ok=True)

    if kind == "ann":
        trainer = check_trainer(trainer)
        t = cfg.training
        topo = Topology(xs.shape[1], t.hidden, 1, t.cascade)
        if trainer == "lm" and topo.n_params > LM_MAX_WEIGHTS:
            raise PairingError(
                f"LM memory contract: {label} features give {topo.n_params} weights "
                f"(limit {LM_MAX_WEIGHTS}); use cgb or scg for this layout"
            )
        tc = TrainConfig(
            algorithm=trainer, max_epochs=t.max_epochs, learning_rate=t.learning_rate,
            goal_mse=t.goal_mse, seed=seed,
        )
        net, log = train(init_weights(topo, seed), xs, y, tc)
        model = AnnModel(net, std, norm, tc, list(log.mse), log.stop_reason, meta)
        stem = model_stem(scheme, kind, trainer, label, seed)
        lines = ["epoch,mse"] + [f"{i},{v!r}" for i, v in enumerate(log.mse)]
        logger.info("%s: %d epochs, train mse %.3g (%s)", stem, log.epochs, log.final_mse, log.stop_reason)
    elif kind == "svr":
        svr, best, table = grid_search_svr(xs, y, seed=seed, folds=cfg.svr.folds)
        model = SvrRegressor(svr, std, norm, {"best": best, "folds": cfg.svr.folds}, meta)
        stem = model_stem(scheme, kind, None, label, seed)
        lines = ["c,epsilon,gamma,cv_mse"] + [
            f"{r['c']!r},{r['epsilon']!r},{r['gamma']!r},{r['cv_mse']!r}" for r in table
        ]
        logger.info("%s: c=%g eps=%g gamma=%.3g cv mse %.3g", stem, best["c"], best["epsilon"], best["gamma"], best["cv_mse"])
    else:
        raise ConfigError(f"unknown model kind {kind!r}; choose ann or svr")

    path = out / f"{stem}.json"
    save_model(model, path)
    (out / f"{stem}_log.csv").write_text("\n".join(lines) + "\n")
    return path


@dataclass
class EvalRow:
    actual_km: float
    predicted_km: float
    percent_error: float


@dataclass
class EvalReport:
    scheme: str
    descriptor: str
    config_hash: str
    denominator_km: float
    rows: list[EvalRow]
    mse_normalized: float
    scatter: list[tuple[str, float, float]] = field(default_factory=list)

    @property
    def max_percent_error(self) -> float:
        return max(r.percent_error for r in self.rows)

    @property
    def kind(self) -> str:
        return self.descriptor.split("-")[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["actual_km", "predicted_km", "percent_error"])
        for r in self.rows:
            w.writerow([f"{r.actual_km:g}", f"{r.predicted_km:.4f}", f"{r.percent_error:.4f}"])
        return buf.getvalue()

    def scatter_csv(self) -> str:
        lines = ["split,actual_km,predicted_km"]
        lines += [f"{s},{a:g},{p:.6f}" for s, a, p in self.scatter]
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        title = SCHEME_TITLES.get(self.scheme, self.scheme)
        head = "| | " + " | ".join(f"{r.actual_km:g}" for r in self.rows) + " |"
        sep = "|---" * (len(self.rows) + 1) + "|"
        pred = "| Predicted distance (km) | " + " | ".join(f"{r.predicted_km:.4f}" for r in self.rows) + " |"
        err = "| % error | " + " | ".join(f"{r.percent_error:.4f}" for r in self.rows) + " |"
        return "\n".join([
            f"### {title}: {self.descriptor}",
            "",
            head.replace("| |", "| Actual distance (km) |", 1),
            sep,
            pred,
            err,
            "",
            f"Normalized MSE: {self.mse_normalized:.3E}; max % error: {self.max_percent_error:.4f}",
            f"Percent error denominator: {self.denominator_km:g} km. Config hash: `{self.config_hash[:16]}`",
            "",
        ])


def evaluate(data_dir, model_path, denominator_km: float = DEFAULT_DENOMINATOR_KM) -> EvalReport:
    """Predict the held-out rows of the model's scheme."""
    root = Path(data_dir)
    manifest = load_manifest(root)
    model = load_model(model_path)
    meta = model.meta
    if meta.get("config_hash") != manifest.config_hash:
        raise CompatibilityError(
            f"model {Path(model_path).name} was trained on config {str(meta.get('config_hash'))[:12]}, "
            f"dataset is {manifest.config_hash[:12]}; refusing to evaluate"
        )
    scheme = meta["scheme"]
    if scheme not in manifest.schemes:
        raise CompatibilityError(f"scheme {scheme!r} not in dataset")
    test = manifest.entries(scheme, "test")
    pred = model.predict_km(load_rows(root, manifest, meta["reduction"], test))
    actual = np.array([e.distance_km for e in test])
    pe = percent_error(actual, pred, denominator_km)
    rows = [EvalRow(float(a), float(p), float(e)) for a, p, e in zip(actual, pred, pe)]
    every = manifest.entries(scheme)
    pred_all = model.predict_km(load_rows(root, manifest, meta["reduction"], every))
    scatter = [(e.split, e.distance_km, float(p)) for e, p in zip(every, pred_all)]
    return EvalReport(
        scheme=scheme,
        descriptor=model.descriptor,
        config_hash=manifest.config_hash,
        denominator_km=denominator_km,
        rows=rows,
        mse_normalized=mse_normalized(actual, pred, manifest.norm_spec()),
        scatter=scatter,
    )


def eval_cmd(data_dir, model_path, denominator_km: float = DEFAULT_DENOMINATOR_KM, out_dir=None) -> EvalReport:
    rep = evaluate(data_dir, model_path, denominator_km)
    out = Path(out_dir) if out_dir else Path(data_dir) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(model_path).stem
    (out / f"{stem}.csv").write_text(rep.to_csv())
    (out / f"{stem}.md").write_text(rep.to_markdown())
    (out / f"{stem}_scatter.csv").write_text(rep.scatter_csv())
    return rep


def best_by_scheme(reports: list[EvalReport], kind: str) -> dict[str, EvalReport]:
    """Lowest normalized test MSE per scheme among reports of ``kind``."""
    best: dict[str, EvalReport] = {}
    for r in reports:
        if r.kind == kind and (r.scheme not in best or r.mse_normalized < best[r.scheme].mse_normalized):
            best[r.scheme] = r
    return best


def comparison_table(reports: list[EvalReport], schemes: list[str]) -> str:
    ann = best_by_scheme(reports, "ann")
    svr = best_by_scheme(reports, "svr")
    lines = [
        "| Grounding | Cascade-forward ANN MSE | SVR MSE | Better |",
        "|---|---|---|---|",
    ]
    for s in schemes:
        a, v = ann.get(s), svr.get(s)
        a_txt = f"{a.mse_normalized:.3E} ({a.descriptor})" if a else "n/a"
        v_txt = f"{v.mse_normalized:.3E}" if v else "n/a"
        better = "n/a"
        if a and v:
            better = "ANN" if a.mse_normalized < v.mse_normalized else "SVR"
        lines.append(f"| {SCHEME_TITLES.get(s, s)} | {a_txt} | {v_txt} | {better} |")
    return "\n".join(lines) + "\n"


def _model_files(data_dir, model_paths) -> list[Path]:
    if model_paths:
        return [Path(p) for p in model_paths]
    return sorted(p for p in (Path(data_dir) / "models").glob("*.json"))


def compare_cmd(data_dir, model_paths=None, denominator_km: float = DEFAULT_DENOMINATOR_KM,
                out_dir=None) -> tuple[str, list[EvalReport]]:
    root = Path(data_dir)
    manifest = load_manifest(root)
    reports = [evaluate(root, p, denominator_km) for p in _model_files(root, model_paths)]
    table = comparison_table(reports, manifest.schemes)
    out = Path(out_dir) if out_dir else root / "reports"
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.md").write_text(
        "## Test MSE, best cascade-forward ANN vs SVR\n\n" + table
        + f"\nConfig hash: `{manifest.config_hash}`\n"
    )
    return table, reports


def report_cmd(data_dir, model_paths=None, denominator_km: float = DEFAULT_DENOMINATOR_KM,
               out_dir=None) -> str:
    """One markdown document: best ANN per scheme, comparison, and every model."""
    root = Path(data_dir)
    manifest = load_manifest(root)
    reports = [evaluate(root, p, denominator_km) for p in _model_files(root, model_paths)]
    best = best_by_scheme(reports, "ann")
    parts = [
        "# Fault location results",
        "",
        f"Config hash: `{manifest.config_hash}`",
        "",
        f"Percent error = |actual - predicted| / {denominator_km:g} km x 100. "
        "The default 195 km is the span of the distance grid (200 - 5 km); "
        "pass a denominator of 200 to divide by the full line length instead.",
        "MSE is computed after mapping both distances onto [0.1, 0.9].",
        "",
        "## Best cascade-forward ANN per grounding scheme",
        "",
    ]
    parts += [best[s].to_markdown() for s in manifest.schemes if s in best]
    parts += ["## ANN vs SVR", "", comparison_table(reports, manifest.schemes)]
    parts += ["## All models", "", "| Scheme | Model | Normalized MSE | Max % error |", "|---|---|---|---|"]
    for r in sorted(reports, key=lambda r: (manifest.schemes.index(r.scheme), r.descriptor)):
        parts.append(f"| {r.scheme} | {r.descriptor} | {r.mse_normalized:.3E} | {r.max_percent_error:.4f} |")
    text = "\n".join(parts) + "\n"
    out = Path(out_dir) if out_dir else root / "reports"
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.md").write_text(text)
    return text
