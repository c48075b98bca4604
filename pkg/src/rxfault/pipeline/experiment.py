"""The full study: generate, fit every model per scheme, evaluate and report."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from rxfault.pipeline.commands import (
    EvalReport,
    best_by_scheme,
    compare_cmd,
    eval_cmd,
    report_cmd,
    train_cmd,
)
from rxfault.pipeline.config import PipelineConfig
from rxfault.pipeline.dataset import DatasetManifest, generate

logger = logging.getLogger(__name__)

# (kind, trainer, reduction): the two ANN routes plus the SVR baseline
DEFAULT_PLAN = (
    ("ann", "cgb", "per_column"),
    ("ann", "lm", "block8"),
)


@dataclass
class ExperimentResult:
    manifest: DatasetManifest
    reports: list[EvalReport]

    def best_ann(self) -> dict[str, EvalReport]:
        return best_by_scheme(self.reports, "ann")

    def svr(self) -> dict[str, EvalReport]:
        return best_by_scheme(self.reports, "svr")


def run_experiment(cfg: PipelineConfig, workdir, *, seed: int | None = None,
                   plan=DEFAULT_PLAN, with_svr: bool = True, workers: int = 1) -> ExperimentResult:
    root = Path(workdir)
    manifest = generate(cfg, root, workers=workers)
    reports = []
    for scheme in cfg.scenarios.schemes:
        jobs = [(k, t, r) for k, t, r in plan]
        if with_svr:
            jobs.append(("svr", None, cfg.svr.reduction))
        for kind, trainer, reduction in jobs:
            path = train_cmd(root, scheme, kind, trainer or "", reduction, seed)
            reports.append(eval_cmd(root, path))
            logger.info("%s %s: mse %.3g max %% err %.2f", scheme, reports[-1].descriptor,
                        reports[-1].mse_normalized, reports[-1].max_percent_error)
    compare_cmd(root)
    report_cmd(root)
    return ExperimentResult(manifest, reports)
