from rxfault.pipeline.commands import (
    CompatibilityError,
    EvalReport,
    EvalRow,
    PairingError,
    compare_cmd,
    eval_cmd,
    evaluate,
    report_cmd,
    train_cmd,
)
from rxfault.pipeline.config import ConfigError, PipelineConfig
from rxfault.pipeline.dataset import (
    DatasetManifest,
    ScenarioEntry,
    ScenarioError,
    generate,
    load_manifest,
    simulate,
)
from rxfault.pipeline.experiment import ExperimentResult, run_experiment
from rxfault.pipeline.metrics import mse_normalized, percent_error
