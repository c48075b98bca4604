"""Scenario sweep: fault simulation, relay locus, image, features, manifest."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from rxfault.features import ReductionMode, reduce
from rxfault.gridsim import FaultSpec, fault_loop_impedance, prefault_state, solve_slg
from rxfault.neuralnet import NormalizationSpec
from rxfault.pipeline.config import PipelineConfig
from rxfault.raster import normalize_pixels, rasterize, write_pgm
from rxfault.relaydsp import ImpedanceLocus, compute_locus, synthesize_waveforms

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


class ScenarioError(RuntimeError):
    pass


def scenario_id(scheme: str, distance_km: float) -> str:
    return f"{scheme}_{distance_km:g}"


def simulate(cfg: PipelineConfig, scheme: str, distance_km: float) -> tuple[ImpedanceLocus, np.ndarray]:
    """Relay locus and rendered image for one fault; pure function of its inputs."""
    sid = scenario_id(scheme, distance_km)
    try:
        model = cfg.system_model(scheme)
        sc = cfg.scenarios
        fault = FaultSpec(distance_km, sc.rf_ohm, sc.t_on_s, sc.duration_s)
        during = solve_slg(model, fault)
        rec = synthesize_waveforms(
            prefault_state(model), during, fault, cfg.relay.fs_hz, cfg.relay.dc_offset,
            f0=model.f0, loop_impedance=fault_loop_impedance(model, fault),
        )
        floor = cfg.relay.current_floor_fraction * model.nominal_load_current()
        locus = compute_locus(rec, model.line, model.f0, current_floor=floor)
        img = rasterize(locus, cfg.viewport(), increment=cfg.raster.increment)
    except Exception as exc:
        raise ScenarioError(f"scenario {sid}: {exc}") from exc
    return locus, img


def _simulate_job(args):
    return simulate(*args)


@dataclass
class ScenarioEntry:
    id: str
    scheme: str
    rn_ohm: float
    distance_km: float
    rf_ohm: float
    image: str
    row: int
    split: str


@dataclass
class DatasetManifest:
    config_hash: str
    config: dict
    normalization: dict
    reductions: list[str]
    feature_files: dict
    scenarios: list[ScenarioEntry] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    def norm_spec(self) -> NormalizationSpec:
        return NormalizationSpec(self.normalization["x_min"], self.normalization["x_max"])

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig.from_dict(self.config)

    def entries(self, scheme: str, split: str | None = None) -> list[ScenarioEntry]:
        out = [e for e in self.scenarios if e.scheme == scheme and (split is None or e.split == split)]
        if not out:
            what = f"{split} rows" if split else "rows"
            raise ScenarioError(f"no {what} for scheme {scheme!r} in manifest")
        return sorted(out, key=lambda e: e.distance_km)

    @property
    def schemes(self) -> list[str]:
        return list(dict.fromkeys(e.scheme for e in self.scenarios))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["format"] = "rxfault-manifest"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> DatasetManifest:
        if d.get("format") != "rxfault-manifest" or d.get("version") != MANIFEST_VERSION:
            raise ValueError("not a supported dataset manifest")
        return cls(
            config_hash=d["config_hash"],
            config=d["config"],
            normalization=d["normalization"],
            reductions=list(d["reductions"]),
            feature_files=dict(d["feature_files"]),
            scenarios=[ScenarioEntry(**e) for e in d["scenarios"]],
        )

    def save(self, root) -> Path:
        path = Path(root) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        return path


def load_manifest(root) -> DatasetManifest:
    path = Path(root) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} under {root}; run generate first")
    return DatasetManifest.from_dict(json.loads(path.read_text()))


def feature_header(mode: ReductionMode, n: int) -> list[str]:
    half = n // 2
    return ["id"] + [f"{mode.label}:mean{i}" for i in range(half)] + [
        f"{mode.label}:std{i}" for i in range(half)
    ]


def write_features(path, ids: list[str], mode: ReductionMode, matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(feature_header(mode, matrix.shape[1]))
        for sid, row in zip(ids, matrix):
            w.writerow([sid] + [repr(float(v)) for v in row])


def read_features(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    ids = [r[0] for r in rows[1:]]
    return ids, np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def load_rows(root, manifest: DatasetManifest, reduction: str, entries: list[ScenarioEntry]) -> np.ndarray:
    """Feature rows of ``entries`` for one reduction, checked against the manifest."""
    label = ReductionMode.parse(reduction).label
    if label not in manifest.feature_files:
        raise ScenarioError(
            f"reduction {label!r} not generated; available: {', '.join(manifest.reductions)}"
        )
    ids, matrix = read_features(Path(root) / manifest.feature_files[label])
    for e in entries:
        if ids[e.row] != e.id:
            raise ScenarioError(f"feature row {e.row} is {ids[e.row]!r}, manifest says {e.id!r}")
    return matrix[[e.row for e in entries]]


def generate(cfg: PipelineConfig, out_dir, *, debug_loci: bool = False, workers: int = 1) -> DatasetManifest:
    """Simulate every scheme x distance and write images, features and manifest."""
    root = Path(out_dir)
    (root / "images").mkdir(parents=True, exist_ok=True)
    if debug_loci:
        (root / "loci").mkdir(exist_ok=True)
    sc = cfg.scenarios
    jobs = [(cfg, s, d) for s in sc.schemes for d in sc.distances_km]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_job, jobs))
    else:
        results = [_simulate_job(j) for j in jobs]

    modes = [ReductionMode.parse(r) for r in cfg.features.reductions]
    feats = {m.label: [] for m in modes}
    entries = []
    for row, ((_, scheme, d), (locus, img)) in enumerate(zip(jobs, results)):
        sid = scenario_id(scheme, d)
        rel = f"images/{sid}.pgm"
        write_pgm(img, root / rel)
        if debug_loci:
            (root / "loci" / f"{sid}.csv").write_text(locus.to_csv())
        px = normalize_pixels(img)
        for m in modes:
            feats[m.label].append(reduce(px, m))
        g = cfg.grounding(scheme)
        entries.append(ScenarioEntry(
            id=sid, scheme=scheme, rn_ohm=g.rn_ohm, distance_km=d, rf_ohm=sc.rf_ohm,
            image=rel, row=row, split="test" if d >= sc.test_from_km else "train",
        ))

    ids = [e.id for e in entries]
    files = {}
    for m in modes:
        name = f"features_{m.label}.csv"
        write_features(root / name, ids, m, np.array(feats[m.label]))
        files[m.label] = name
    manifest = DatasetManifest(
        config_hash=cfg.hash(),
        config=cfg.to_dict(),
        normalization={"x_min": cfg.normalization.x_min, "x_max": cfg.normalization.x_max},
        reductions=[m.label for m in modes],
        feature_files=files,
        scenarios=entries,
    )
    (root / "config.yaml").write_text(cfg.to_yaml())
    manifest.save(root)
    return manifest
