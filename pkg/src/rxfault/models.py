"""Self-contained model documents for the distance estimators.

Both model kinds store everything needed for inference: feature
standardization, the target normalization and the fitted parameters.  Files
are JSON with a format version; floats are written with ``repr`` precision so
a save/load round trip is exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rxfault.features import Standardizer
from rxfault.neuralnet import (
    CascadeNet,
    NormalizationSpec,
    Topology,
    TrainConfig,
    dminmax_inverse,
    forward,
)
from rxfault.svr import SvrModel

FORMAT_VERSION = 1


def _source_name(src: int) -> str:
    return "input" if src == 0 else f"hidden{src}"


def _weights_doc(net: CascadeNet) -> list[dict]:
    topo = net.topology
    layers = []
    for l, (w, b) in enumerate(net.layers()):
        blocks, pos = [], 0
        for src in topo.sources(l):
            width = topo.source_width(src)
            blocks.append({
                "source": _source_name(src),
                "shape": [int(w.shape[0]), width],
                "values": w[:, pos:pos + width].ravel().tolist(),
            })
            pos += width
        name = "output" if l == topo.n_layers - 1 else f"hidden{l + 1}"
        layers.append({"layer": name, "blocks": blocks, "bias": b.tolist()})
    return layers


def _net_from_doc(topo: Topology, layers: list[dict]) -> CascadeNet:
    net = CascadeNet(topo, np.zeros(topo.n_params))
    for l, ((w, b), doc) in enumerate(zip(net.layers(), layers, strict=True)):
        expected = [_source_name(s) for s in topo.sources(l)]
        if [blk["source"] for blk in doc["blocks"]] != expected:
            raise ValueError(f"layer {l}: block order does not match topology")
        pos = 0
        for blk, src in zip(doc["blocks"], topo.sources(l)):
            width = topo.source_width(src)
            w[:, pos:pos + width] = np.asarray(blk["values"], float).reshape(w.shape[0], width)
            pos += width
        b[:] = doc["bias"]
    return net


@dataclass
class AnnModel:
    net: CascadeNet
    standardizer: Standardizer
    norm: NormalizationSpec
    train_config: TrainConfig
    train_mse: list[float] = field(default_factory=list)
    stop_reason: str = ""
    meta: dict = field(default_factory=dict)

    kind = "ann"

    @property
    def final_mse(self) -> float:
        return self.train_mse[-1] if self.train_mse else float("nan")

    def predict_km(self, features) -> np.ndarray:
        f = np.atleast_2d(np.asarray(features, float))
        out = np.atleast_1d(forward(self.net, self.standardizer.transform(f)))
        return dminmax_inverse(out, self.norm)

    @property
    def descriptor(self) -> str:
        return f"ann-{self.train_config.algorithm}-{self.meta.get('reduction', '?')}"

    def to_dict(self) -> dict:
        return {
            "format": "rxfault-model",
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "meta": self.meta,
            "topology": self.net.topology.to_dict(),
            "block_order": "per layer: input, hidden1, ..., hidden(l-1); values row-major (unit, source)",
            "weights": _weights_doc(self.net),
            "standardization": self.standardizer.to_dict(),
            "normalization": {"x_min": self.norm.x_min, "x_max": self.norm.x_max},
            "train_config": self.train_config.to_dict(),
            "final_mse": self.final_mse,
            "stop_reason": self.stop_reason,
            "train_mse": self.train_mse,
        }

    @classmethod
    def from_dict(cls, d: dict) -> AnnModel:
        topo = Topology.from_dict(d["topology"])
        return cls(
            net=_net_from_doc(topo, d["weights"]),
            standardizer=Standardizer.from_dict(d["standardization"]),
            norm=NormalizationSpec(**d["normalization"]),
            train_config=TrainConfig(**d["train_config"]),
            train_mse=list(d.get("train_mse", [])),
            stop_reason=d.get("stop_reason", ""),
            meta=dict(d.get("meta", {})),
        )


@dataclass
class SvrRegressor:
    svr: SvrModel
    standardizer: Standardizer
    norm: NormalizationSpec
    search: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    kind = "svr"

    def predict_km(self, features) -> np.ndarray:
        f = np.atleast_2d(np.asarray(features, float))
        return dminmax_inverse(self.svr.decision(self.standardizer.transform(f)), self.norm)

    @property
    def descriptor(self) -> str:
        return f"svr-rbf-{self.meta.get('reduction', '?')}"

    def to_dict(self) -> dict:
        return {
            "format": "rxfault-model",
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "meta": self.meta,
            "svr": self.svr.to_dict(),
            "standardization": self.standardizer.to_dict(),
            "normalization": {"x_min": self.norm.x_min, "x_max": self.norm.x_max},
            "search": self.search,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SvrRegressor:
        return cls(
            svr=SvrModel.from_dict(d["svr"]),
            standardizer=Standardizer.from_dict(d["standardization"]),
            norm=NormalizationSpec(**d["normalization"]),
            search=dict(d.get("search", {})),
            meta=dict(d.get("meta", {})),
        )


def save_model(model: AnnModel | SvrRegressor, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n")


def load_model(path) -> AnnModel | SvrRegressor:
    d = json.loads(Path(path).read_text())
    if d.get("format") != "rxfault-model":
        raise ValueError(f"{path}: not a model file")
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {d.get('version')}")
    kinds = {"ann": AnnModel, "svr": SvrRegressor}
    if d.get("kind") not in kinds:
        raise ValueError(f"{path}: unknown model kind {d.get('kind')!r}")
    return kinds[d["kind"]].from_dict(d)
