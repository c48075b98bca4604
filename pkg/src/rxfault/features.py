"""Mean / population-std reduction of a normalized raster."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ReductionMode:
    """``global``, ``per_row``, ``per_column`` or ``block`` (k x k tiles)."""

    kind: str
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("global", "per_row", "per_column", "block"):
            raise ValueError(f"unknown reduction mode {self.kind!r}")
        if self.kind == "block" and self.k < 1:
            raise ValueError("block mode needs k >= 1")

    @classmethod
    def parse(cls, text: str) -> ReductionMode:
        text = text.strip().lower().replace("-", "_")
        m = re.fullmatch(r"block_?\(?(\d+)\)?", text)
        if m:
            return cls("block", int(m.group(1)))
        return cls(text)

    @property
    def label(self) -> str:
        return f"block{self.k}" if self.kind == "block" else self.kind

    def n_features(self, height: int, width: int) -> int:
        regions = {
            "global": 1,
            "per_row": height,
            "per_column": width,
            "block": self.k * self.k,
        }[self.kind]
        return 2 * regions


PER_COLUMN = ReductionMode("per_column")
BLOCK8 = ReductionMode("block", 8)


def tile_edges(n: int, k: int) -> list[int]:
    """Split ``n`` cells into ``k`` near-equal runs (sizes differ by at most one)."""
    return [(i * n) // k for i in range(k + 1)]


def _mean_std(values: np.ndarray, axis) -> tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=axis)
    dev = values - np.expand_dims(mean, axis) if axis is not None else values - mean
    std = np.sqrt((dev * dev).mean(axis=axis))
    return np.atleast_1d(mean), np.atleast_1d(std)


def reduce(img: np.ndarray, mode: ReductionMode) -> np.ndarray:
    """Feature vector ``[means..., stds...]`` over the regions of ``mode``.

    Regions are visited top-to-bottom / left-to-right (tiles row-major).  The
    standard deviation is the population (1/N) one.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    if mode.kind == "global":
        mean, std = _mean_std(img.ravel(), None)
    elif mode.kind == "per_row":
        mean, std = _mean_std(img, 1)
    elif mode.kind == "per_column":
        mean, std = _mean_std(img, 0)
    else:
        h, w = img.shape
        if mode.k > min(h, w):
            raise ValueError(f"block size {mode.k} exceeds image dimensions {img.shape}")
        re_, ce = tile_edges(h, mode.k), tile_edges(w, mode.k)
        means, stds = [], []
        for i in range(mode.k):
            for j in range(mode.k):
                tile = img[re_[i]:re_[i + 1], ce[j]:ce[j + 1]].ravel()
                m, s = _mean_std(tile, None)
                means.append(m[0])
                stds.append(s[0])
        mean, std = np.array(means), np.array(stds)
    return np.concatenate([mean, std])


@dataclass
class Standardizer:
    """Per-feature z-score fitted on training rows only.

    Features that are constant over the training rows carry no information
    and get a zero scale, so they map to 0 whatever their value at test time.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x, tol: float = 1e-12) -> Standardizer:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        mean = x.mean(axis=0)
        sd = x.std(axis=0)
        live = sd > tol
        scale = np.zeros_like(sd)
        scale[live] = 1.0 / sd[live]
        return cls(mean, scale)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != len(self.mean):
            raise ValueError(f"expected {len(self.mean)} features, got {x.shape[-1]}")
        return (x - self.mean) * self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Standardizer:
        return cls(np.asarray(d["mean"], float), np.asarray(d["scale"], float))
