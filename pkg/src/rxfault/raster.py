"""Render an R-X locus into a fixed 339x292 grayscale image and PGM I/O."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from rxfault.relaydsp import ImpedanceLocus

HEIGHT = 339
WIDTH = 292
_FAR = 1e12


class PGMError(ValueError):
    pass


@dataclass(frozen=True)
class Viewport:
    r_min: float = -50.0
    r_max: float = 150.0
    x_min: float = -50.0
    x_max: float = 150.0

    def __post_init__(self):
        if not (self.r_min < self.r_max and self.x_min < self.x_max):
            raise ValueError("viewport needs r_min < r_max and x_min < x_max")

    def to_pixel(self, r: float, x: float, height: int = HEIGHT, width: int = WIDTH):
        """Continuous (row, col); X grows upward, R grows rightward."""
        col = (r - self.r_min) / (self.r_max - self.r_min) * (width - 1)
        row = (self.x_max - x) / (self.x_max - self.x_min) * (height - 1)
        return row, col


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


def _clip_segment(p0, p1, lo, hi):
    """Liang-Barsky clip of a 2-D segment to the box ``lo <= p <= hi``."""
    (y0, x0), (y1, x1) = p0, p1
    dy, dx = y1 - y0, x1 - x0
    t_lo, t_hi = 0.0, 1.0
    for p, q in ((-dy, y0 - lo[0]), (dy, hi[0] - y0), (-dx, x0 - lo[1]), (dx, hi[1] - x0)):
        if p == 0:
            if q < 0:
                return None
            continue
        t = q / p
        if p < 0:
            t_lo = max(t_lo, t)
        else:
            t_hi = min(t_hi, t)
        if t_lo > t_hi:
            return None
    return (y0 + t_lo * dy, x0 + t_lo * dx), (y0 + t_hi * dy, x0 + t_hi * dx)


def bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Integer line from (r0, c0) to (r1, c1), both ends included."""
    pts = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        pts.append((r, c))
        if r == r1 and c == c1:
            return pts
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def rasterize(
    locus: ImpedanceLocus,
    vp: Viewport = Viewport(),
    *,
    increment: int = 32,
    height: int = HEIGHT,
    width: int = WIDTH,
    zone_reach: complex | None = None,
) -> np.ndarray:
    """Draw ``locus`` as a polyline on a ``height x width`` uint8 image.

    Every locus point adds ``increment`` to its own pixel and each segment adds
    it to the pixels strictly between its ends, so dwell time darkens pixels.
    Values saturate at 255; everything outside ``vp`` is clipped.
    ``zone_reach`` optionally overlays a mho circle through 0 and that reach.
    """
    acc = np.zeros((height, width), dtype=np.int64)
    lo, hi = (0.0, 0.0), (height - 1.0, width - 1.0)
    with np.errstate(over="ignore"):
        rows, cols = vp.to_pixel(
            np.asarray(locus.r, float), np.asarray(locus.x, float), height, width
        )
    # bound far-off points so clipping arithmetic stays finite
    rows = np.clip(rows, -_FAR, _FAR).tolist()
    cols = np.clip(cols, -_FAR, _FAR).tolist()
    pix = list(zip(rows, cols))

    def inside(p):
        return lo[0] <= p[0] <= hi[0] and lo[1] <= p[1] <= hi[1]

    def hit(rr, cc):
        if 0 <= rr < height and 0 <= cc < width:
            acc[rr, cc] += increment

    for p in pix:
        if inside(p):
            hit(_round(p[0]), _round(p[1]))
    for p0, p1 in zip(pix[:-1], pix[1:]):
        seg = _clip_segment(p0, p1, lo, hi)
        if seg is None:
            continue
        (a_r, a_c), (b_r, b_c) = seg
        line = bresenham(_round(a_r), _round(a_c), _round(b_r), _round(b_c))
        # endpoints that are real locus points were already counted above
        if inside(p0):
            line = line[1:]
        if inside(p1) and line:
            line = line[:-1]
        for rr, cc in line:
            hit(rr, cc)

    if zone_reach is not None:
        _draw_mho(acc, vp, zone_reach, increment, height, width)
    return np.minimum(acc, 255).astype(np.uint8)


def _draw_mho(acc, vp, reach, increment, height, width):
    center = reach / 2
    radius = abs(reach) / 2
    n = 4 * (height + width)
    seen = set()
    for k in range(n):
        z = center + radius * complex(math.cos(2 * math.pi * k / n), math.sin(2 * math.pi * k / n))
        row, col = vp.to_pixel(z.real, z.imag, height, width)
        rc = (_round(row), _round(col))
        if rc in seen or not (0 <= rc[0] < height and 0 <= rc[1] < width):
            continue
        seen.add(rc)
        acc[rc] = max(acc[rc], increment)


def normalize_pixels(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.size and (img.min() < 0 or img.max() > 255):
        raise ValueError("pixel values must lie in [0, 255]")
    return img.astype(np.float64) / 255.0


def write_pgm(img: np.ndarray, path) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise PGMError("write_pgm expects a 2-D uint8 image")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes(order="C"))


def _header_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise PGMError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise PGMError("truncated PGM header")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise PGMError(f"only binary P5 PGM is supported, got magic {data[:2]!r}")
    tokens, offset = _header_tokens(data, 4)
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PGMError("malformed PGM header") from exc
    if maxval != 255:
        raise PGMError(f"maxval must be 255, got {maxval}")
    if w <= 0 or h <= 0:
        raise PGMError("malformed PGM dimensions")
    payload = data[offset:offset + w * h]
    if len(payload) != w * h:
        raise PGMError(f"truncated payload: expected {w * h} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()
