"""Relay signal chain: waveform synthesis, full-cycle DFT, ground-loop impedance."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rxfault.gridsim import FaultSpec, SequenceLineParams, TerminalState

CHANNELS = ("va", "vb", "vc", "ia", "ib", "ic")


class LocusError(ValueError):
    pass


@dataclass(frozen=True)
class SampleRecord:
    fs: float
    t0: float
    samples: dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {len(v) for v in self.samples.values()}
        if len(lengths) != 1:
            raise ValueError("all channels must have equal length")

    def __len__(self) -> int:
        return len(next(iter(self.samples.values())))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.fs


@dataclass(frozen=True)
class ImpedanceLocus:
    r: np.ndarray
    x: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if len(self.r) == 0:
            raise LocusError("empty locus")

    def __len__(self) -> int:
        return len(self.r)

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.r.tolist(), self.x.tolist(), self.t.tolist()))

    def to_csv(self) -> str:
        lines = ["t,r,x"]
        lines += [f"{t!r},{r!r},{x!r}" for r, x, t in self.points]
        return "\n".join(lines) + "\n"


def samples_per_cycle(fs: float, f0: float) -> int:
    n = fs / f0
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"fs={fs} is not an integer multiple of f0={f0}")
    return int(round(n))


def dc_time_constant(loop_impedance: complex, f0: float) -> float:
    w = 2 * math.pi * f0
    if loop_impedance.real <= 0 or loop_impedance.imag <= 0:
        raise ValueError("fault loop must be resistive-inductive for DC decay")
    return loop_impedance.imag / (w * loop_impedance.real)


def synthesize_waveforms(
    pre: TerminalState,
    during: TerminalState,
    fault: FaultSpec,
    fs: float,
    dc_offset: bool = False,
    *,
    f0: float = 50.0,
    loop_impedance: complex | None = None,
) -> SampleRecord:
    """Sample the six relay channels over ``[t_on - 2 cycles, t_on + duration)``.

    With ``dc_offset`` each current channel gets ``A*exp(-(t - t_on)/tau)``
    after inception, ``A`` chosen so the current is continuous at ``t_on`` and
    ``tau`` from ``loop_impedance`` (X/(w R)).
    """
    spc = samples_per_cycle(fs, f0)
    if spc < 16:
        raise ValueError("need at least 16 samples per cycle")
    if fault.duration < 1.0 / f0:
        raise ValueError("fault duration shorter than one cycle: no full-cycle window fits")
    w = 2 * math.pi * f0
    n_pre = 2 * spc
    n_fault = int(round(fault.duration * fs))
    k = np.arange(n_pre + n_fault)
    t0 = fault.t_on - n_pre / fs
    t = t0 + k / fs
    rot = np.exp(1j * w * t)
    is_fault = k >= n_pre
    rot_on = np.exp(1j * w * fault.t_on)

    tau = None
    if dc_offset:
        if loop_impedance is None:
            raise ValueError("dc_offset requires the fault loop impedance")
        tau = dc_time_constant(loop_impedance, f0)

    samples = {}
    for ch in CHANNELS:
        p_pre = getattr(pre, ch)
        p_dur = getattr(during, ch)
        x = np.where(is_fault, (p_dur * rot).real, (p_pre * rot).real)
        if tau is not None and ch.startswith("i"):
            amp = (p_pre * rot_on).real - (p_dur * rot_on).real
            x = x + np.where(is_fault, amp * np.exp(-(t - fault.t_on) / tau), 0.0)
        samples[ch] = x
    return SampleRecord(fs=float(fs), t0=float(t0), samples=samples)


def _dft_kernel(n: int) -> np.ndarray:
    return (2.0 / n) * np.exp(-2j * np.pi * np.arange(n) / n)


def fullcycle_dft(window, f0: float, fs: float) -> complex:
    """Fundamental phasor (peak) of exactly one cycle, referenced to the first sample."""
    n = samples_per_cycle(fs, f0)
    window = np.asarray(window, dtype=float)
    if window.shape != (n,):
        raise ValueError(f"window must hold exactly {n} samples, got {window.shape}")
    return complex(window @ _dft_kernel(n))


def k0_factor(z1: complex, z0: complex) -> complex:
    if z1 == 0:
        raise ValueError("z1 must be nonzero")
    return (z0 - z1) / (3 * z1)


def apparent_impedance(
    va: complex, ia: complex, i0: complex, k0: complex, current_floor: float = 0.0
) -> complex:
    """Phase-A ground-loop impedance ``va / (ia + 3 k0 i0)``."""
    i_comp = ia + k0 * 3 * i0
    if not abs(i_comp) > current_floor:
        raise LocusError("locus point undefined: compensated current below floor")
    return va / i_comp


def sliding_phasors(x: np.ndarray, n: int) -> np.ndarray:
    """Full-cycle DFT of every length-``n`` window, one sample apart."""
    windows = np.lib.stride_tricks.sliding_window_view(np.asarray(x, dtype=float), n)
    return windows @ _dft_kernel(n)


def compute_locus(
    rec: SampleRecord,
    line: SequenceLineParams,
    f0: float = 50.0,
    current_floor: float | None = None,
) -> ImpedanceLocus:
    """Phase-A ground-loop impedance for every full-cycle window of ``rec``.

    Each point is stamped with the time of the window's last sample.  Windows
    whose compensated current magnitude is at or below ``current_floor`` are
    skipped; the default floor is 1% of the current in the first window.
    """
    n = samples_per_cycle(rec.fs, f0)
    if len(rec) < 3 * n:
        raise LocusError("record must span at least three cycles")
    s = rec.samples
    i0 = (s["ia"] + s["ib"] + s["ic"]) / 3.0
    va = sliding_phasors(s["va"], n)
    ia = sliding_phasors(s["ia"], n)
    i0p = sliding_phasors(i0, n)
    k0 = k0_factor(line.z1_per_km, line.z0_per_km)
    i_comp = ia + 3 * k0 * i0p
    if current_floor is None:
        current_floor = max(0.01 * abs(ia[0]), 1e-9)
    keep = np.abs(i_comp) > current_floor
    if not keep.any():
        raise LocusError("no window passes the current floor")
    z = va[keep] / i_comp[keep]
    t = rec.times[n - 1:][keep]
    return ImpedanceLocus(r=z.real.copy(), x=z.imag.copy(), t=t)
