"""Phasor-domain single-line-to-ground fault solver for a two-source line.

The network is a relay bus S (local source behind its transformer), a
homogeneous line of length L, and a remote bus R carrying the remote source
and a constant-impedance load.  An SLG fault on phase A at distance d from S
connects the positive, negative and zero sequence networks in series.

Conventions
-----------
* Phasors are Python ``complex`` values in peak amplitude:
  ``x(t) = Re(X * exp(j*w*t))``.
* Sequence order is ``(0, 1, 2)``; ``phase = FORTESCUE @ seq``.
* The relay branch current is the current in the series line element leaving
  bus S toward the fault.  Zero-sequence line capacitance is lumped as pi
  halves on the bus side, so it is not seen by the relay CT.
* Positive/negative-sequence line capacitance is neglected (``c1_per_km`` is
  carried for completeness only).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

A_OP = cmath.exp(2j * math.pi / 3)
FORTESCUE = np.array(
    [[1, 1, 1], [1, A_OP**2, A_OP], [1, A_OP, A_OP**2]], dtype=complex
)
FORTESCUE_INV = np.linalg.inv(FORTESCUE)

NOMINAL_KV = 154.0


class NetworkError(ValueError):
    """Raised when a network model cannot be solved (singular or invalid)."""


def to_sequence(abc) -> np.ndarray:
    """Phase triple ``(a, b, c)`` to sequence triple ``(0, 1, 2)``."""
    return FORTESCUE_INV @ np.asarray(abc, dtype=complex)


def to_phase(seq) -> np.ndarray:
    """Sequence triple ``(0, 1, 2)`` to phase triple ``(a, b, c)``."""
    return FORTESCUE @ np.asarray(seq, dtype=complex)


def phase_voltage_peak(kv_ll: float = NOMINAL_KV) -> float:
    return kv_ll * 1e3 * math.sqrt(2.0) / math.sqrt(3.0)


@dataclass(frozen=True)
class SequenceLineParams:
    z1_per_km: complex = 0.05 + 0.45j
    z0_per_km: complex = 0.25 + 1.35j
    c1_per_km: float = 9e-9
    c0_per_km: float = 5.5e-9
    length_km: float = 200.0

    def __post_init__(self):
        if not self.length_km > 0:
            raise ValueError(f"line length must be positive, got {self.length_km}")
        for name in ("z1_per_km", "z0_per_km"):
            z = complex(getattr(self, name))
            if z.real < 0 or z.imag <= 0:
                raise ValueError(f"{name} needs Re >= 0 and Im > 0, got {z}")
        if self.c1_per_km < 0 or self.c0_per_km < 0:
            raise ValueError("shunt capacitances must be non-negative")


@dataclass(frozen=True)
class GroundingScheme:
    """Transformer neutral treatment: ``ungrounded``, ``solid`` or ``impedance``."""

    kind: str
    rn_ohm: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ungrounded", "solid", "impedance"):
            raise ValueError(f"unknown grounding kind {self.kind!r}")
        if self.kind == "impedance" and not self.rn_ohm > 0:
            raise ValueError("impedance grounding needs rn_ohm > 0")
        if self.kind != "impedance" and self.rn_ohm != 0.0:
            raise ValueError(f"rn_ohm only applies to impedance grounding")

    @classmethod
    def ungrounded(cls) -> GroundingScheme:
        return cls("ungrounded")

    @classmethod
    def solid(cls) -> GroundingScheme:
        return cls("solid")

    @classmethod
    def impedance(cls, rn_ohm: float = 5.0) -> GroundingScheme:
        return cls("impedance", rn_ohm)

    @property
    def grounded(self) -> bool:
        return self.kind != "ungrounded"

    @property
    def slug(self) -> str:
        return self.kind

    @classmethod
    def parse(cls, text: str, rn_ohm: float = 5.0) -> GroundingScheme:
        text = text.strip().lower()
        if text == "impedance":
            return cls.impedance(rn_ohm)
        return cls(text)


@dataclass(frozen=True)
class SourceParams:
    emf: complex
    z1_src: complex
    z0_src: complex
    grounding: GroundingScheme = field(default_factory=GroundingScheme.solid)

    def __post_init__(self):
        if abs(self.emf) == 0:
            raise ValueError("source EMF must be nonzero")

    def zero_seq_admittance(self) -> complex:
        """Admittance of the neutral path to ground; 0 when ungrounded."""
        if not self.grounding.grounded:
            return 0j
        z = self.z0_src + 3.0 * self.grounding.rn_ohm
        if z == 0:
            raise NetworkError("zero-sequence source path has zero impedance")
        return 1.0 / z


@dataclass(frozen=True)
class FaultSpec:
    distance_km: float
    rf_ohm: float = 1.0
    t_on: float = 0.3
    duration: float = 0.05

    def __post_init__(self):
        if not self.distance_km > 0:
            raise ValueError(f"fault distance must be positive, got {self.distance_km}")
        if self.rf_ohm < 0:
            raise ValueError("fault resistance must be non-negative")


@dataclass(frozen=True)
class SystemModel:
    line: SequenceLineParams
    src_local: SourceParams
    src_remote: SourceParams | None
    load_mw: float = 25.0
    f0: float = 50.0
    kv_ll: float = NOMINAL_KV

    def __post_init__(self):
        if self.load_mw < 0:
            raise ValueError("load must be non-negative")
        if not self.f0 > 0:
            raise ValueError("f0 must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.f0

    def load_impedance(self) -> complex | None:
        """Per-phase wye load impedance at nominal voltage, unity power factor."""
        if self.load_mw == 0:
            return None
        return complex((self.kv_ll * 1e3) ** 2 / (self.load_mw * 1e6))

    def nominal_load_current(self) -> float:
        """Peak phase current of the load at nominal voltage."""
        z = self.load_impedance()
        return 0.0 if z is None else phase_voltage_peak(self.kv_ll) / abs(z)

    def check_distance(self, distance_km: float) -> None:
        if not 0 < distance_km <= self.line.length_km:
            raise ValueError(
                f"distance exceeds line length: {distance_km} km on a "
                f"{self.line.length_km} km line"
            )

    # shunt admittances to ground seen at each bus with all EMFs shorted
    def bus_shunts(self, seq: int) -> tuple[complex, complex]:
        line = self.line
        if seq == 0:
            ycap = 1j * self.omega * line.c0_per_km * line.length_km / 2.0
            y_s = ycap + self.src_local.zero_seq_admittance()
            y_r = ycap
            if self.src_remote is not None:
                y_r += self.src_remote.zero_seq_admittance()
            return y_s, y_r
        y_s = 1.0 / self.src_local.z1_src
        y_r = 0j
        if self.src_remote is not None:
            y_r += 1.0 / self.src_remote.z1_src
        zl = self.load_impedance()
        if zl is not None:
            y_r += 1.0 / zl
        return y_s, y_r

    def line_z(self, seq: int) -> complex:
        return self.line.z0_per_km if seq == 0 else self.line.z1_per_km


@dataclass(frozen=True)
class TerminalState:
    """Relay-bus phase voltages and relay-branch phase currents."""

    va: complex
    vb: complex
    vc: complex
    ia: complex
    ib: complex
    ic: complex

    def __post_init__(self):
        vals = (self.va, self.vb, self.vc, self.ia, self.ib, self.ic)
        if not all(cmath.isfinite(v) for v in vals):
            raise NetworkError("non-finite terminal quantity")

    @property
    def i0(self) -> complex:
        return (self.ia + self.ib + self.ic) / 3.0

    @property
    def voltages(self) -> np.ndarray:
        return np.array([self.va, self.vb, self.vc])

    @property
    def currents(self) -> np.ndarray:
        return np.array([self.ia, self.ib, self.ic])

    @classmethod
    def from_arrays(cls, v, i) -> TerminalState:
        return cls(*(complex(x) for x in v), *(complex(x) for x in i))


def source_impedance(sc_mva: float, x_over_r: float, kv_ll: float = NOMINAL_KV) -> complex:
    """Thevenin impedance of a source with the given short-circuit level."""
    zmag = (kv_ll * 1e3) ** 2 / (sc_mva * 1e6)
    return zmag * complex(1.0, x_over_r) / math.hypot(1.0, x_over_r)


def default_model(
    grounding: GroundingScheme,
    *,
    line: SequenceLineParams | None = None,
    load_mw: float = 25.0,
    sc_mva: float = 2000.0,
    x_over_r: float = 10.0,
    z0_over_z1_src: float = 1.0,
    f0: float = 50.0,
    kv_ll: float = NOMINAL_KV,
    radial: bool = False,
) -> SystemModel:
    """Two-source model with both transformers sharing ``grounding``.

    EMFs are set so the remote bus sits at nominal voltage and the remote
    source exchanges no pre-fault power: the local source alone feeds the
    load through the line.  ``radial=True`` removes the remote source.
    """
    line = line or SequenceLineParams()
    zs = source_impedance(sc_mva, x_over_r, kv_ll)
    z0s = zs * z0_over_z1_src
    v_r = complex(phase_voltage_peak(kv_ll))
    i_load = 0j if load_mw == 0 else v_r / ((kv_ll * 1e3) ** 2 / (load_mw * 1e6))
    v_s = v_r + line.length_km * line.z1_per_km * i_load
    e_s = v_s + zs * i_load
    local = SourceParams(e_s, zs, z0s, grounding)
    remote = None if radial else SourceParams(v_r, zs, z0s, grounding)
    return SystemModel(line, local, remote, load_mw=load_mw, f0=f0, kv_ll=kv_ll)


def _solve(y: np.ndarray, inj: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(y)):
        raise NetworkError("non-finite admittance matrix")
    if np.linalg.cond(y) > 1e14:
        raise NetworkError("singular network")
    return np.linalg.solve(y, inj)


def prefault_line_flow(model: SystemModel) -> tuple[complex, complex, complex]:
    """Positive-sequence load flow: ``(V_S, V_R, I_line)`` from S toward R."""
    zl_total = model.line.length_km * model.line.z1_per_km
    y_line = 1.0 / zl_total
    y_s, y_r = model.bus_shunts(1)
    y = np.array([[y_s + y_line, -y_line], [-y_line, y_r + y_line]])
    inj = [model.src_local.emf / model.src_local.z1_src, 0j]
    if model.src_remote is not None:
        inj[1] = model.src_remote.emf / model.src_remote.z1_src
    v_s, v_r = _solve(y, np.array(inj))
    return complex(v_s), complex(v_r), complex((v_s - v_r) * y_line)


def prefault_state(model: SystemModel) -> TerminalState:
    """Balanced pre-fault phasors at the relay."""
    v_s, _, i_line = prefault_line_flow(model)
    a = A_OP
    return TerminalState(v_s, v_s * a * a, v_s * a, i_line, i_line * a * a, i_line * a)


@dataclass(frozen=True)
class SequenceThevenin:
    z1: complex
    z2: complex
    z0: complex
    d1: complex
    d0: complex

    def __iter__(self):
        return iter((self.z1, self.z2, self.z0, self.d1, self.d0))


def _branch_admittance(y_shunt: complex, z_series: complex) -> complex:
    # shunt (possibly open) in series with a line section
    return y_shunt / (1.0 + y_shunt * z_series)


def sequence_thevenin(model: SystemModel, distance_km: float) -> SequenceThevenin:
    """Driving-point impedances at the fault point and relay-branch shares.

    ``d1``/``d0`` are the fractions of the fault-point positive/zero sequence
    current carried by the relay branch.
    """
    model.check_distance(distance_km)
    d = distance_km
    rest = model.line.length_km - d
    out = {}
    for seq in (1, 0):
        y_s, y_r = model.bus_shunts(seq)
        z = model.line_z(seq)
        yb_s = _branch_admittance(y_s, d * z)
        yb_r = _branch_admittance(y_r, rest * z)
        total = yb_s + yb_r
        if abs(total) < 1e-15:
            name = "zero-sequence" if seq == 0 else "positive-sequence"
            raise NetworkError(f"{name} network singular")
        out[seq] = (1.0 / total, yb_s / total)
    z1, d1 = out[1]
    z0, d0 = out[0]
    return SequenceThevenin(z1, z1, z0, d1, d0)


def fault_loop_impedance(model: SystemModel, fault: FaultSpec) -> complex:
    """Positive-sequence relay-side loop impedance, used for DC-offset decay."""
    return model.src_local.z1_src + fault.distance_km * model.line.z1_per_km + fault.rf_ohm


def solve_slg(model: SystemModel, fault: FaultSpec) -> TerminalState:
    """During-fault steady state at the relay for a phase-A-to-ground fault."""
    th = sequence_thevenin(model, fault.distance_km)
    d = fault.distance_km
    v_s, _, i_line = prefault_line_flow(model)
    e_pre = v_s - d * model.line.z1_per_km * i_line
    denom = th.z1 + th.z2 + th.z0 + 3.0 * fault.rf_ohm
    if abs(denom) == 0:
        raise NetworkError("zero total fault-loop impedance")
    i_f = e_pre / denom

    shares = (th.d0, th.d1, th.d1)
    zeq = (th.z0, th.z1, th.z2)
    dv_seq = np.zeros(3, dtype=complex)
    di_seq = np.zeros(3, dtype=complex)
    for k in range(3):
        di_seq[k] = shares[k] * i_f
        # bus voltage change = fault-point change + drop along the relay section
        dv_seq[k] = -zeq[k] * i_f + d * model.line_z(k) * di_seq[k]

    pre = prefault_state(model)
    v = pre.voltages + to_phase(dv_seq)
    i = pre.currents + to_phase(di_seq)
    return TerminalState.from_arrays(v, i)


def fault_current(model: SystemModel, fault: FaultSpec) -> complex:
    """Total phase-A current into the fault (3 * I0 at the fault point)."""
    th = sequence_thevenin(model, fault.distance_km)
    v_s, _, i_line = prefault_line_flow(model)
    e_pre = v_s - fault.distance_km * model.line.z1_per_km * i_line
    return 3.0 * e_pre / (th.z1 + th.z2 + th.z0 + 3.0 * fault.rf_ohm)


def with_grounding(model: SystemModel, grounding: GroundingScheme) -> SystemModel:
    remote = model.src_remote
    return replace(
        model,
        src_local=replace(model.src_local, grounding=grounding),
        src_remote=None if remote is None else replace(remote, grounding=grounding),
    )
