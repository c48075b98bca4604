"""Independent reference implementations used by the tests."""
import numpy as np

A = np.exp(2j * np.pi / 3)


def phase_line_matrix(z1: complex, z0: complex) -> np.ndarray:
    """Self/mutual phase impedance matrix of a transposed section."""
    zs = (z0 + 2 * z1) / 3
    zm = (z0 - z1) / 3
    return np.full((3, 3), zm, dtype=complex) + np.eye(3) * (zs - zm)


class NodalNetwork:
    """Tiny phase-domain nodal solver used as an independent oracle."""

    def __init__(self):
        self.names: dict[str, int] = {}
        self.stamps: list = []
        self.inj: dict[int, complex] = {}

    def node(self, name: str) -> int:
        return self.names.setdefault(name, len(self.names))

    def branch(self, a: str | None, b: str | None, y: complex):
        """Admittance between nodes a and b (None is ground)."""
        self.stamps.append(([a, b], np.array([[y]])))

    def coupled(self, a: list, b: list, ymat: np.ndarray):
        """Coupled series element between node groups a and b."""
        self.stamps.append((list(a) + list(b), np.block([[ymat, -ymat], [-ymat, ymat]])))

    def shunt(self, nodes: list, ymat: np.ndarray):
        self.stamps.append((list(nodes), ymat))

    def source(self, name: str, current: complex):
        self.inj[self.node(name)] = self.inj.get(self.node(name), 0) + current

    def solve(self) -> dict[str, complex]:
        for nodes, _ in self.stamps:
            for n in nodes:
                if n is not None:
                    self.node(n)
        n = len(self.names)
        y = np.zeros((n, n), dtype=complex)
        for nodes, mat in self.stamps:
            if mat.shape == (1, 1):
                a, b = nodes
                v = mat[0, 0]
                ia = None if a is None else self.names[a]
                ib = None if b is None else self.names[b]
                if ia is not None:
                    y[ia, ia] += v
                if ib is not None:
                    y[ib, ib] += v
                if ia is not None and ib is not None:
                    y[ia, ib] -= v
                    y[ib, ia] -= v
                continue
            idx = [self.names[m] for m in nodes]
            y[np.ix_(idx, idx)] += mat
        rhs = np.zeros(n, dtype=complex)
        for k, v in self.inj.items():
            rhs[k] = v
        v = np.linalg.solve(y, rhs)
        return {name: v[k] for name, k in self.names.items()}


def phase_domain_relay(model, distance_km: float, rf_ohm: float | None):
    """Relay-bus voltages and S->F section currents from a full phase-domain solve.

    Sources are wye EMFs behind per-phase impedances with an explicit neutral
    node, the load is a floating-neutral wye, line sections carry self/mutual
    coupling and the zero-sequence charging sits at both buses as a
    capacitance shared equally by the three phases.  ``rf_ohm=None`` solves the
    healthy network.
    """
    line = model.line
    d, rest = distance_km, line.length_km - distance_km
    assert 0 < d < line.length_km
    net = NodalNetwork()
    ph = "abc"
    rot = (1, A * A, A)

    def add_source(bus, src):
        assert abs(src.z0_src - src.z1_src) < 1e-12, "oracle needs z0_src == z1_src"
        g = src.grounding
        neutral = None if g.kind == "solid" else f"N{bus}"
        for p, k in zip(ph, rot):
            y = 1 / src.z1_src
            net.branch(f"{bus}{p}", neutral, y)
            net.source(f"{bus}{p}", src.emf * k * y)
            if neutral is not None:
                net.source(neutral, -src.emf * k * y)
        if g.kind == "impedance":
            net.branch(neutral, None, 1 / g.rn_ohm)

    add_source("S", model.src_local)
    if model.src_remote is not None:
        add_source("R", model.src_remote)
    zab = phase_line_matrix(line.z1_per_km, line.z0_per_km)
    y_sf = np.linalg.inv(d * zab)
    net.coupled([f"S{p}" for p in ph], [f"F{p}" for p in ph], y_sf)
    net.coupled([f"F{p}" for p in ph], [f"R{p}" for p in ph], np.linalg.inv(rest * zab))
    ycap = 1j * model.omega * line.c0_per_km * line.length_km / 2 / 3
    for bus in "SR":
        net.shunt([f"{bus}{p}" for p in ph], np.full((3, 3), ycap))
    zl = model.load_impedance()
    if zl is not None:
        for p in ph:
            net.branch(f"R{p}", "NL", 1 / zl)
    if rf_ohm is not None:
        net.branch("Fa", None, 1 / rf_ohm)
    v = net.solve()
    vs = np.array([v[f"S{p}"] for p in ph])
    vf = np.array([v[f"F{p}"] for p in ph])
    return vs, y_sf @ (vs - vf)


def positive_sequence_zff(model, distance_km: float):
    """Driving-point impedance at the fault point and relay share, by nodal solve."""
    line = model.line
    d, rest = distance_km, line.length_km - distance_km
    y_s = 1 / model.src_local.z1_src
    y_r = 0j
    if model.src_remote is not None:
        y_r += 1 / model.src_remote.z1_src
    if model.load_impedance() is not None:
        y_r += 1 / model.load_impedance()
    a, b = 1 / (d * line.z1_per_km), 1 / (rest * line.z1_per_km)
    y = np.array([
        [y_s + a, -a, 0],
        [-a, a + b, -b],
        [0, -b, b + y_r],
    ])
    v = np.linalg.solve(y, np.array([0, -1.0, 0]))
    return -v[1], (v[0] - v[1]) * a


def fortescue_naive(abc):
    """Sequence components written out term by term."""
    va, vb, vc = abc
    return np.array([
        (va + vb + vc) / 3,
        (va + A * vb + A * A * vc) / 3,
        (va + A * A * vb + A * vc) / 3,
    ])
