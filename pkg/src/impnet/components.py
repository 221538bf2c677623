"""Small-signal blocks for passive elements, grids and power converters.

All quantities are per unit on a common power base; time is in seconds,
so an inductance ``L`` here is the coefficient of ``s`` (a reactance of
``x`` p.u. at the fundamental corresponds to ``L = x / omega1``).

Converters use the usual synchronous-reference-frame averaged model:
PI current control with decoupling and grid-voltage feed-forward, a
second-order SRF-PLL, and PI outer loops.  Linearization is done by hand
in the converter's local (PLL) frame; the independent nonlinear model in
:mod:`impnet.oracle` cross-checks these matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptyBranch,
    InvalidOperatingPoint,
    NoConvergence,
    RoleMismatch,
    UnsupportedMode,
    UnsupportedTopology,
)
from .frames import T_SYM, T_SYM_INV, FramedBlock, sym_decompose
from .lti import DescriptorSystem, classify_half_plane, poles

__all__ = [
    "OMEGA1",
    "OperatingPoint",
    "PassiveBranch",
    "VscDevice",
    "DcLink",
    "ThreePortConverter",
    "controller_gains",
    "branch_admittance_dq",
    "branch_impedance",
    "branch_admittance",
    "vsc_admittance",
    "vsc_impedance",
    "hvdc_converter",
    "solve_operating_point",
]

OMEGA1 = 2 * np.pi * 50.0
ZETA = 0.707
J = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatingPoint:
    """Steady state of one device in its own (PLL-aligned) frame.

    ``theta`` is the terminal-voltage angle relative to the area's common
    reference.  Currents follow the device's port convention (injection
    for grid-following converters, absorption for the V/f terminal), and
    ``Uq0 = 0`` in the local frame, so ``P0 = U0 Id0`` and ``Q0 = -U0 Iq0``.
    """

    theta: float = 0.0
    U0: float = 1.0
    P0: float = 0.0
    Q0: float = 0.0
    Id0: float | None = None
    Iq0: float | None = None
    Udc0: float | None = None

    def __post_init__(self):
        vals = [self.theta, self.U0, self.P0, self.Q0]
        if not all(np.isfinite(v) for v in vals) or self.U0 <= 0:
            raise InvalidOperatingPoint(f"non-physical operating point {self}")
        if self.Id0 is None:
            object.__setattr__(self, "Id0", self.P0 / self.U0)
        if self.Iq0 is None:
            object.__setattr__(self, "Iq0", -self.Q0 / self.U0)
        tol = 1e-8 * max(1.0, abs(self.P0), abs(self.Q0))
        if abs(self.U0 * self.Id0 - self.P0) > tol or abs(-self.U0 * self.Iq0 - self.Q0) > tol:
            raise InvalidOperatingPoint("currents inconsistent with P0/Q0 at Uq0 = 0")
        if self.Udc0 is not None and not self.Udc0 > 0:
            raise InvalidOperatingPoint("dc voltage must be positive")

    @property
    def v0(self):
        return np.array([self.U0, 0.0])

    @property
    def i0(self):
        return np.array([self.Id0, self.Iq0])


@dataclass(frozen=True)
class PassiveBranch:
    """Series R-L element with an optional shunt capacitance.

    ``L`` and ``C`` are coefficients of ``s`` (seconds x p.u.); use
    :meth:`from_reactance` to build one from p.u. reactances.
    """

    R: float = 0.0
    L: float = 0.0
    C: float = 0.0
    omega1: float = OMEGA1

    def __post_init__(self):
        if min(self.R, self.L, self.C) < 0:
            raise ValueError("branch parameters must be non-negative")
        if self.R == 0 and self.L == 0 and self.C == 0:
            raise EmptyBranch("branch needs at least one of R, L, C positive")

    @classmethod
    def from_reactance(cls, x=0.0, r=0.0, b=0.0, omega1=OMEGA1):
        return cls(R=r, L=x / omega1, C=b / omega1, omega1=omega1)

    @property
    def has_series(self):
        return self.R > 0 or self.L > 0

    @property
    def z1(self) -> complex:
        """Series impedance at the fundamental (power-flow phasor)."""
        return self.R + 1j * self.omega1 * self.L


@dataclass(frozen=True)
class VscDevice:
    """Averaged two-level converter with its control parameters.

    Bandwidths are in Hz.  ``mode`` selects the outer loop:

    * ``"PQ"``  grid following, active/reactive power control, PLL
    * ``"DCV"`` grid following, dc-voltage plus reactive power control, PLL
    * ``"VF"``  grid forming, integral ac-voltage control at fixed frequency

    A zero bandwidth disables the corresponding loop.  ``ff_bw`` is the
    cut-off of the first-order low-pass filter in the grid-voltage
    feed-forward path (0 means unfiltered).
    """

    cc_bw: float = 300.0
    pll_bw: float = 20.0
    outer_bw: float = 20.0
    mode: str = "PQ"
    Lf: float = 0.15 / OMEGA1
    Rf: float = 0.005
    op: OperatingPoint = field(default_factory=OperatingPoint)
    omega1: float = OMEGA1
    q_bw: float | None = None
    dc_capacitance: float = 0.02
    feedforward: bool = True
    ff_bw: float = 0.0
    decoupling: bool = True
    vf_kp: float = 0.0

    def __post_init__(self):
        if self.mode not in ("PQ", "DCV", "VF"):
            raise UnsupportedMode(f"unknown control mode {self.mode!r}")
        for name in ("cc_bw", "pll_bw", "outer_bw"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if self.mode == "VF" and self.pll_bw != 0:
            object.__setattr__(self, "pll_bw", 0.0)
        if not (self.Lf > 0 and self.Rf >= 0):
            raise ValueError("filter needs Lf > 0 and Rf >= 0")

    def with_op(self, op):
        return replace(self, op=op)


@dataclass(frozen=True)
class DcLink:
    C_cap: float = 0.02
    Udc0: float = 1.0

    def __post_init__(self):
        if not self.C_cap > 0:
            raise ValueError("dc-link capacitance must be positive")


@dataclass(frozen=True)
class ThreePortConverter:
    """3x3 local-frame admittance of an HVDC terminal (MSD ac ports, dc last).

    ``role == "sending"``: ac current into the converter and dc current
    into the dc link are positive.  ``role == "receiving"``: ac current out
    of the converter and dc current into the converter are positive.
    """

    block: FramedBlock
    role: str
    device: VscDevice

    @property
    def Y_pn(self):
        return self.block.block[0:2, 0:2]

    @property
    def a(self):
        return self.block.block[0:2, 2:3]

    @property
    def b(self):
        return self.block.block[2:3, 0:2]

    @property
    def Y_dc(self):
        return self.block.block[2:3, 2:3]

    def nodal(self) -> FramedBlock:
        """Same block in load convention: every current flows into the converter."""
        if self.role == "sending":
            left = np.diag([1.0, 1.0, -1.0])
        else:
            left = np.diag([-1.0, -1.0, 1.0])
        return self.block.with_block(self.block.block.transform(left=left), kind="admittance")


# ---------------------------------------------------------------------------
# passive elements
# ---------------------------------------------------------------------------

def branch_admittance_dq(b: PassiveBranch) -> DescriptorSystem:
    """dq admittance of the series R-L part: ``(R + sL + w1 L J)^-1``."""
    if b.L > 0:
        return DescriptorSystem(b.L * np.eye(2), -(b.R * np.eye(2) + b.omega1 * b.L * J),
                                np.eye(2), np.eye(2), np.zeros((2, 2)))
    return DescriptorSystem.static(np.eye(2) / b.R)


def _capacitor_impedance_dq(b: PassiveBranch) -> DescriptorSystem:
    return DescriptorSystem(b.C * np.eye(2), -b.omega1 * b.C * J, np.eye(2), np.eye(2),
                            np.zeros((2, 2)))


def branch_impedance(b: PassiveBranch) -> FramedBlock:
    """Sequence-domain impedance of a branch, dq-symmetric by construction.

    The series part is built in dq and sym-decomposed, giving
    ``diag(R + sL + j w1 L, R + sL - j w1 L)``.  A branch with only a
    capacitance returns the capacitor's impedance.
    """
    if b.has_series:
        zdq = branch_admittance_dq(b).inv()
    else:
        zdq = _capacitor_impedance_dq(b)
    return sym_decompose(FramedBlock(zdq, "dq", 0.0, "impedance"))


def branch_admittance(b: PassiveBranch) -> FramedBlock:
    if b.has_series:
        ydq = branch_admittance_dq(b)
    else:
        ydq = _capacitor_impedance_dq(b).inv()
    return sym_decompose(FramedBlock(ydq, "dq", 0.0, "admittance"))


def shunt_capacitor_admittance(C: float, omega1=OMEGA1) -> FramedBlock:
    return branch_admittance(PassiveBranch(C=C, omega1=omega1))


# ---------------------------------------------------------------------------
# converter models
# ---------------------------------------------------------------------------

def controller_gains(v: VscDevice) -> dict:
    """PI gains from closed-loop bandwidths.

    Current loop: ``kp = 2 pi f L``, ``ki = 2 pi f R`` (first-order closed
    loop).  PLL and dc-voltage loops: second-order pole placement with
    damping 0.707 on the integrating plant.  Power/reactive loops: integral
    gain for a first-order loop, proportional gain cancelling the current
    loop pole.  V/f: integral voltage gain ``2 pi f``.
    """
    a_cc = 2 * np.pi * v.cc_bw
    g = {"kp_cc": a_cc * v.Lf, "ki_cc": a_cc * v.Rf}
    wn = 2 * np.pi * v.pll_bw
    g["kp_pll"], g["ki_pll"] = 2 * ZETA * wn, wn ** 2
    qbw = v.outer_bw if v.q_bw is None else v.q_bw
    for key, bw in (("p", v.outer_bw), ("q", qbw)):
        ki = 2 * np.pi * bw
        g["ki_" + key] = ki
        g["kp_" + key] = ki / a_cc if a_cc > 0 else 0.0
    wdc = 2 * np.pi * v.outer_bw
    udc0 = v.op.Udc0 or 1.0
    g["kp_dc"] = 2 * ZETA * wdc * v.dc_capacitance * udc0
    g["ki_dc"] = wdc ** 2 * v.dc_capacitance * udc0
    g["ki_v"] = 2 * np.pi * v.outer_bw
    g["kp_v"] = v.vf_kp
    return g


class _Rows:
    """Linear maps over the stacked vector [x; u], one row per scalar signal."""

    def __init__(self, nx, nu):
        self.nx, self.nu = nx, nu

    def zeros(self, k=1):
        return np.zeros((k, self.nx + self.nu))

    def x(self, *idx):
        r = self.zeros(len(idx))
        for k, i in enumerate(idx):
            r[k, i] = 1.0
        return r

    def u(self, *idx):
        r = self.zeros(len(idx))
        for k, i in enumerate(idx):
            r[k, self.nx + i] = 1.0
        return r


def _grid_following_model(v: VscDevice, dc_port: bool):
    """Local-frame linearization of a PLL-synchronized converter.

    Inputs: (v_d, v_q[, U_dc]); outputs: (i_d, i_q[, I_dc]) with i the
    current injected into the grid and I_dc drawn from the dc link.
    """
    op = v.op
    g = controller_gains(v)
    L, R, w1 = v.Lf, v.Rf, v.omega1
    has_pll = v.pll_bw > 0
    has_cc = v.cc_bw > 0
    has_outer = v.outer_bw > 0
    names = ["i_d", "i_q"]
    if has_pll:
        names += ["theta", "x_pll"]
    if has_cc:
        names += ["xc_d", "xc_q"]
    if has_outer:
        names += ["x_p" if v.mode == "PQ" else "x_dc", "x_q"]
    has_ff_filter = v.feedforward and v.ff_bw > 0
    if has_ff_filter:
        names += ["vf_d", "vf_q"]
    nx = len(names)
    nu = 3 if dc_port else 2
    idx = {n: k for k, n in enumerate(names)}
    r = _Rows(nx, nu)

    v0, i0 = op.v0, op.i0
    vc0 = v0 + R * i0 + w1 * L * J @ i0
    udc0 = op.Udc0 or 1.0

    dv = r.u(0, 1)
    di = r.x(0, 1)
    th = r.x(idx["theta"]) if has_pll else r.zeros()
    dv_c = dv - np.outer(J @ v0, th)
    di_c = di - np.outer(J @ i0, th)
    rows = {}
    if has_pll:
        rows["theta"] = g["kp_pll"] * dv_c[1] + r.x(idx["x_pll"])[0]
        rows["x_pll"] = g["ki_pll"] * dv_c[1]

    dP = op.U0 * di_c[0] + op.Id0 * dv_c[0] + op.Iq0 * dv_c[1]
    dQ = op.Id0 * dv_c[1] - op.Iq0 * dv_c[0] - op.U0 * di_c[1]
    iref = r.zeros(2)
    if has_outer:
        xq = r.x(idx["x_q"])[0]
        iref[1] = g["kp_q"] * dQ - xq
        rows["x_q"] = -g["ki_q"] * dQ
        if v.mode == "PQ":
            xp = r.x(idx["x_p"])[0]
            iref[0] = -g["kp_p"] * dP + xp
            rows["x_p"] = -g["ki_p"] * dP
        else:
            if not dc_port:
                raise UnsupportedMode("dc-voltage control needs the dc port")
            du = r.u(2)[0]
            iref[0] = g["kp_dc"] * du + r.x(idx["x_dc"])[0]
            rows["x_dc"] = g["ki_dc"] * du

    err = iref - di_c
    vcc = g["kp_cc"] * err
    if has_cc:
        vcc = vcc + r.x(idx["xc_d"], idx["xc_q"])
        rows["xc_d"], rows["xc_q"] = g["ki_cc"] * err
    if has_ff_filter:
        vf = r.x(idx["vf_d"], idx["vf_q"])
        rows["vf_d"], rows["vf_q"] = 2 * np.pi * v.ff_bw * (dv_c - vf)
        vcc = vcc + vf
    elif v.feedforward:
        vcc = vcc + dv_c
    if v.decoupling:
        vcc = vcc + w1 * L * (J @ di_c)
    dvc = vcc + np.outer(J @ vc0, th)
    if dc_port:
        dvc = dvc + np.outer(vc0 / udc0, r.u(2)[0])
    didt = dvc - dv - R * di - w1 * L * (J @ di)
    rows["i_d"], rows["i_q"] = didt

    M = np.vstack([rows[n] for n in names])
    E = np.diag([L, L] + [1.0] * (nx - 2))
    out = [di[0], di[1]]
    if dc_port:
        pc0 = vc0 @ i0
        out.append((vc0 @ di + i0 @ dvc) / udc0 - pc0 / udc0 ** 2 * r.u(2)[0])
    Cout = np.vstack(out)
    return DescriptorSystem(E, M[:, :nx], M[:, nx:], Cout[:, :nx], Cout[:, nx:]), names


def _grid_forming_model(v: VscDevice):
    """V/f terminal in its own frame; inputs (v_d, v_q, U_dc).

    Outputs (i_d, i_q, I_dc): ac current into the converter and dc
    current into the dc link.
    """
    op = v.op
    g = controller_gains(v)
    L, R, w1 = v.Lf, v.Rf, v.omega1
    names = ["i_d", "i_q", "xv_d", "xv_q"]
    r = _Rows(4, 3)
    v0, i0 = op.v0, op.i0
    vc0 = v0 - R * i0 - w1 * L * J @ i0
    udc0 = op.Udc0 or 1.0
    dv = r.u(0, 1)
    di = r.x(0, 1)
    du = r.u(2)[0]
    dvc = -g["kp_v"] * dv + r.x(2, 3) + np.outer(vc0 / udc0, du)
    didt = dv - dvc - R * di - w1 * L * (J @ di)
    dxv = -g["ki_v"] * dv
    M = np.vstack([didt, dxv])
    E = np.diag([L, L, 1.0, 1.0])
    pc0 = vc0 @ i0
    idc = (vc0 @ di + i0 @ dvc) / udc0 - pc0 / udc0 ** 2 * du
    Cout = np.vstack([di, idc])
    return DescriptorSystem(E, M[:, :4], M[:, 4:], Cout[:, :4], Cout[:, 4:]), names


def _msd(sys: DescriptorSystem, n_ac=2) -> DescriptorSystem:
    n = sys.n_in
    left = np.eye(n, dtype=complex)
    right = np.eye(n, dtype=complex)
    left[:2, :2] = T_SYM
    right[:2, :2] = T_SYM_INV
    return sys.transform(left, right)


def _check_stable(sys, what):
    _, _, rhp = classify_half_plane(poles(sys))
    if rhp.size:
        raise InvalidOperatingPoint(
            f"{what} has {rhp.size} right-half-plane pole(s) stand-alone: {rhp}")


def vsc_admittance(v: VscDevice, check=True) -> FramedBlock:
    """Local-frame MSD admittance of a grid-following converter (load convention)."""
    if v.mode != "PQ":
        raise UnsupportedMode(f"a two-port ac converter block needs PQ mode, got {v.mode}")
    sys, _ = _grid_following_model(v, dc_port=False)
    y = _msd(sys.transform(left=-np.eye(2)))
    if check:
        _check_stable(y, "converter admittance")
    return FramedBlock(y, "msd", v.op.theta, "admittance")


def vsc_impedance(v: VscDevice, check=True) -> FramedBlock:
    """Local-frame MSD impedance; frame tag is the operating-point angle."""
    return vsc_admittance(v, check).inverse()


def hvdc_converter(v: VscDevice, role: str, check=True) -> ThreePortConverter:
    """Three-port block of an HVDC terminal in its local frame.

    Sending end: V/f control.  Receiving end: dc-voltage and reactive
    power control with a PLL.
    """
    if role == "sending":
        if v.mode != "VF":
            raise RoleMismatch("the sending terminal must use V/f control")
        sys, _ = _grid_forming_model(v)
    elif role == "receiving":
        if v.mode != "DCV":
            raise RoleMismatch("the receiving terminal must use dc-voltage control")
        sys, _ = _grid_following_model(v, dc_port=True)
    else:
        raise RoleMismatch(f"unknown role {role!r}")
    y = _msd(sys)
    if check:
        _check_stable(y, f"{role} converter")
    return ThreePortConverter(FramedBlock(y, "msd", v.op.theta, "admittance"), role, v)


# ---------------------------------------------------------------------------
# power flow
# ---------------------------------------------------------------------------

def _dS_dV(Y, V):
    I = Y @ V
    dV = np.diag(V)
    dS_dVa = 1j * dV @ np.conj(np.diag(I) - Y @ dV)
    Vn = V / np.abs(V)
    dS_dVm = dV @ np.conj(Y @ np.diag(Vn)) + np.conj(np.diag(I)) @ np.diag(Vn)
    return dS_dVa, dS_dVm


def newton_power_flow(Y, slack, V_slack, S_inj, tol=1e-12, max_iter=30, V_init=None):
    """Polar Newton-Raphson; every non-slack bus is a PQ bus.

    Returns the complex bus voltages.  ``S_inj`` is the specified complex
    power injected at each bus (generator convention).
    """
    n = Y.shape[0]
    pq = np.array([k for k in range(n) if k not in slack], dtype=int)
    V = np.ones(n, dtype=complex) if V_init is None else np.array(V_init, dtype=complex)
    V[list(slack)] = V_slack
    for it in range(max_iter):
        mis = V * np.conj(Y @ V) - S_inj
        F = np.concatenate([mis[pq].real, mis[pq].imag])
        if np.max(np.abs(F), initial=0.0) < tol:
            return V
        dVa, dVm = _dS_dV(Y, V)
        Jm = np.block([[dVa[np.ix_(pq, pq)].real, dVm[np.ix_(pq, pq)].real],
                       [dVa[np.ix_(pq, pq)].imag, dVm[np.ix_(pq, pq)].imag]])
        try:
            dx = np.linalg.solve(Jm, -F)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular power-flow Jacobian: {exc}") from None
        Va = np.angle(V)
        Vm = np.abs(V)
        Va[pq] += dx[:pq.size]
        Vm[pq] += dx[pq.size:]
        if np.any(Vm[pq] <= 0) or not np.all(np.isfinite(dx)):
            break
        V = Vm * np.exp(1j * Va)
    raise NoConvergence("power flow did not converge (transfer limit exceeded?)")


def _area_power_flow(net, area, S_extra):
    """Solve one synchronous area; returns ({bus: V}, {device: S_inj}, residual)."""
    buses = [b.name for b in net.buses if b.area == area.name]
    idx = {b: k for k, b in enumerate(buses)}
    devs = [d for d in net.devices if d.bus in idx]
    ref = net.device(area.reference)
    grid_dev = ref if ref.kind == "grid" else None
    n = len(buses) + (1 if grid_dev else 0)
    Y = np.zeros((n, n), dtype=complex)

    def stamp(a, b, y):
        Y[a, a] += y
        if b is not None:
            Y[b, b] += y
            Y[a, b] -= y
            Y[b, a] -= y

    for br in net.branches:
        if br.from_bus not in idx:
            continue
        a, b = idx[br.from_bus], idx[br.to_bus]
        if br.branch.has_series:
            stamp(a, b, 1 / br.branch.z1)
        if br.branch.C > 0:
            yc = 0.5j * br.branch.omega1 * br.branch.C
            Y[a, a] += yc
            Y[b, b] += yc
    for d in devs:
        if d.kind == "shunt":
            p = d.model
            if p.has_series:
                stamp(idx[d.bus], None, 1 / p.z1)
            if p.C > 0:
                Y[idx[d.bus], idx[d.bus]] += 1j * p.omega1 * p.C
        elif d.kind == "grid":
            stamp(idx[d.bus], n - 1, 1 / d.model.branch.z1)
    S = np.zeros(n, dtype=complex)
    for d in devs:
        if d.kind == "vsc":
            S[idx[d.bus]] += d.model.op.P0 + 1j * d.model.op.Q0
        elif d.name in S_extra:
            S[idx[d.bus]] += S_extra[d.name]
    if grid_dev is not None:
        slack, V_slack = [n - 1], [grid_dev.model.voltage]
    elif ref.kind == "hvdc" and ref.model.mode == "VF":
        slack, V_slack = [idx[ref.bus]], [ref.model.op.U0]
    else:
        raise UnsupportedTopology(f"area {area.name!r} has no grid or V/f reference")
    V = newton_power_flow(Y, slack, V_slack, S)
    Sbus = V * np.conj(Y @ V)
    res = np.abs(np.delete(Sbus - S, slack)).max(initial=0.0)
    inj = {}
    for d in devs:
        if d.kind == "vsc":
            inj[d.name] = d.model.op.P0 + 1j * d.model.op.Q0
        elif d.name in S_extra:
            inj[d.name] = S_extra[d.name]
    if ref.kind == "hvdc":
        # slack converter injects whatever the rest of the bus does not
        k = idx[ref.bus]
        inj[ref.name] = Sbus[k] - S[k]
    if grid_dev is not None:
        inj[grid_dev.name] = Sbus[n - 1]
    return {b: V[idx[b]] for b in buses}, inj, res


def _gfl_op(model, V, S, udc0=None):
    return OperatingPoint(theta=float(np.angle(V)), U0=float(abs(V)), P0=float(S.real),
                          Q0=float(S.imag), Udc0=udc0)


def solve_operating_point(net, tol=1e-10, max_outer=50):
    """Per-device operating points from an ac/dc power flow.

    Each area is solved by Newton-Raphson with its reference provider (an
    infinite bus behind the grid impedance, or a V/f terminal) as slack.
    For an HVDC link the receiving terminal injects the dc power delivered
    by the sending terminal minus its own filter losses; the two areas are
    iterated until the power balance settles.

    Returns ``(ops, voltages)``: device name -> OperatingPoint and bus name
    -> complex voltage in its area's frame.
    """
    areas = {a.name: a for a in net.areas}
    sending = {}
    order = []
    for link in net.dc_links:
        snd, rcv = net.device(link.sending), net.device(link.receiving)
        if snd.bus_area(net) == rcv.bus_area(net):
            raise UnsupportedTopology("an HVDC link must join two different areas")
        sending[link.name] = (snd, rcv, link)
    ref_of = {a.name: net.device(a.reference) for a in net.areas}
    # areas fed by a V/f terminal are solved first
    first = [a for a in net.areas if ref_of[a.name].kind == "hvdc"]
    rest = [a for a in net.areas if ref_of[a.name].kind != "hvdc"]
    order = first + rest
    S_extra = {}
    for link in net.dc_links:
        S_extra[link.receiving] = 0.0 + 1j * net.device(link.receiving).model.op.Q0
    volts, inj = {}, {}
    prev = None
    for _ in range(max_outer):
        for area in order:
            V, S, res = _area_power_flow(net, area, S_extra)
            if res > tol:
                raise NoConvergence(f"area {area.name!r} residual {res:.3g}")
            volts.update(V)
            inj.update(S)
        # dc power balance, lossless switches
        for name, (snd, rcv, link) in sending.items():
            Vs = volts[snd.bus]
            Ss = -inj[snd.name]           # absorbed by the sending terminal
            Is = np.conj(Ss / Vs)
            p_dc = Ss.real - snd.model.Rf * abs(Is) ** 2
            Vr = volts[rcv.bus]
            Sr = S_extra[rcv.name]
            Ir = np.conj(Sr / Vr)
            S_extra[rcv.name] = (p_dc - rcv.model.Rf * abs(Ir) ** 2) + 1j * rcv.model.op.Q0
        cur = np.array([S_extra[k] for k in sorted(S_extra)]) if S_extra else np.zeros(0)
        if prev is not None and np.max(np.abs(cur - prev), initial=0.0) < 1e-13:
            break
        prev = cur
        if not net.dc_links:
            break
    else:
        raise NoConvergence("ac/dc power balance did not settle")

    ops = {}
    link_of = {}
    for link in net.dc_links:
        link_of[link.sending] = link
        link_of[link.receiving] = link
    for d in net.devices:
        if d.kind == "vsc":
            ops[d.name] = _gfl_op(d.model, volts[d.bus], inj[d.name])
        elif d.kind == "hvdc":
            udc0 = link_of[d.name].link.Udc0 if d.name in link_of else 1.0
            if d.model.mode == "VF":
                V = volts[d.bus]
                Sabs = -inj[d.name]
                I = np.conj(Sabs / V)
                il = I * np.exp(-1j * np.angle(V))
                ops[d.name] = OperatingPoint(theta=0.0, U0=float(abs(V)), P0=float(Sabs.real),
                                             Q0=float(Sabs.imag), Id0=float(il.real),
                                             Iq0=float(il.imag), Udc0=udc0)
            else:
                ops[d.name] = _gfl_op(d.model, volts[d.bus], S_extra[d.name], udc0)
    return ops, volts
