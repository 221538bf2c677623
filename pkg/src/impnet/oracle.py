"""Independent ground truth from the nonlinear state equations.

Every element is written as a nonlinear differential-algebraic model in
its area's common dq frame, with the converter controllers running in
their own PLL frame through explicit ``cos``/``sin`` rotations.  The
interconnection is plain Kirchhoff current law at every node.  The
equilibrium is found by Newton iteration on the full residual and the
Jacobians are taken by complex-step differentiation, so no part of the
linearization or frame bookkeeping of the impedance-based path is reused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .components import controller_gains
from .errors import IntegratorDivergence, NoConvergence
from .lti import DescriptorSystem, freqresp, pencil_eigenvalues

__all__ = [
    "ClosedLoopPencil",
    "StepResponse",
    "closed_loop_pencil",
    "closed_loop_eigenvalues",
    "dc_port_admittance",
    "simulate_step",
    "dominant_oscillation",
]

_CS = 1e-30  # complex-step size


def _J(v):
    return np.array([-v[1], v[0]])


def _rot(th, v):
    """Common-frame vector -> frame at angle ``th``."""
    c, s = np.cos(th), np.sin(th)
    return np.array([c * v[0] + s * v[1], -s * v[0] + c * v[1]])


def _unrot(th, v):
    c, s = np.cos(th), np.sin(th)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


# ---------------------------------------------------------------------------
# elements
# ---------------------------------------------------------------------------

class _Element:
    """Nonlinear element: ``mass * dx/dt = f(x, V, p)``; ``h`` = currents drawn from nodes."""

    labels: list
    mass: np.ndarray
    nodes: list
    params: list = []

    def f(self, x, V, p):
        raise NotImplementedError

    def h(self, x, V, p):
        raise NotImplementedError

    def guess(self, V):
        return np.zeros(len(self.labels))


class _SeriesRL(_Element):
    """Series R-L between two nodes (``b`` None: to a fixed source voltage)."""

    def __init__(self, name, a, b, R, L, w1, source=0.0):
        self.name, self.R, self.L, self.w1, self.src = name, R, L, w1, source
        self.nodes = [a] if b is None else [a, b]
        self.labels = [f"{name}.i_D", f"{name}.i_Q"]
        self.mass = np.full(2, L)
        self.params = []

    def _vdrop(self, V):
        if len(self.nodes) == 2:
            return V[self.nodes[0]] - V[self.nodes[1]]
        return V[self.nodes[0]] - np.array([self.src, 0.0])

    def f(self, x, V, p):
        return self._vdrop(V) - self.R * x - self.w1 * self.L * _J(x)

    def h(self, x, V, p):
        return [x] if len(self.nodes) == 1 else [x, -x]

    def guess(self, V):
        z = self.R + 1j * self.w1 * self.L
        d = self._vdrop(V)
        i = (d[0] + 1j * d[1]) / z
        return np.array([i.real, i.imag])


class _FollowingConverter(_Element):
    """PLL-synchronized converter, PQ or dc-voltage/Q control."""

    def __init__(self, name, node, model, w1, dc_node=None, udc_ref=1.0):
        self.name, self.m, self.w1 = name, model, w1
        self.g = controller_gains(model)
        self.dc = dc_node
        self.nodes = [node] if dc_node is None else [node, dc_node]
        op = model.op
        self.th0 = op.theta
        L, R = model.Lf, model.Rf
        i0 = np.array([op.Id0, op.Iq0])
        v0 = np.array([op.U0, 0.0])
        vcc0 = v0 + R * i0 + w1 * L * _J(i0)
        ff = 1.0 if model.feedforward else 0.0
        dec = 1.0 if model.decoupling else 0.0
        self.i0 = i0
        self.xc_const = vcc0 - ff * v0 - dec * w1 * L * _J(i0)
        self.udc0 = op.Udc0 or 1.0
        self.has_pll = model.pll_bw > 0
        self.has_cc = model.cc_bw > 0
        self.has_outer = model.outer_bw > 0
        lab = ["i_D", "i_Q"]
        mass = [L, L]
        if self.has_pll:
            lab += ["theta", "x_pll"]
            mass += [1.0, 1.0]
        if self.has_cc:
            lab += ["xc_d", "xc_q"]
            mass += [1.0, 1.0]
        if self.has_outer:
            lab += ["x_outer", "x_q"]
            mass += [1.0, 1.0]
        self.has_ff = model.feedforward and model.ff_bw > 0
        if self.has_ff:
            lab += ["vf_d", "vf_q"]
            mass += [1.0, 1.0]
        self.labels = [f"{name}.{s}" for s in lab]
        self.mass = np.array(mass)
        # set-points: (P or U_dc reference, Q)
        first = op.P0 if model.mode == "PQ" else udc_ref
        self.params = [(f"{name}.{'P' if model.mode == 'PQ' else 'Udc'}_ref", first),
                       (f"{name}.Q_ref", op.Q0)]

    def _unpack(self, x):
        k = 2
        th = self.th0
        xpll = 0.0
        if self.has_pll:
            th, xpll = x[2], x[3]
            k = 4
        xc = self.xc_const
        if self.has_cc:
            xc = x[k:k + 2]
            k += 2
        xo = None
        if self.has_outer:
            xo = x[k:k + 2]
            k += 2
        vf = x[k:k + 2] if self.has_ff else None
        return x[:2], th, xpll, xc, xo, vf

    def _signals(self, x, V, p):
        m, g = self.m, self.g
        ig, th, xpll, xc, xo, vf = self._unpack(x)
        v = V[self.nodes[0]]
        vc = _rot(th, v)
        ic = _rot(th, ig)
        P = vc[0] * ic[0] + vc[1] * ic[1]
        Q = vc[1] * ic[0] - vc[0] * ic[1]
        udc = V[self.dc][0] if self.dc is not None else self.udc0
        ref1, qref = p[0], p[1]
        if self.has_outer:
            eq = qref - Q
            iq = -(g["kp_q"] * eq + xo[1])
            if m.mode == "PQ":
                e1 = ref1 - P
                idr = g["kp_p"] * e1 + xo[0]
                d1 = g["ki_p"] * e1
            else:
                e1 = udc - ref1
                idr = g["kp_dc"] * e1 + xo[0]
                d1 = g["ki_dc"] * e1
            iref = np.array([idr, iq])
            douter = np.array([d1, g["ki_q"] * eq])
        else:
            iref = self.i0
            douter = None
        err = iref - ic
        vcc = g["kp_cc"] * err + xc
        if self.has_ff:
            vcc = vcc + vf
        elif m.feedforward:
            vcc = vcc + vc
        if m.decoupling:
            vcc = vcc + self.w1 * m.Lf * _J(ic)
        vcg = _unrot(th, vcc) * (udc / self.udc0)
        return dict(ig=ig, vc=vc, err=err, vcg=vcg, douter=douter, xpll=xpll, udc=udc, v=v, vf=vf)

    def f(self, x, V, p):
        m, g = self.m, self.g
        s = self._signals(x, V, p)
        ig = s["ig"]
        out = [s["vcg"] - s["v"] - m.Rf * ig - self.w1 * m.Lf * _J(ig)]
        if self.has_pll:
            out.append(np.array([g["kp_pll"] * s["vc"][1] + s["xpll"], g["ki_pll"] * s["vc"][1]]))
        if self.has_cc:
            out.append(g["ki_cc"] * s["err"])
        if self.has_outer:
            out.append(s["douter"])
        if self.has_ff:
            out.append(2 * np.pi * m.ff_bw * (s["vc"] - s["vf"]))
        return np.concatenate(out)

    def h(self, x, V, p):
        s = self._signals(x, V, p)
        cur = [-s["ig"]]
        if self.dc is not None:
            cur.append(np.array([(s["vcg"][0] * s["ig"][0] + s["vcg"][1] * s["ig"][1]) / s["udc"]]))
        return cur

    def guess(self, V):
        x = np.zeros(len(self.labels))
        x[:2] = _unrot(self.th0, self.i0)
        if self.has_pll:
            x[2] = self.th0
        if self.has_ff:
            x[-2:] = [self.m.op.U0, 0.0]
        return x


class _FormingConverter(_Element):
    """V/f terminal: integral ac-voltage control, fixed frequency, dc port."""

    def __init__(self, name, node, dc_node, model, w1):
        self.name, self.m, self.w1 = name, model, w1
        self.g = controller_gains(model)
        self.nodes = [node, dc_node]
        op = model.op
        self.udc0 = op.Udc0 or 1.0
        self.i0 = np.array([op.Id0, op.Iq0])
        self.labels = [f"{name}.{s}" for s in ("i_D", "i_Q", "xv_d", "xv_q")]
        L = model.Lf
        self.mass = np.array([L, L, 1.0, 1.0])
        self.params = [(f"{name}.U_ref", op.U0)]

    def _vc(self, x, V, p):
        vref = np.array([p[0], 0.0])
        v = V[self.nodes[0]]
        vcr = vref + self.g["kp_v"] * (vref - v) + x[2:4]
        return vcr * (V[self.nodes[1]][0] / self.udc0), v, vref

    def f(self, x, V, p):
        m = self.m
        vc, v, vref = self._vc(x, V, p)
        i = x[:2]
        di = v - vc - m.Rf * i - self.w1 * m.Lf * _J(i)
        return np.concatenate([di, self.g["ki_v"] * (vref - v)])

    def h(self, x, V, p):
        vc, _, _ = self._vc(x, V, p)
        i = x[:2]
        return [i, np.array([-(vc[0] * i[0] + vc[1] * i[1]) / V[self.nodes[1]][0]])]

    def guess(self, V):
        return np.concatenate([self.i0, np.zeros(2)])


# ---------------------------------------------------------------------------
# system assembly
# ---------------------------------------------------------------------------

class _System:
    """Stacked element states plus node voltages; KCL rows close the system.

    ``dc_input`` names a dc node whose voltage is an external input (used
    for port admittances); otherwise dc nodes carry their capacitor state.
    """

    def __init__(self, net, elements, node_caps, dc_caps, dc_input=None):
        self.net, self.els = net, elements
        self.w1 = net.omega1
        nodes = []
        for e in elements:
            for n in e.nodes:
                if n not in nodes:
                    nodes.append(n)
        self.nodes = [n for n in nodes if n != dc_input]
        self.dc_input = dc_input
        self.node_caps, self.dc_caps = node_caps, dc_caps
        self.slices, k = [], 0
        for e in elements:
            self.slices.append(slice(k, k + len(e.labels)))
            k += len(e.labels)
        self.n_el = k
        self.node_slice, k2 = {}, k
        for n in self.nodes:
            w = 2 if n[0] == "ac" else 1
            self.node_slice[n] = slice(k2, k2 + w)
            k2 += w
        self.n = k2
        self.labels = [l for e in elements for l in e.labels]
        for n in self.nodes:
            if n[0] == "ac":
                self.labels += [f"{n[1]}.v_D", f"{n[1]}.v_Q"]
            else:
                self.labels += [f"{n[1]}.U_dc"]
        mass = [e.mass for e in elements]
        for n in self.nodes:
            if n[0] == "ac":
                mass.append(np.full(2, node_caps.get(n, 0.0)))
            else:
                mass.append(np.array([dc_caps[n]]))
        self.mass = np.concatenate(mass) if mass else np.zeros(0)
        self.pnames, self.p0, self.pslices = [], [], []
        for e in elements:
            a = len(self.p0)
            for name, val in e.params:
                self.pnames.append(name)
                self.p0.append(val)
            self.pslices.append(slice(a, len(self.p0)))
        self.p0 = np.array(self.p0, dtype=float)

    def _volts(self, x, u):
        V = {n: x[s] for n, s in self.node_slice.items()}
        if self.dc_input is not None:
            V[self.dc_input] = np.atleast_1d(u)
        return V

    def residual(self, x, p=None, u=1.0):
        p = self.p0 if p is None else p
        V = self._volts(x, u)
        out = np.zeros(self.n, dtype=np.result_type(x, p, u, float))
        inj = {n: 0.0 for n in self.nodes}
        for e, sl, ps in zip(self.els, self.slices, self.pslices):
            xe = x[sl]
            out[sl] = e.f(xe, V, p[ps])
            for n, c in zip(e.nodes, e.h(xe, V, p[ps])):
                if n in inj:
                    inj[n] = inj[n] + c
        for n, s in self.node_slice.items():
            r = -inj[n]
            if n[0] == "ac":
                C = self.node_caps.get(n, 0.0)
                if C:
                    r = r - self.w1 * C * _J(V[n])
            out[s] = r
        return out

    def port_current(self, x, p=None, u=1.0):
        """Current drawn from the input dc node by the elements attached to it."""
        p = self.p0 if p is None else p
        V = self._volts(x, u)
        tot = 0.0
        for e, sl, ps in zip(self.els, self.slices, self.pslices):
            for n, c in zip(e.nodes, e.h(x[sl], V, p[ps])):
                if n == self.dc_input:
                    tot = tot + c[0]
        return tot

    def guess(self):
        volts = dict(self.net.voltages)
        V = {}
        x = np.zeros(self.n)
        for n, s in self.node_slice.items():
            if n[0] == "ac":
                v = volts[n[1]]
                V[n] = np.array([v.real, v.imag])
            else:
                V[n] = np.array([self._udc0(n)])
            x[s] = V[n]
        if self.dc_input is not None:
            V[self.dc_input] = np.array([self._udc0(self.dc_input)])
        for e, sl in zip(self.els, self.slices):
            x[sl] = e.guess(V)
        return x

    def _udc0(self, node):
        link = next(l for l in self.net.dc_links if l.name == node[1])
        return link.link.Udc0

    def jac(self, func, x, n_out):
        """Complex-step Jacobian of ``func`` at ``x``."""
        Jm = np.zeros((n_out, x.size))
        xc = x.astype(complex)
        for k in range(x.size):
            xc[k] += 1j * _CS
            Jm[:, k] = np.imag(func(xc)) / _CS
            xc[k] -= 1j * _CS
        return Jm

    def equilibrium(self, u=None, tol=1e-11, max_iter=50, pin=None):
        """Newton solve of ``residual = 0``.

        ``pin`` is an optional extra residual appended to the equations; it
        selects one point of an equilibrium set (a dc-voltage controller fed
        by an imposed dc voltage balances at any power).
        """
        u = self._udc0(self.dc_input) if (u is None and self.dc_input is not None) else (u or 1.0)
        x = self.guess()

        def full(z):
            F = self.residual(z, u=u)
            return F if pin is None else np.concatenate([F, np.atleast_1d(pin(z, u))])

        n_out = self.n + (0 if pin is None else 1)
        for _ in range(max_iter):
            F = full(x)
            if np.max(np.abs(F)) < tol:
                return x, u
            Jm = self.jac(full, x, n_out)
            dx = np.linalg.lstsq(Jm, -F, rcond=None)[0]
            x = x + dx
        F = full(x)
        if np.max(np.abs(F)) < 1e-9:
            return x, u
        raise NoConvergence(f"oracle equilibrium residual {np.max(np.abs(F)):.3g}")


def _build(net, area=None, dc_input=None, include=None):
    """Elements of the whole network, or of one area plus a named terminal."""
    w1 = net.omega1
    els, node_caps = [], {}
    link_of = {}
    for link in net.dc_links:
        link_of[link.sending] = link
        link_of[link.receiving] = link
    in_area = (lambda bus: True) if area is None else (lambda bus: net.bus(bus).area == area)

    def cap(bus, C):
        node_caps[("ac", bus)] = node_caps.get(("ac", bus), 0.0) + C

    for br in net.branches:
        if not in_area(br.from_bus):
            continue
        b = br.branch
        if b.has_series:
            els.append(_SeriesRL(br.name, ("ac", br.from_bus), ("ac", br.to_bus), b.R, b.L, w1))
        if b.C > 0:
            cap(br.from_bus, b.C / 2)
            cap(br.to_bus, b.C / 2)
    for d in net.devices:
        if not in_area(d.bus):
            continue
        if d.kind == "grid":
            b = d.model.branch
            els.append(_SeriesRL(d.name, ("ac", d.bus), None, b.R, b.L, w1, d.model.voltage))
        elif d.kind == "shunt":
            b = d.model
            if b.has_series:
                els.append(_SeriesRL(d.name, ("ac", d.bus), None, b.R, b.L, w1))
            if b.C > 0:
                cap(d.bus, b.C)
        elif d.kind == "vsc":
            els.append(_FollowingConverter(d.name, ("ac", d.bus), d.model, w1))
        elif d.kind == "hvdc":
            dcn = ("dc", link_of[d.name].name)
            if d.role == "sending":
                els.append(_FormingConverter(d.name, ("ac", d.bus), dcn, d.model, w1))
            else:
                els.append(_FollowingConverter(d.name, ("ac", d.bus), d.model, w1, dc_node=dcn,
                                               udc_ref=link_of[d.name].link.Udc0))
    dc_caps = {("dc", l.name): l.link.C_cap for l in net.dc_links}
    return _System(net, els, node_caps, dc_caps, dc_input)


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedLoopPencil:
    """Linearized interconnected system ``E dx/dt = A x`` with state labels."""

    E: np.ndarray
    A: np.ndarray
    labels: tuple
    x0: np.ndarray
    residual: float

    def eigenvalues(self):
        return pencil_eigenvalues(self.A, self.E)


def closed_loop_pencil(net) -> ClosedLoopPencil:
    """Equilibrium and complex-step linearization of the full network DAE."""
    if not net.solved:
        net = net.solve()
    sysm = _build(net)
    x0, _ = sysm.equilibrium()
    A = sysm.jac(lambda z: sysm.residual(z), x0, sysm.n)
    res = float(np.max(np.abs(sysm.residual(x0))))
    return ClosedLoopPencil(np.diag(sysm.mass), A, tuple(sysm.labels), x0, res)


def closed_loop_eigenvalues(net) -> np.ndarray:
    """Finite natural frequencies of the interconnected network (rad/s)."""
    return closed_loop_pencil(net).eigenvalues()


def dc_port_admittance(net, terminal, points) -> np.ndarray:
    """dc-port admittance of an HVDC terminal together with its ac area.

    The dc-link voltage is treated as an input; the output is the current
    drawn from the dc-link node by the terminal.  Evaluated at the complex
    frequencies ``points``.
    """
    if not net.solved:
        net = net.solve()
    d = net.device(terminal)
    link = next(l for l in net.dc_links if terminal in (l.sending, l.receiving))
    sysm = _build(net, area=d.bus_area(net), dc_input=("dc", link.name))
    pin = None
    if d.model.mode == "DCV":
        # the imposed dc voltage leaves the power free; hold the power-flow value
        op = d.model.op
        i_dc = (op.P0 + d.model.Rf * (op.Id0 ** 2 + op.Iq0 ** 2)) / link.link.Udc0
        pin = lambda z, uu: sysm.port_current(z, u=uu) - i_dc
    x0, u0 = sysm.equilibrium(pin=pin)
    A = sysm.jac(lambda z: sysm.residual(z, u=u0), x0, sysm.n)
    B = sysm.jac(lambda uu: sysm.residual(x0.astype(complex), u=uu[0]), np.array([u0]), sysm.n)
    C = sysm.jac(lambda z: np.atleast_1d(sysm.port_current(z, u=u0)), x0, 1)
    D = sysm.jac(lambda uu: np.atleast_1d(sysm.port_current(x0.astype(complex), u=uu[0])),
                 np.array([u0]), 1)
    g = DescriptorSystem(np.diag(sysm.mass), A, B, C, D)
    return freqresp(g, np.asarray(points))[:, 0, 0]


@dataclass(frozen=True)
class StepResponse:
    t: np.ndarray
    x: np.ndarray          # state deviations, shape (N, n)
    labels: tuple
    frequency: float       # dominant oscillation frequency (Hz)
    growth_rate: float     # envelope growth (1/s); negative = decaying
    signal: str


def dominant_oscillation(t, y, f_min=1.0):
    """Dominant frequency (Hz, Hann-windowed zero-padded FFT) and envelope growth rate."""
    y = np.asarray(y, dtype=float)
    y = y - y.mean()
    if not np.any(y):
        return 0.0, 0.0
    dt = t[1] - t[0]
    n = y.size
    nfft = 1 << int(np.ceil(np.log2(n * 16)))
    spec = np.abs(np.fft.rfft(y * np.hanning(n), nfft))
    freqs = np.fft.rfftfreq(nfft, dt)
    spec[freqs < f_min] = 0.0
    k = int(np.argmax(spec))
    if 0 < k < spec.size - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        den = a - 2 * b + c
        shift = 0.5 * (a - c) / den if den != 0 else 0.0
    else:
        shift = 0.0
    f = float((k + shift) * (freqs[1] - freqs[0]))
    # log-decrement over the successive peaks of |y|
    peaks = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] > 0))[0] + 1
    if peaks.size >= 3:
        rate = np.polyfit(t[peaks], np.log(y[peaks]), 1)[0]
    else:
        rate = 0.0
    return f, float(rate)


def simulate_step(net, parameter, size=0.01, horizon=2.0, h=1e-4, signal=None,
                  window=0.5):
    """Linear response of the network to a step in a device set-point.

    Parameters
    ----------
    parameter : str
        Set-point name, e.g. ``"VSC1.P_ref"`` or ``"HVDC1.U_ref"``.
    size : float
        Step height (p.u.).
    horizon, h : float
        Simulated time and trapezoidal step (s).
    signal : str, optional
        State label whose trace is analysed; defaults to the first state of
        the stepped device.
    window : float
        Fraction of the run (at the end) used for frequency and damping.
    """
    if not net.solved:
        net = net.solve()
    sysm = _build(net)
    x0, _ = sysm.equilibrium()
    A = sysm.jac(lambda z: sysm.residual(z), x0, sysm.n)
    try:
        k = sysm.pnames.index(parameter)
    except ValueError:
        raise KeyError(f"unknown set-point {parameter!r}; have {sysm.pnames}") from None
    B = sysm.jac(lambda q: sysm.residual(x0.astype(complex), p=q), sysm.p0, sysm.n)[:, k] * size
    E = np.diag(sysm.mass)
    n_steps = int(round(horizon / h))
    t = np.arange(n_steps + 1) * h
    X = np.zeros((n_steps + 1, sysm.n))
    x = np.zeros(sysm.n)
    if size != 0.0:
        # two backward-Euler half steps across the discontinuity, then trapezoidal
        be = scipy.linalg.lu_factor(E - 0.5 * h * A)
        for _ in range(2):
            x = scipy.linalg.lu_solve(be, E @ x + 0.5 * h * B)
        X[1] = x
        lu = scipy.linalg.lu_factor(E - 0.5 * h * A)
        rhs_m = E + 0.5 * h * A
        for i in range(2, n_steps + 1):
            x = scipy.linalg.lu_solve(lu, rhs_m @ x + h * B)
            X[i] = x
            if not np.all(np.isfinite(x)) or np.abs(x).max() > 1e12:
                tail = np.log(np.abs(X[i // 2:i]).max(axis=1) + 1e-300)
                rate = np.polyfit(t[i // 2:i], tail, 1)[0]
                raise IntegratorDivergence(f"response blew up at t={t[i]:.3f}s", rate)
    labels = tuple(sysm.labels)
    if signal is None:
        dev = parameter.split(".")[0]
        signal = next(l for l in labels if l.startswith(dev + "."))
    j = labels.index(signal)
    start = int((1 - window) * n_steps)
    f, rate = dominant_oscillation(t[start:], X[start:, j])
    return StepResponse(t, X, labels, f, rate, signal)
