"""Network description, nodal admittance assembly and circuit reductions.

The nodal model is assembled as ``Y_sys = N^T diag(Y_k) N`` from the
element admittances ``Y_k`` and a constant incidence matrix ``N``.  Each
element's state vector therefore appears exactly once, so the invariant
zeros of ``Y_sys`` are the natural frequencies of the interconnected
system.  Every device block is re-referenced to its area's common frame
with :func:`impnet.frames.apply_io` before it is inserted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import lti
from .components import (
    OMEGA1,
    DcLink,
    OperatingPoint,
    PassiveBranch,
    ThreePortConverter,
    VscDevice,
    branch_admittance,
    branch_impedance,
    hvdc_converter,
    solve_operating_point,
    vsc_admittance,
)
from .errors import (
    DisconnectedBus,
    FrameMismatch,
    UnsolvedOperatingPoint,
    UnsupportedTopology,
    WrongShape,
)
from .frames import FramedBlock, apply_io, apply_io_acdc
from .lti import DescriptorSystem, schur_eliminate

__all__ = [
    "Area",
    "Bus",
    "Branch",
    "GridSource",
    "Device",
    "DcLinkSpec",
    "NetworkModel",
    "AssembledSystem",
    "PartitionSpec",
    "assemble_ysys",
    "pcc_aggregate",
    "load_subsystem",
    "source_impedance",
    "dc_side_partition",
    "dc_reduce",
    "ac_reduce_with_dclink",
    "area_admittance",
    "split_at",
    "loop_impedance",
    "partition",
]

DEVICE_KINDS = ("vsc", "grid", "shunt", "hvdc")


# ---------------------------------------------------------------------------
# description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Area:
    name: str
    reference: str  # name of the grid source or V/f converter fixing theta = 0


@dataclass(frozen=True)
class Bus:
    name: str
    area: str


@dataclass(frozen=True)
class Branch:
    name: str
    from_bus: str
    to_bus: str
    branch: PassiveBranch


@dataclass(frozen=True)
class GridSource:
    """Infinite bus ``voltage`` (angle 0) behind ``branch``."""

    branch: PassiveBranch
    voltage: float = 1.0


@dataclass(frozen=True)
class Device:
    name: str
    bus: str
    kind: str
    model: object
    role: str | None = None

    def __post_init__(self):
        if self.kind not in DEVICE_KINDS:
            raise ValueError(f"unknown device kind {self.kind!r}")
        if self.kind == "hvdc" and self.role not in ("sending", "receiving"):
            raise ValueError("HVDC terminals need role 'sending' or 'receiving'")

    def bus_area(self, net):
        return net.bus(self.bus).area


@dataclass(frozen=True)
class DcLinkSpec:
    name: str
    sending: str
    receiving: str
    link: DcLink = field(default_factory=DcLink)


@dataclass(frozen=True)
class NetworkModel:
    """Buses, branches, shunt devices, synchronous areas and dc links."""

    areas: tuple
    buses: tuple
    branches: tuple = ()
    devices: tuple = ()
    dc_links: tuple = ()
    omega1: float = OMEGA1
    solved: bool = False
    voltages: tuple = ()

    def __post_init__(self):
        for name in ("areas", "buses", "branches", "devices", "dc_links", "voltages"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        names = [b.name for b in self.buses]
        if len(set(names)) != len(names):
            raise ValueError("duplicate bus names")
        areas = {a.name for a in self.areas}
        for b in self.buses:
            if b.area not in areas:
                raise ValueError(f"bus {b.name!r} refers to unknown area {b.area!r}")
        known = set(names)
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in known:
                    raise ValueError(f"branch {br.name!r} refers to unknown bus {end!r}")
            if self.bus(br.from_bus).area != self.bus(br.to_bus).area:
                raise UnsupportedTopology(f"ac branch {br.name!r} joins two areas")
        dnames = [d.name for d in self.devices] + [br.name for br in self.branches]
        if len(set(dnames)) != len(dnames):
            raise ValueError("element names must be unique")
        for d in self.devices:
            if d.bus not in known:
                raise ValueError(f"device {d.name!r} refers to unknown bus {d.bus!r}")
        for a in self.areas:
            ref = self.device(a.reference)
            if ref.bus_area(self) != a.name:
                raise UnsupportedTopology(f"reference of area {a.name!r} lies outside it")
            if not (ref.kind == "grid" or (ref.kind == "hvdc" and ref.role == "sending")):
                raise UnsupportedTopology(
                    f"area {a.name!r}: reference must be a grid source or a V/f terminal")
            others = [d.name for d in self.devices if d.bus_area(self) == a.name
                      and (d.kind == "grid" or (d.kind == "hvdc" and d.role == "sending"))]
            if others != [a.reference]:
                raise UnsupportedTopology(
                    f"area {a.name!r} needs exactly one reference provider, found {others}")
        for link in self.dc_links:
            s, r = self.device(link.sending), self.device(link.receiving)
            if (s.kind, s.role, r.kind, r.role) != ("hvdc", "sending", "hvdc", "receiving"):
                raise UnsupportedTopology(f"dc link {link.name!r} needs a sending and a receiving terminal")
        self._check_connected()

    def _check_connected(self):
        adj = {b.name: set() for b in self.buses}
        for br in self.branches:
            adj[br.from_bus].add(br.to_bus)
            adj[br.to_bus].add(br.from_bus)
        used = {d.bus for d in self.devices}
        for a in self.areas:
            start = self.device(a.reference).bus
            seen, stack = {start}, [start]
            while stack:
                for nb in adj[stack.pop()]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            for b in self.buses:
                if b.area == a.name and b.name not in seen:
                    raise DisconnectedBus(f"bus {b.name!r} has no path to the area reference")
                if b.area == a.name and not adj[b.name] and b.name not in used:
                    raise DisconnectedBus(f"bus {b.name!r} has nothing attached")

    # -- lookups -----------------------------------------------------------
    def bus(self, name) -> Bus:
        for b in self.buses:
            if b.name == name:
                return b
        raise KeyError(f"no bus named {name!r}")

    def device(self, name) -> Device:
        for d in self.devices:
            if d.name == name:
                return d
        raise KeyError(f"no device named {name!r}")

    def with_device(self, name, **changes):
        """Copy with one device's model fields replaced (the operating point is reset)."""
        devs = []
        for d in self.devices:
            if d.name == name:
                d = replace(d, model=replace(d.model, **changes))
            devs.append(d)
        return replace(self, devices=tuple(devs), solved=False, voltages=())

    def solve(self):
        """Copy with every device's operating point filled from a power flow."""
        ops, volts = solve_operating_point(self)
        devs = []
        for d in self.devices:
            if d.name in ops:
                d = replace(d, model=d.model.with_op(ops[d.name]))
            devs.append(d)
        return replace(self, devices=tuple(devs), solved=True,
                       voltages=tuple(sorted(volts.items())))

    def voltage(self, bus):
        return dict(self.voltages)[bus]


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Element:
    name: str
    block: DescriptorSystem          # admittance in load convention, area frame
    nodes: tuple                     # node keys it connects to
    signs: tuple                     # (1, -1) marks a series element between two nodes
    impedance: DescriptorSystem | None = None   # direct impedance realization if any


@dataclass(frozen=True)
class AssembledSystem:
    """Nodal admittance model of a whole network.

    ``Y_sys`` has two modified-sequence ports per ac bus (in ``bus_order``)
    followed by one port per dc-link node (in ``dc_order``).
    """

    Y_sys: DescriptorSystem
    bus_order: tuple
    dc_order: tuple
    io_angles: dict
    elements: tuple
    net: NetworkModel
    with_io: bool = True

    @property
    def node_ports(self):
        return _node_ports(self.bus_order, self.dc_order)

    def ports_of(self, bus):
        return list(self.node_ports[("ac", bus)])

    def element(self, name) -> _Element:
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(f"no element named {name!r}")

    def elements_at(self, bus):
        return [e for e in self.elements if ("ac", bus) in e.nodes]


def _node_ports(bus_order, dc_order):
    out, k = {}, 0
    for b in bus_order:
        out[("ac", b)] = (k, k + 1)
        k += 2
    for d in dc_order:
        out[("dc", d)] = (k,)
        k += 1
    return out


def _nodal(elements, node_ports):
    """``N^T diag(Y_k) N`` restricted to the nodes in ``node_ports``."""
    total = sum(len(p) for p in node_ports.values())
    rows = []
    for e in elements:
        if e.signs == (1, -1):
            # series element: one port pair, voltage difference of its two ends
            a, b = node_ports[e.nodes[0]], node_ports[e.nodes[1]]
            for pa, pb in zip(a, b):
                r = np.zeros(total)
                r[pa], r[pb] = 1.0, -1.0
                rows.append(r)
            continue
        for node in e.nodes:
            for p in node_ports[node]:
                r = np.zeros(total)
                r[p] = 1.0
                rows.append(r)
    N = np.array(rows)
    blocks = [e.block for e in elements]
    k = len(blocks)
    stacked = lti.block([[blocks[i] if i == j else None for j in range(k)] for i in range(k)])
    return stacked.transform(N.T, N)


def _branch_elements(net):
    out = []
    for br in net.branches:
        b = br.branch
        if b.has_series:
            y = branch_admittance(PassiveBranch(R=b.R, L=b.L, omega1=b.omega1)).block
            # realized once; the +/- incidence places it at both ends
            out.append(_Element(br.name, y, (("ac", br.from_bus), ("ac", br.to_bus)), (1, -1)))
        if b.C > 0:
            half = PassiveBranch(C=b.C / 2, omega1=b.omega1)
            for end, tag in ((br.from_bus, "from"), (br.to_bus, "to")):
                out.append(_Element(f"{br.name}:C_{tag}", branch_admittance(half).block,
                                    (("ac", end),), (1,)))
    return out


def _device_block(d: Device, with_io: bool):
    """Admittance block of a device in its area's frame; returns (element list, angle)."""
    if d.kind == "shunt":
        b = d.model
        if not (b.has_series and b.C > 0):
            return [_Element(d.name, branch_admittance(b).block, (("ac", d.bus),), (1,),
                             branch_impedance(b).block)], 0.0
        # R-L leg and capacitor in parallel at the bus
        rl = PassiveBranch(R=b.R, L=b.L, omega1=b.omega1)
        cap = PassiveBranch(C=b.C, omega1=b.omega1)
        return [_Element(f"{d.name}:RL", branch_admittance(rl).block, (("ac", d.bus),), (1,)),
                _Element(f"{d.name}:C", branch_admittance(cap).block, (("ac", d.bus),), (1,))], 0.0
    if d.kind == "grid":
        y = branch_admittance(d.model.branch)
        return [_Element(d.name, y.block, (("ac", d.bus),), (1,),
                         branch_impedance(d.model.branch).block)], 0.0
    if d.kind == "vsc":
        y = vsc_admittance(d.model)
        theta = y.frame
        yg = apply_io(y, 0.0) if with_io else y
        return [_Element(d.name, yg.block, (("ac", d.bus),), (1,))], theta
    raise TypeError(d.kind)


def _converter(d: Device) -> ThreePortConverter:
    return hvdc_converter(d.model, d.role)


def assemble_ysys(net: NetworkModel, with_io: bool = True) -> AssembledSystem:
    """Nodal admittance of the whole network.

    With ``with_io=False`` every device block is inserted in its own local
    frame (the textbook mistake the impedance operator corrects); this is
    provided for comparison studies only.
    """
    if not net.solved:
        raise UnsolvedOperatingPoint("solve the operating point first (NetworkModel.solve)")
    bus_order = tuple(b.name for b in net.buses)
    dc_order = tuple(link.name for link in net.dc_links)
    link_of = {}
    for link in net.dc_links:
        link_of[link.sending] = link
        link_of[link.receiving] = link
    elements = _branch_elements(net)
    angles = {}
    for d in net.devices:
        if d.kind == "hvdc":
            if d.name not in link_of:
                raise UnsupportedTopology(f"HVDC terminal {d.name!r} is not on a dc link")
            conv = _converter(d)
            y = conv.nodal()
            angles[d.name] = y.frame
            yg = apply_io_acdc(y, 0.0) if with_io else y
            elements.append(_Element(d.name, yg.block,
                                     (("ac", d.bus), ("dc", link_of[d.name].name)), (1, 1)))
        else:
            els, theta = _device_block(d, with_io)
            angles[d.name] = theta
            elements.extend(els)
    for link in net.dc_links:
        cap = DescriptorSystem.siso([link.link.C_cap, 0.0], [1.0])
        elements.append(_Element(f"{link.name}:C", cap, (("dc", link.name),), (1,)))
    ports = _node_ports(bus_order, dc_order)
    Y = _nodal(elements, ports)
    return AssembledSystem(Y, bus_order, dc_order, angles, tuple(elements), net, with_io)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def _touched(elements):
    nodes = []
    for e in elements:
        for n in e.nodes:
            if n not in nodes:
                nodes.append(n)
    return nodes


def _reduce(elements, keep_node):
    """Admittance of a set of elements seen at ``keep_node`` (Kron reduction)."""
    nodes = _touched(elements)
    if keep_node not in nodes:
        raise UnsupportedTopology(f"no element of this side touches {keep_node}")
    order = [keep_node] + [n for n in nodes if n != keep_node]
    bus_order = tuple(n[1] for n in order if n[0] == "ac")
    dc_order = tuple(n[1] for n in order if n[0] == "dc")
    ports = _node_ports(bus_order, dc_order)
    Y = _nodal(elements, ports)
    return schur_eliminate(Y, list(ports[keep_node]))


def split_at(asm: AssembledSystem, bus, load_elements):
    """Kron-reduced admittances of two complementary element sets at ``bus``.

    Returns ``(Y_source, Y_load)`` as area-frame MSD admittance blocks.
    The sets may share only ``bus``.
    """
    load_set = set(load_elements)
    names = {e.name.split(":")[0] for e in asm.elements}
    unknown = load_set - names
    if unknown:
        raise KeyError(f"unknown elements {sorted(unknown)}")
    load = [e for e in asm.elements if e.name.split(":")[0] in load_set]
    src = [e for e in asm.elements if e.name.split(":")[0] not in load_set]
    shared = set(_touched(load)) & set(_touched(src))
    if shared != {("ac", bus)}:
        raise UnsupportedTopology(f"the split at {bus!r} is not a cut (shared nodes {sorted(shared)})")
    ys = _reduce(src, ("ac", bus))
    yl = _reduce(load, ("ac", bus))
    return (FramedBlock(ys, "msd", 0.0, "admittance"), FramedBlock(yl, "msd", 0.0, "admittance"))


def _source_elements(asm, bus, source=None):
    if source is not None:
        return list(source)
    grids = [d.name for d in asm.net.devices if d.bus == bus and d.kind == "grid"]
    if not grids:
        raise UnsupportedTopology(f"no grid source at bus {bus!r} to split off")
    return grids


def load_subsystem(asm: AssembledSystem, bus, source=None) -> FramedBlock:
    """Admittance of everything except the source elements, seen at ``bus``.

    ``source`` lists element names forming the source subsystem (default:
    the grid sources attached to ``bus``), i.e. the response to a current
    injected at ``bus`` after the source admittance is removed.
    """
    src = _source_elements(asm, bus, source)
    load = {e.name.split(":")[0] for e in asm.elements} - set(src)
    return split_at(asm, bus, load)[1]


def source_impedance(asm: AssembledSystem, bus, source=None) -> FramedBlock:
    """Impedance of the source subsystem at ``bus``.

    A single element with a direct impedance realization (e.g. a Thevenin
    grid) is returned as-is; otherwise the Kron-reduced admittance is inverted.
    """
    src = _source_elements(asm, bus, source)
    if len(src) == 1:
        e = asm.element(src[0])
        if e.impedance is not None and e.nodes == (("ac", bus),):
            return FramedBlock(e.impedance, "msd", 0.0, "impedance")
    load = {e.name.split(":")[0] for e in asm.elements} - set(src)
    return split_at(asm, bus, load)[0].inverse()


def pcc_aggregate(net: NetworkModel, bus, with_io=True) -> FramedBlock:
    """Series/parallel impedance of the radial feeders seen from ``bus``.

    Every non-grid device at ``bus`` and every device sitting at the far end
    of a single branch from ``bus`` is combined circuit-wise:
    ``(Z_branch + Z_device) || ...``.  Devices are re-referenced to the
    common frame unless ``with_io`` is False.
    """
    if not net.solved:
        raise UnsolvedOperatingPoint("solve the operating point first")
    feeders = []
    for d in net.devices:
        if d.kind in ("grid", "hvdc"):
            continue
        y = _device_admittance(d, with_io)
        if d.bus == bus:
            feeders.append(y.block)
            continue
        path = [br for br in net.branches if {br.from_bus, br.to_bus} == {bus, d.bus}]
        others = [br for br in net.branches if d.bus in (br.from_bus, br.to_bus)]
        devs_there = [x for x in net.devices if x.bus == d.bus]
        if len(path) != 1 or len(others) != 1 or len(devs_there) != 1:
            raise UnsupportedTopology(f"device {d.name!r} is not on a radial feeder of {bus!r}")
        zb = branch_impedance(path[0].branch).block
        feeders.append((zb + y.block.inv()).inv())
    if not feeders:
        raise UnsupportedTopology(f"nothing to aggregate at {bus!r}")
    ytot = feeders[0]
    for f in feeders[1:]:
        ytot = ytot + f
    return FramedBlock(ytot.inv(), "msd", 0.0, "impedance")


def _device_admittance(d: Device, with_io=True) -> FramedBlock:
    if d.kind == "vsc":
        y = vsc_admittance(d.model)
        return apply_io(y, 0.0) if with_io else replace(y, frame=0.0)
    if d.kind == "shunt":
        return branch_admittance(d.model)
    if d.kind == "grid":
        return branch_admittance(d.model.branch)
    raise UnsupportedTopology(f"device kind {d.kind!r} has no two-port admittance")


def loop_impedance(source: FramedBlock, load: FramedBlock) -> FramedBlock:
    """``Z_Loop = Z_Load + Z_Source`` (both must share domain and frame)."""
    if source.domain != load.domain or not np.isclose(source.frame, load.frame, atol=1e-12):
        raise FrameMismatch(
            f"source ({source.domain}, {source.frame}) and load ({load.domain}, {load.frame}) differ")
    if source.block.shape != load.block.shape:
        raise WrongShape("source and load shapes differ")
    zs, zl = source.as_impedance(), load.as_impedance()
    return FramedBlock(zl.block + zs.block, source.domain, source.frame, "impedance")


# ---------------------------------------------------------------------------
# ac/dc reductions
# ---------------------------------------------------------------------------

def _area_elements(asm, area, exclude):
    buses = {b.name for b in asm.net.buses if b.area == area}
    out = []
    for e in asm.elements:
        if e.name.split(":")[0] == exclude:
            continue
        if all(n[0] == "ac" and n[1] in buses for n in e.nodes):
            out.append(e)
    return out


def area_admittance(asm: AssembledSystem, conv_name) -> FramedBlock:
    """Admittance of the converter's area (without it) at its ac bus, area frame."""
    d = asm.net.device(conv_name)
    els = _area_elements(asm, d.bus_area(asm.net), conv_name)
    y = _reduce(els, ("ac", d.bus))
    return FramedBlock(y, "msd", 0.0, "admittance")


def _nodal_parts(conv: FramedBlock):
    b = conv.block
    return b[0:2, 0:2], b[0:2, 2:3], b[2:3, 0:2], b[2:3, 2:3]


def dc_reduce(asm: AssembledSystem, conv_name, with_io=True) -> DescriptorSystem:
    """dc-port admittance of an HVDC terminal together with its ac area.

    The ac area is reduced to the converter bus and expressed in the
    converter's local frame (each device re-referenced by ``theta_i -
    theta_conv``); eliminating the ac port of the converter's nodal block
    then leaves a 1x1 admittance ``I = Y U`` with the current flowing from
    the dc-link node into the terminal.

    In the sign convention of the role-specific three-port blocks this is
    ``-(Y_dc + b (Y_area + Y_pn)^-1 a)`` at the sending end (``I`` measured
    into the link) and ``Y_dc - b (Y_area + Y_pn)^-1 a`` at the receiving end.
    """
    net = asm.net
    d = net.device(conv_name)
    if d.kind != "hvdc":
        raise UnsupportedTopology(f"{conv_name!r} is not an HVDC terminal")
    conv = _converter(d).nodal()
    theta = conv.frame
    area_asm = asm if asm.with_io == with_io else assemble_ysys(net, with_io)
    y_area = area_admittance(area_asm, conv_name)
    # back into the converter frame; without IO no rotation is applied anywhere
    if with_io:
        y_area = apply_io(replace(y_area, frame=0.0), theta)
    yaa, ya, yb, ydd = _nodal_parts(conv)
    ac = y_area.block + yaa
    full = lti.block([[ac, ya], [yb, ydd]])
    return schur_eliminate(full, [2])


def dc_side_partition(asm: AssembledSystem, link_name, with_io=True):
    """Source/load split on the dc link (sending side as load, receiving as source).

    Returns ``(Z_dc_source, Y_dc_load)`` as 1x1 framed blocks:
    ``Z_dc_source = 1 / Y_dc_rec`` and ``Y_dc_load = Y_dc_send + s C``.
    """
    link = next(l for l in asm.net.dc_links if l.name == link_name)
    y_send = dc_reduce(asm, link.sending, with_io)
    y_rec = dc_reduce(asm, link.receiving, with_io)
    cap = DescriptorSystem.siso([link.link.C_cap, 0.0], [1.0])
    zs = FramedBlock(y_rec.inv(), "msd", 0.0, "impedance")
    yl = FramedBlock(y_send + cap, "msd", 0.0, "admittance")
    return zs, yl


def ac_reduce_with_dclink(asm: AssembledSystem, conv_name, with_io=True) -> FramedBlock:
    """ac-port admittance of an HVDC terminal with the dc link and far area attached.

    ``Y_ac = Y_pn - a b / (Y_far + s C + Y_dc)`` in the converter's nodal
    (load) convention, returned in the area's common frame.
    """
    net = asm.net
    d = net.device(conv_name)
    link = next(l for l in net.dc_links if conv_name in (l.sending, l.receiving))
    far = link.receiving if link.sending == conv_name else link.sending
    y_far = dc_reduce(asm, far, with_io)
    conv = _converter(d).nodal()
    yaa, ya, yb, ydd = _nodal_parts(conv)
    cap = DescriptorSystem.siso([link.link.C_cap, 0.0], [1.0])
    full = lti.block([[yaa, ya], [yb, ydd + cap + y_far]])
    y = FramedBlock(schur_eliminate(full, [0, 1]), "msd", conv.frame, "admittance")
    return apply_io(y, 0.0) if with_io else replace(y, frame=0.0)


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionSpec:
    """Source/load split at ``bus``; ``k_part`` of the source impedance moves to the load."""

    bus: str
    k_part: float = 0.0
    source: tuple | None = None

    def __post_init__(self):
        if not 0.0 <= self.k_part < 1.0:
            raise ValueError("k_part must lie in [0, 1)")
        if self.source is not None:
            object.__setattr__(self, "source", tuple(self.source))


def partition(asm: AssembledSystem, spec: PartitionSpec):
    """Return ``(Z_source, Y_load)`` for a partition.

    ``Z_source = (1 - k) Z_S`` and ``Y_load = (Y_L^-1 + k Z_S)^-1`` where
    ``Z_S`` is the source impedance and ``Y_L`` the load admittance at the
    partition bus.
    """
    zs = source_impedance(asm, spec.bus, spec.source)
    yl = load_subsystem(asm, spec.bus, spec.source)
    k = spec.k_part
    if k == 0.0:
        return zs, yl
    zsrc = zs.with_block(zs.block * (1.0 - k))
    yload = FramedBlock((yl.block.inv() + zs.block * k).inv(), "msd", 0.0, "admittance")
    return zsrc, yload
