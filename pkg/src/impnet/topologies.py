"""Builders for the two reference topologies and seeded random variants.

* ``twin_vsc_network``: two converters, each behind a line, feeding a common
  bus that is tied to a Thevenin grid.
* ``acdc_network``: the same converter pair fed into a V/f HVDC terminal
  (sending area); the receiving terminal sits behind a line on a
  Thevenin grid (receiving area).
"""

from __future__ import annotations

import numpy as np

from .components import OMEGA1, DcLink, OperatingPoint, PassiveBranch, VscDevice
from .errors import NoConvergence
from .network import Area, Branch, Bus, DcLinkSpec, Device, GridSource, NetworkModel

__all__ = ["RECONSTRUCTED_VSC", "twin_vsc_network", "acdc_network", "random_twin_vsc_network",
           "reconstructed_vsc"]

#: Filter and feed-forward settings of the reconstructed grid-following
#: converter used by every reference scenario (0.05 p.u. filter reactance,
#: no grid-voltage feed-forward).  Bandwidths and set-points come from the
#: scenario itself.
RECONSTRUCTED_VSC = {"Lf": 0.05 / OMEGA1, "feedforward": False}


def reconstructed_vsc(P=1.0, Q=0.0, *, cc_bw=300.0, pll_bw=20.0, outer_bw=20.0, **kw):
    """PQ converter with the reference filter/feed-forward settings."""
    opts = {**RECONSTRUCTED_VSC, **kw}
    return VscDevice(op=OperatingPoint(P0=P, Q0=Q), mode="PQ", cc_bw=cc_bw, pll_bw=pll_bw,
                     outer_bw=outer_bw, **opts)


_vsc = reconstructed_vsc


def twin_vsc_network(vsc1=None, vsc2=None, x1=0.1, x2=0.1, xs=0.25, r_line=0.0, rs=0.0,
                 omega1=OMEGA1, solve=True) -> NetworkModel:
    """Two PQ converters on radial feeders into a PCC with a Thevenin grid.

    ``vsc1``/``vsc2`` are :class:`VscDevice` instances (default: 1 p.u.
    output each); reactances are in p.u. at the fundamental.
    """
    vsc1 = vsc1 or _vsc(1.0)
    vsc2 = vsc2 or _vsc(1.0)
    areas = [Area("ac", "grid")]
    buses = [Bus("B1", "ac"), Bus("B2", "ac"), Bus("PCC", "ac")]
    lines = [
        Branch("Z1", "B1", "PCC", PassiveBranch.from_reactance(x1, r_line, omega1=omega1)),
        Branch("Z2", "B2", "PCC", PassiveBranch.from_reactance(x2, r_line, omega1=omega1)),
    ]
    devs = [
        Device("VSC1", "B1", "vsc", vsc1),
        Device("VSC2", "B2", "vsc", vsc2),
        Device("grid", "PCC", "grid",
               GridSource(PassiveBranch.from_reactance(xs, rs, omega1=omega1))),
    ]
    net = NetworkModel(areas, buses, lines, devs, omega1=omega1)
    return net.solve() if solve else net


def acdc_network(vsc1=None, vsc2=None, sending=None, receiving=None, x1=0.1, x2=0.1,
                 x3=0.1, xs=0.25, rs=0.0, link=None, omega1=OMEGA1, solve=True) -> NetworkModel:
    """Two-area ac/dc system: converter pair -> V/f terminal -> dc link -> grid."""
    vsc1 = vsc1 or _vsc(1.0)
    vsc2 = vsc2 or _vsc(1.0)
    sending = sending or VscDevice(mode="VF", outer_bw=10.0, op=OperatingPoint(Udc0=1.0))
    # the receiving terminal supports the ac voltage so 2 p.u. can be delivered
    receiving = receiving or VscDevice(mode="DCV", outer_bw=50.0, q_bw=10.0, pll_bw=10.0,
                                       op=OperatingPoint(Q0=0.6, Udc0=1.0))
    link = link or DcLink()
    areas = [Area("sending", "HVDC1"), Area("receiving", "grid")]
    buses = [Bus("B1", "sending"), Bus("B2", "sending"), Bus("PCC1", "sending"),
             Bus("B3", "receiving"), Bus("PCC2", "receiving")]
    lines = [
        Branch("Z1", "B1", "PCC1", PassiveBranch.from_reactance(x1, omega1=omega1)),
        Branch("Z2", "B2", "PCC1", PassiveBranch.from_reactance(x2, omega1=omega1)),
        Branch("Z3", "B3", "PCC2", PassiveBranch.from_reactance(x3, omega1=omega1)),
    ]
    devs = [
        Device("VSC1", "B1", "vsc", vsc1),
        Device("VSC2", "B2", "vsc", vsc2),
        Device("HVDC1", "PCC1", "hvdc", sending, role="sending"),
        Device("HVDC2", "B3", "hvdc", receiving, role="receiving"),
        Device("grid", "PCC2", "grid",
               GridSource(PassiveBranch.from_reactance(xs, rs, omega1=omega1))),
    ]
    net = NetworkModel(areas, buses, lines, devs, [DcLinkSpec("dc", "HVDC1", "HVDC2", link)],
                       omega1=omega1)
    return net.solve() if solve else net


def random_twin_vsc_network(seed: int, max_draws: int = 50) -> NetworkModel:
    """Seeded random parameterization of :func:`twin_vsc_network`.

    Bandwidths, set-points and line data are drawn from ranges around the
    reference scenarios so that both stable and unstable cases occur.  A
    draw whose power flow has no solution (transfer limit exceeded) is
    discarded and the same generator draws again, so each seed still maps
    to exactly one network.
    """
    rng = np.random.default_rng(seed)

    def dev():
        return _vsc(P=float(rng.uniform(-0.6, 1.0)), Q=float(rng.uniform(-0.2, 0.2)),
                    cc_bw=float(rng.uniform(200, 400)), pll_bw=float(rng.uniform(5, 50)),
                    outer_bw=float(rng.uniform(5, 30)),
                    Lf=float(rng.uniform(0.05, 0.15)) / OMEGA1,
                    feedforward=bool(rng.random() < 0.5))

    for _ in range(max_draws):
        v1, v2 = dev(), dev()
        lines = dict(x1=float(rng.uniform(0.05, 0.2)), x2=float(rng.uniform(0.05, 0.2)),
                     xs=float(rng.uniform(0.1, 0.3)), r_line=float(rng.uniform(0.0, 0.02)),
                     rs=float(rng.uniform(0.0, 0.02)))
        try:
            return twin_vsc_network(v1, v2, **lines)
        except NoConvergence:
            continue
    raise NoConvergence(f"no solvable draw for seed {seed} in {max_draws} attempts")
