import numpy as np
import pytest
from dataclasses import replace

from impnet.components import PassiveBranch
from impnet.errors import DisconnectedBus, FrameMismatch, UnsolvedOperatingPoint
from impnet.frames import FramedBlock
from impnet.lti import DescriptorSystem, freqresp, transmission_zeros
from impnet.network import (
    Area,
    Branch,
    Bus,
    Device,
    GridSource,
    NetworkModel,
    PartitionSpec,
    ac_reduce_with_dclink,
    assemble_ysys,
    dc_reduce,
    load_subsystem,
    loop_impedance,
    partition,
    pcc_aggregate,
    source_impedance,
    split_at,
)
from impnet.oracle import dc_port_admittance
from impnet.topologies import twin_vsc_network, reconstructed_vsc

from conftest import multiset_error

S = 2j * np.pi * np.linspace(2.0, 100.0, 20)


def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_assembly_requires_a_solved_network():
    net = twin_vsc_network(solve=False)
    with pytest.raises(UnsolvedOperatingPoint):
        assemble_ysys(net)


def test_disconnected_bus_is_rejected():
    with pytest.raises(DisconnectedBus):
        NetworkModel([Area("ac", "grid")], [Bus("A", "ac"), Bus("B", "ac")], [],
                     [Device("grid", "A", "grid", GridSource(PassiveBranch.from_reactance(0.1))),
                      Device("load", "B", "shunt", PassiveBranch.from_reactance(0.0, 1.0))])


def test_unloaded_devices_make_io_irrelevant():
    v = reconstructed_vsc(0.0, pll_bw=20.0)
    net = twin_vsc_network(v, v, xs=0.125)
    a = pcc_aggregate(net, "PCC", with_io=True)
    b = pcc_aggregate(net, "PCC", with_io=False)
    assert _rel(freqresp(a.block, S), freqresp(b.block, S)) < 1e-10


def test_loaded_devices_make_io_matter(bidirectional_net):
    a = freqresp(pcc_aggregate(bidirectional_net, "PCC", True).block, S)
    b = freqresp(pcc_aggregate(bidirectional_net, "PCC", False).block, S)
    for i in range(2):
        for j in range(2):
            assert np.max(np.abs(a[:, i, j] - b[:, i, j])) > 1e-6 * np.max(np.abs(a[:, i, j]))


def test_circuit_and_schur_paths_agree(pll10_net):
    circ = pcc_aggregate(pll10_net, "PCC")
    schur = load_subsystem(assemble_ysys(pll10_net), "PCC").inverse()
    assert _rel(freqresp(circ.block, S), freqresp(schur.block, S)) < 1e-9


def test_source_impedance_is_the_grid(pll10_net):
    asm = assemble_ysys(pll10_net)
    zs = source_impedance(asm, "PCC")
    grid = pll10_net.device("grid").model.branch
    L = grid.L
    H = freqresp(zs.block, S)
    assert np.allclose(H[:, 0, 0], (S + 1j * pll10_net.omega1) * L)


def test_loop_impedance_and_frame_contract():
    a = FramedBlock(DescriptorSystem.static(np.eye(2)), "msd", 0.0)
    b = FramedBlock(DescriptorSystem.static(2 * np.eye(2)), "msd", 0.0)
    assert np.allclose(loop_impedance(a, b)(0.0), 3 * np.eye(2))
    with pytest.raises(FrameMismatch):
        loop_impedance(a, replace(b, frame=0.4))


def test_loop_zeros_invariant_under_partition(pll30_net):
    asm = assemble_ysys(pll30_net)
    ref = None
    for k in (0.0, 0.2, 0.5, 0.8):
        zs, yl = partition(asm, PartitionSpec("PCC", k))
        z = transmission_zeros(loop_impedance(zs, yl.inverse()).block)
        rhp = z[z.real > 1e-6]
        if ref is None:
            ref = rhp
        assert multiset_error(rhp, ref) < 1e-6


def test_partition_at_zero_is_the_plain_split(pll10_net):
    asm = assemble_ysys(pll10_net)
    zs0, yl0 = partition(asm, PartitionSpec("PCC", 0.0))
    assert _rel(freqresp(yl0.block, S), freqresp(load_subsystem(asm, "PCC").block, S)) == 0
    with pytest.raises(ValueError):
        PartitionSpec("PCC", 1.0)


def test_passive_subnetwork_is_reciprocal():
    net = NetworkModel([Area("ac", "grid")], [Bus("A", "ac"), Bus("B", "ac")],
                       [Branch("l", "A", "B", PassiveBranch.from_reactance(0.1, 0.01, 0.02))],
                       [Device("grid", "A", "grid", GridSource(PassiveBranch.from_reactance(0.2))),
                        Device("load", "B", "shunt", PassiveBranch.from_reactance(0.5, 1.0, 0.1))]
                       ).solve()
    H = freqresp(assemble_ysys(net).Y_sys, S)
    assert np.allclose(H, np.transpose(H, (0, 2, 1)), rtol=1e-12, atol=1e-12)


def test_split_reassembles(pll10_net):
    asm = assemble_ysys(pll10_net)
    rest, dev = split_at(asm, "B1", ["VSC1"])
    # both halves seen at B1 add up to the Kron-reduced network admittance
    total = load_subsystem(asm, "B1", source=["VSC1"])
    assert _rel(freqresp(rest.block, S), freqresp(total.block, S)) < 1e-9


def test_dc_reduction_matches_the_oracle(acdc_net):
    asm = assemble_ysys(acdc_net)
    for term in ("HVDC1", "HVDC2"):
        got = freqresp(dc_reduce(asm, term), S)[:, 0, 0]
        ref = dc_port_admittance(acdc_net, term, S)
        assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-8


def test_receiving_side_does_not_depend_on_io(acdc_net):
    asm = assemble_ysys(acdc_net)
    a = freqresp(dc_reduce(asm, "HVDC2", True), S)
    b = freqresp(dc_reduce(asm, "HVDC2", False), S)
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-10


def test_stiff_dc_link_decouples_the_ac_side(acdc_net):
    from impnet.components import DcLink
    from impnet.network import _converter

    stiff = replace(acdc_net, dc_links=(replace(acdc_net.dc_links[0], link=DcLink(C_cap=1e9)),))
    y = ac_reduce_with_dclink(assemble_ysys(stiff), "HVDC1")
    conv = _converter(stiff.device("HVDC1")).nodal()
    from impnet.frames import apply_io
    own = apply_io(FramedBlock(conv.block[0:2, 0:2], "msd", conv.frame, "admittance"), 0.0)
    assert _rel(freqresp(y.block, S), freqresp(own.block, S)) < 1e-6
