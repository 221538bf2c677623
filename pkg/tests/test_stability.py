import numpy as np
import pytest

from impnet.components import PassiveBranch, branch_admittance, branch_impedance
from impnet.frames import FramedBlock, apply_io
from impnet.lti import DescriptorSystem, transmission_zeros
from impnet.network import (
    PartitionSpec,
    assemble_ysys,
    load_subsystem,
    loop_impedance,
    partition,
    source_impedance,
    split_at,
)
from impnet.stability import (
    partition_sweep,
    sc1_nyquist,
    sc2_loop_zeros,
    sc3_system_zeros,
    weak_point_scan,
    zeros_verdict,
)
from impnet.topologies import twin_vsc_network, reconstructed_vsc

from conftest import multiset_error


def _split(net, bus="PCC"):
    asm = assemble_ysys(net)
    return asm, source_impedance(asm, bus), load_subsystem(asm, bus)


def test_passive_source_and_load_are_stable():
    zs = branch_impedance(PassiveBranch.from_reactance(0.2, 0.01))
    yl = branch_admittance(PassiveBranch.from_reactance(0.5, 1.0))
    v = sc1_nyquist(zs, yl)
    assert v.verdict == "stable" and v.winding == 0 and v.rhp_open_loop_poles == 0


def test_scalar_loop_with_known_rhp_pole():
    # L = k / (s - 1): closed loop s - 1 + k is stable for k > 1
    zs = FramedBlock(DescriptorSystem.siso([1.0], [1.0, -1.0]), "msd", 0.0, "impedance")
    for k, expect in ((3.0, "stable"), (0.5, "unstable")):
        yl = FramedBlock(DescriptorSystem.static([[k]]), "msd", 0.0, "admittance")
        v = sc1_nyquist(zs, yl)
        assert v.rhp_open_loop_poles == 1
        assert v.verdict == expect
        if expect == "stable":
            assert v.winding == -1


def test_zeros_verdict_marginal_band():
    v = zeros_verdict("SC3", np.array([-1.0, 1e-9 + 3j, 1e-9 - 3j]))
    assert v.verdict == "marginal"
    assert v.critical_frequencies == (pytest.approx(3 / (2 * np.pi)),)


def test_criteria_agree_across_pll_boundary(pll10_net, pll15_net):
    for net, expect in ((pll10_net, "stable"), (pll15_net, "unstable")):
        asm, zs, yl = _split(net)
        v1 = sc1_nyquist(zs, yl)
        v2 = sc2_loop_zeros(loop_impedance(zs, yl.inverse()))
        v3 = sc3_system_zeros(asm)
        assert v1.verdict == v2.verdict == v3.verdict == expect
        assert v1.details["loci_consistent"]


def test_pll10_case_has_a_lightly_damped_pair(pll10_net):
    v = sc3_system_zeros(assemble_ysys(pll10_net))
    ld = v.details["least_damped"]
    assert ld.real < 0 and abs(ld.real) < 0.1 * abs(ld.imag)


def test_sc2_zeros_equal_sc3_zeros(pll15_net):
    asm, zs, yl = _split(pll15_net)
    z2 = transmission_zeros(loop_impedance(zs, yl.inverse()).block)
    z3 = transmission_zeros(asm.Y_sys)
    assert multiset_error(z2, z3) < 1e-6


def test_single_device_loci_invariant_under_rotation(pll10_net):
    asm = assemble_ysys(pll10_net)
    rest, dev = split_at(asm, "B1", ["VSC1"])
    zs = rest.inverse()
    base = sc1_nyquist(zs, dev)
    # rotate both halves of the single-device split by the same angle
    for th in (0.4, -1.3):
        zr = apply_io(FramedBlock(zs.block, "msd", th, "impedance"), 0.0)
        yr = apply_io(FramedBlock(dev.block, "msd", th, "admittance"), 0.0)
        v = sc1_nyquist(zr, yr)
        assert v.winding == base.winding
        assert v.details["min_distance"] == pytest.approx(base.details["min_distance"], rel=1e-9)


@pytest.mark.parametrize("density", [2, 4])
def test_winding_stable_under_refinement(pll15_net, density):
    _, zs, yl = _split(pll15_net)
    assert sc1_nyquist(zs, yl, density=density).winding == sc1_nyquist(zs, yl).winding


def test_partition_sweep_moves_pair_right(pll30_net):
    sw = partition_sweep(assemble_ysys(pll30_net), [0.0, 0.2, 0.4, 0.6, 0.8])
    re = [p.dominant_pair.real for p in sw.points]
    assert all(b > a for a, b in zip(re, re[1:]))
    assert sw.first_rhp_k is not None and sw.first_rhp_k <= 0.9
    assert len(set(sw.verdicts)) == 1
    assert sw.points[-1].rhp_poles >= 2


def test_partition_sweep_at_zero_reproduces_sc1(pll10_net):
    asm = assemble_ysys(pll10_net)
    sw = partition_sweep(asm, [0.0, 0.3])
    zs, yl = partition(asm, PartitionSpec("PCC", 0.0))
    assert sw.points[0].verdict.winding == sc1_nyquist(zs, yl).winding


def test_weak_point_symmetry():
    v = reconstructed_vsc(1.0, pll_bw=10.0, outer_bw=10.0)
    rep = weak_point_scan(assemble_ysys(twin_vsc_network(v, v, xs=0.125)), ["VSC1", "VSC2"])
    assert rep.entry("VSC1").margin == pytest.approx(rep.entry("VSC2").margin, rel=1e-6)
    assert all(e.margin >= 0 for e in rep.entries)
