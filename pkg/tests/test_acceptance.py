"""Acceptance suite: one printed PASS/FAIL line per criterion.

Run on its own with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in the "acceptance criteria" section of the terminal summary.
"""

import json
import time

import numpy as np
import pytest

from impnet.cli import run as cli_run
from impnet.config import load_config
from impnet.frames import FramedBlock, apply_io, sym_decompose, sym_recompose
from impnet.lti import block, classify_half_plane, freqresp, transmission_zeros
from impnet.network import (
    PartitionSpec,
    assemble_ysys,
    dc_reduce,
    dc_side_partition,
    load_subsystem,
    loop_impedance,
    partition,
    source_impedance,
    split_at,
)
from impnet.oracle import closed_loop_eigenvalues, dc_port_admittance, simulate_step
from impnet.stability import (
    partition_sweep,
    sc1_nyquist,
    sc2_loop_zeros,
    sc3_system_zeros,
    weak_point_scan,
)
from impnet.topologies import random_twin_vsc_network, twin_vsc_network

from conftest import SCENARIOS, multiset_error, pll_pair_devices, random_stable_system


class Check:
    """Collects named sub-checks and formats the criterion line."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.items = []
        self.t0 = time.perf_counter()

    def add(self, label, ok, value=""):
        self.items.append((label, bool(ok), value))

    @property
    def elapsed(self):
        return time.perf_counter() - self.t0

    def finish(self, announce, budget=None):
        if budget is not None:
            self.add(f"runtime < {budget:g} s", self.elapsed < budget, f"{self.elapsed:.2f} s")
        ok = all(i[1] for i in self.items)
        detail = "; ".join(f"{l}{' = ' + str(v) if v != '' else ''}{'' if o else ' [failed]'}"
                           for l, o, v in self.items)
        announce(f"{'PASS' if ok else 'FAIL'}  AC{self.number} {self.title} "
                 f"({self.elapsed:.2f} s): {detail}")
        failed = [l for l, o, _ in self.items if not o]
        assert not failed, f"AC{self.number} failed checks: {failed}"


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _split(net, bus="PCC"):
    asm = assemble_ysys(net)
    return asm, source_impedance(asm, bus), load_subsystem(asm, bus)


# ---------------------------------------------------------------------------

def test_ac1_io_property_suite(announce):
    chk = Check(1, "IO properties on 100 blocks x 10 angles x 20 frequencies")
    rng = np.random.default_rng(2024)
    s = 1j * np.logspace(-1, 3.5, 20)
    e1 = e2 = e3 = 0.0
    for _ in range(100):
        a = random_stable_system(rng, 3, 1, 1)
        b = random_stable_system(rng, 3, 1, 1)
        sym = block([[a, -b], [b, a]])
        gen = random_stable_system(rng, 4, 2, 2)
        H_sym = freqresp(sym, s)
        msd = sym_decompose(FramedBlock(gen, "dq", 0.0))
        H_msd = freqresp(msd.block, s)
        eig0 = np.linalg.eigvals(H_msd)
        for th in rng.uniform(-np.pi, np.pi, 10):
            # invariance of a dq-symmetric block
            H1 = freqresp(apply_io(FramedBlock(sym, "dq", th), 0.0).block, s)
            e1 = max(e1, _rel(H1, H_sym))
            # diagonals kept, off-diagonals rotated by exp(+-2j theta)
            H2 = freqresp(apply_io(FramedBlock(msd.block, "msd", th), 0.0).block, s)
            expect = H_msd.copy()
            expect[:, 0, 1] *= np.exp(2j * th)
            expect[:, 1, 0] *= np.exp(-2j * th)
            e2 = max(e2, _rel(H2, expect))
            # eigenvalue multisets at every frequency
            eig1 = np.linalg.eigvals(H2)
            for k in range(s.size):
                e3 = max(e3, multiset_error(eig1[k], eig0[k]) / max(1.0, np.abs(eig0[k]).max()))
    chk.add("dq-symmetric invariance max rel err < 1e-10", e1 < 1e-10, f"{e1:.1e}")
    chk.add("off-diagonal phase max rel err < 1e-10", e2 < 1e-10, f"{e2:.1e}")
    chk.add("eigen-loci invariance max rel err < 1e-10", e3 < 1e-10, f"{e3:.1e}")
    chk.finish(announce, budget=10.0)


def test_ac2_transform_round_trips(announce):
    chk = Check(2, "sequence round trip and dq/sequence IO conjugation on 50 blocks")
    rng = np.random.default_rng(7)
    s = 1j * np.logspace(-1, 3.5, 20)
    e_rt = e_cj = 0.0
    for _ in range(50):
        th = rng.uniform(-np.pi, np.pi)
        z = FramedBlock(random_stable_system(rng, 4, 2, 2), "dq", th)
        H = freqresp(z.block, s)
        e_rt = max(e_rt, _rel(freqresp(sym_recompose(sym_decompose(z)).block, s), H))
        th_new = rng.uniform(-np.pi, np.pi)
        p1 = freqresp(sym_decompose(apply_io(z, th_new)).block, s)
        p2 = freqresp(apply_io(sym_decompose(z), th_new).block, s)
        e_cj = max(e_cj, _rel(p1, p2))
    chk.add("round trip max rel err < 1e-12", e_rt < 1e-12, f"{e_rt:.1e}")
    chk.add("conjugation max rel err < 1e-12", e_cj < 1e-12, f"{e_cj:.1e}")
    chk.finish(announce, budget=5.0)


def test_ac3_dual_path_equivalence(announce):
    chk = Check(3, "SC3 RHP zeros vs oracle eigenvalues on 24 random two-converter networks")
    seeds = range(24)
    worst, bad_match, split, n_unstable = 0.0, [], [], 0
    for seed in seeds:
        net = random_twin_vsc_network(seed)
        asm, zs, yl = _split(net)
        z = transmission_zeros(asm.Y_sys)
        ev = closed_loop_eigenvalues(net)
        rz = classify_half_plane(z)[2]
        re = classify_half_plane(ev)[2]
        if rz.size != re.size:
            bad_match.append(seed)
        elif rz.size:
            err = multiset_error(rz, re) / max(1.0, np.abs(re).max())
            worst = max(worst, err)
            if err > 1e-6:
                bad_match.append(seed)
        v = {sc1_nyquist(zs, yl).verdict, sc2_loop_zeros(loop_impedance(zs, yl.inverse())).verdict,
             sc3_system_zeros(asm).verdict}
        if len(v) != 1:
            split.append(seed)
        n_unstable += "unstable" in v
    chk.add("RHP sets match within 1e-6", not bad_match, f"worst {worst:.1e}, mismatched seeds {bad_match}")
    chk.add("SC1/SC2/SC3 unanimous", not split, f"split seeds {split}")
    chk.add("sample contains unstable cases", n_unstable > 0, f"{n_unstable} unstable")
    chk.finish(announce, budget=60.0)


def test_ac4_loop_and_system_zeros_coincide(announce, pll10_net, pll15_net):
    chk = Check(4, "full zero multisets of det(Z_loop) and det(Y_sys) on the PLL 10/15 Hz fixture")
    for label, net in (("PLL1 10 Hz", pll10_net), ("PLL1 15 Hz", pll15_net)):
        asm, zs, yl = _split(net)
        z2 = transmission_zeros(loop_impedance(zs, yl.inverse()).block)
        z3 = transmission_zeros(asm.Y_sys)
        ok = z2.size == z3.size
        err = multiset_error(z2, z3) / max(1.0, np.abs(z3).max()) if ok else np.inf
        chk.add(f"{label}: {z3.size} zeros, rel err < 1e-6", ok and err < 1e-6, f"{err:.1e}")
    chk.finish(announce)


def test_ac5_pll_bandwidth_crosses_boundary(announce):
    chk = Check(5, "VSC1 PLL sweep 10 to 15 Hz crosses a stability boundary")
    verdicts, first = [], None
    for pll in np.arange(10.0, 15.01, 0.5):
        net = twin_vsc_network(*pll_pair_devices(float(pll)), xs=0.125)
        v = sc3_system_zeros(assemble_ysys(net))
        verdicts.append((float(pll), v.verdict))
        if first is None and v.verdict == "unstable":
            first = (float(pll), net, v)
    chk.add("stable at 10 Hz", verdicts[0][1] == "stable", verdicts[0][1])
    chk.add("unstable by 15 Hz", first is not None, "none" if first is None else f"first at {first[0]:g} Hz")
    if first is not None:
        pll, net, v = first
        pair = max(v.rhp_zeros, key=lambda z: z.real)
        f_pair = abs(pair.imag) / (2 * np.pi)
        chk.add("critical pair in 10-30 Hz", 10.0 <= f_pair <= 30.0, f"{f_pair:.2f} Hz")
        r = simulate_step(net, "VSC1.P_ref", horizon=2.0)
        dev = abs(r.frequency - f_pair) / f_pair
        chk.add("oracle oscillation within 5%", dev < 0.05,
                f"{r.frequency:.2f} Hz ({100 * dev:.2f}%), growth {r.growth_rate:+.2f}/s")
    chk.finish(announce)


def test_ac6_partition_sweep(announce, pll30_net):
    chk = Check(6, "partition factor sweep k = 0, .2, .4, .6, .8")
    sw = partition_sweep(assemble_ysys(pll30_net), [0.0, 0.2, 0.4, 0.6, 0.8])
    re = [p.dominant_pair.real for p in sw.points]
    chk.add("dominant pair moves right monotonically", all(b > a for a, b in zip(re, re[1:])),
            "[" + ", ".join(f"{x:.2f}" for x in re) + "]")
    chk.add("enters RHP at k <= 0.9", sw.first_rhp_k is not None and sw.first_rhp_k <= 0.9,
            f"k = {sw.first_rhp_k}")
    chk.add("SC1 verdict identical for all k", len(set(sw.verdicts)) == 1, sorted(set(sw.verdicts)))
    chk.finish(announce)


def test_ac7_weak_point_ranking(announce, mixed_net):
    chk = Check(7, "weak point: VSC2 (CC 240, PLL 25) weaker than VSC1 (CC 300, PLL 10)")
    rep = weak_point_scan(assemble_ysys(mixed_net), ["VSC1", "VSC2"])
    m1, m2 = rep.entry("VSC1").margin, rep.entry("VSC2").margin
    chk.add("margin(VSC2) < margin(VSC1)", m2 < m1, f"{m2:.3f} vs {m1:.3f}")
    chk.finish(announce)


def test_ac8_io_impact_on_dc_side(announce):
    chk = Check(8, "dc-side reduction with and without IO")
    net = load_config(SCENARIOS / "fig5.toml").network.solve()
    f = np.unique(np.concatenate([np.arange(2.0, 10.0, 0.5), np.arange(10.0, 101.0, 2.0)]))
    s = 2j * np.pi * f
    asm = assemble_ysys(net)
    ref = dc_port_admittance(net, "HVDC1", s)
    with_io = freqresp(dc_reduce(asm, "HVDC1", True), s)[:, 0, 0]
    without = freqresp(dc_reduce(asm, "HVDC1", False), s)[:, 0, 0]
    e_with = np.abs(with_io - ref) / np.abs(ref)
    e_without = np.abs(without - ref) / np.abs(ref)
    low = f < 10.0
    chk.add("with IO within 1% on 2-100 Hz", e_with.max() < 0.01, f"max {e_with.max():.1e}")
    chk.add("without IO deviates > 5% below 10 Hz", e_without[low].max() > 0.05,
            f"max {100 * e_without[low].max():.1f}%")
    r1 = freqresp(dc_reduce(asm, "HVDC2", True), s)
    r0 = freqresp(dc_reduce(asm, "HVDC2", False), s)
    e_rec = _rel(r1, r0)
    chk.add("receiving end identical to 1e-10", e_rec < 1e-10, f"{e_rec:.1e}")

    flip = load_config(SCENARIOS / "fig10_flip.toml").network.solve()
    fasm = assemble_ysys(flip)
    v_with = sc1_nyquist(*dc_side_partition(fasm, "dc", True))
    v_without = sc1_nyquist(*dc_side_partition(fasm, "dc", False))
    ev = closed_loop_eigenvalues(flip)
    _, marg, unst = classify_half_plane(ev)
    oracle = "unstable" if unst.size else ("marginal" if marg.size else "stable")
    chk.add("with/without IO verdicts differ", v_with.verdict != v_without.verdict,
            f"{v_with.verdict} vs {v_without.verdict}")
    chk.add("oracle confirms with-IO verdict", oracle == v_with.verdict,
            f"oracle {oracle}, max Re {ev.real.max():+.3f}")
    chk.finish(announce)


def _sc1_splits():
    """Every SC1 split exercised by the scenario fixtures."""
    for path in sorted(SCENARIOS.glob("*.toml")):
        cfg = load_config(path)
        s, net = cfg.analysis, cfg.network.solve()
        for io_flag in (True, False):
            asm = assemble_ysys(net, with_io=io_flag)
            tag = f"{path.stem}/{'io' if io_flag else 'no-io'}"
            for k in (s.kpart if path.stem == "fig8" else (0.0,)):
                yield f"{tag}/k={k:g}", partition(asm, PartitionSpec(s.bus, k, s.source))
            if net.dc_links and s.dc_link:
                yield f"{tag}/dc", dc_side_partition(asm, s.dc_link, io_flag)
            for c in s.candidates:
                d = net.device(c)
                ysrc, ydev = split_at(asm, d.bus, [d.name])
                yield f"{tag}/{c}", (ysrc.inverse(), ydev)


def test_ac9_winding_refinement(announce):
    chk = Check(9, "winding numbers under 2x and 4x contour refinement")
    changed, n = [], 0
    for label, (zs, yl) in _sc1_splits():
        w = [sc1_nyquist(zs, yl, density=d).winding for d in (1, 2, 4)]
        n += 1
        if len(set(w)) != 1:
            changed.append(f"{label}:{w}")
    chk.add(f"{n} splits unchanged", not changed, changed or "")
    chk.finish(announce)


COMMANDS = ("sweep", "nyquist", "zeros", "verdict", "weakpoint", "partition", "verify")


def test_ac10_cli_determinism(announce, tmp_path):
    chk = Check(10, "CLI byte-identical reruns on every scenario and zero verify mismatches")
    differ, errors, mismatches, runs = [], [], 0, 0
    for path in sorted(SCENARIOS.glob("*.toml")):
        for cmd in COMMANDS:
            outs = []
            for rep in range(2):
                out = tmp_path / f"{path.stem}.{cmd}.{rep}.json"
                rc = cli_run([cmd, "--config", str(path), "--out", str(out)])
                runs += 1
                if rc != 0 or not out.exists():
                    errors.append(f"{path.stem}:{cmd}:rc={rc}")
                    break
                outs.append(out.read_bytes())
            if len(outs) == 2 and outs[0] != outs[1]:
                differ.append(f"{path.stem}:{cmd}")
            if cmd == "verify" and outs:
                mismatches += json.loads(outs[0])["result"]["mismatches"]
    out = tmp_path / "random.json"
    rc = cli_run(["verify", "--random", "20", "--seed", "100", "--out", str(out)])
    rand = json.loads(out.read_text())["result"]["mismatches"] if out.exists() else -1
    chk.add(f"{runs} runs, exit code 0", not errors, errors or "")
    chk.add("byte-identical", not differ, differ or "")
    chk.add("verify mismatches on scenarios", mismatches == 0, mismatches)
    chk.add("verify mismatches on 20 random networks", rc == 0 and rand == 0, rand)
    chk.finish(announce)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
