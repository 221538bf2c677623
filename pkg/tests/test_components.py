import numpy as np
import pytest

from impnet.components import (
    OMEGA1,
    OperatingPoint,
    PassiveBranch,
    VscDevice,
    branch_admittance,
    branch_impedance,
    controller_gains,
    hvdc_converter,
    newton_power_flow,
    vsc_admittance,
    vsc_impedance,
)
from impnet.errors import (
    EmptyBranch,
    InvalidOperatingPoint,
    RoleMismatch,
    UnsupportedMode,
)
from impnet.frames import is_dq_symmetric
from impnet.lti import freqresp, poles

S = 2j * np.pi * np.array([1.0, 7.0, 33.0, 120.0])


def test_branch_impedance_sequence_entries():
    b = PassiveBranch.from_reactance(0.1, 0.02)
    z = freqresp(branch_impedance(b).block, S)
    L = 0.1 / OMEGA1
    assert np.allclose(z[:, 0, 0], 0.02 + (S + 1j * OMEGA1) * L)
    assert np.allclose(z[:, 1, 1], 0.02 + (S - 1j * OMEGA1) * L)
    assert np.allclose(z[:, 0, 1], 0) and np.allclose(z[:, 1, 0], 0)


def test_capacitor_branch_admittance():
    b = PassiveBranch.from_reactance(b=0.05)
    y = freqresp(branch_admittance(b).block, S)
    C = 0.05 / OMEGA1
    assert np.allclose(y[:, 0, 0], (S + 1j * OMEGA1) * C)
    assert np.allclose(y[:, 1, 1], (S - 1j * OMEGA1) * C)


def test_empty_branch_rejected():
    with pytest.raises(EmptyBranch):
        PassiveBranch()


def test_operating_point_currents():
    op = OperatingPoint(U0=1.1, P0=0.8, Q0=0.2)
    assert op.Id0 == pytest.approx(0.8 / 1.1)
    assert op.Iq0 == pytest.approx(-0.2 / 1.1)
    with pytest.raises(InvalidOperatingPoint):
        OperatingPoint(U0=1.0, P0=1.0, Id0=0.5)


def test_controller_gains_formulas():
    v = VscDevice(cc_bw=300, pll_bw=20, outer_bw=10, Lf=0.1 / OMEGA1, Rf=0.01)
    g = controller_gains(v)
    assert g["kp_cc"] == pytest.approx(2 * np.pi * 300 * v.Lf)
    assert g["ki_cc"] == pytest.approx(2 * np.pi * 300 * 0.01)
    wn = 2 * np.pi * 20
    assert g["kp_pll"] == pytest.approx(2 * 0.707 * wn)
    assert g["ki_pll"] == pytest.approx(wn ** 2)
    assert g["ki_p"] == pytest.approx(2 * np.pi * 10)


def test_unloaded_converter_is_dq_symmetric_and_loaded_is_not():
    idle = vsc_admittance(VscDevice(op=OperatingPoint(P0=0.0)))
    loaded = vsc_admittance(VscDevice(op=OperatingPoint(P0=1.0)))
    assert is_dq_symmetric(idle)
    assert not is_dq_symmetric(loaded)


def test_converter_admittance_is_stable_standalone():
    y = vsc_admittance(VscDevice(op=OperatingPoint(P0=0.7, Q0=0.1)))
    assert np.all(poles(y.block).real < 0)


def test_controls_disabled_limit_is_the_filter():
    v = VscDevice(cc_bw=0, pll_bw=0, outer_bw=0, feedforward=False, decoupling=False,
                  op=OperatingPoint(P0=0.5))
    y = freqresp(vsc_admittance(v, check=False).block, S)
    # converter voltage frozen: load-convention admittance of the R-L filter
    filt = freqresp(branch_admittance(PassiveBranch(R=v.Rf, L=v.Lf)).block, S)
    assert np.allclose(y, filt, rtol=1e-12)


def test_impedance_is_inverse_of_admittance():
    v = VscDevice(op=OperatingPoint(P0=0.5, theta=0.3))
    z, y = vsc_impedance(v), vsc_admittance(v)
    assert z.frame == pytest.approx(0.3)
    assert np.allclose(freqresp(z.block, S) @ freqresp(y.block, S), np.eye(2)[None])


def test_mode_and_role_contracts():
    with pytest.raises(UnsupportedMode):
        vsc_admittance(VscDevice(mode="DCV", op=OperatingPoint(Udc0=1.0)))
    with pytest.raises(UnsupportedMode):
        VscDevice(mode="XYZ")
    with pytest.raises(RoleMismatch):
        hvdc_converter(VscDevice(mode="PQ"), "sending")
    conv = hvdc_converter(VscDevice(mode="VF", op=OperatingPoint(Udc0=1.0)), "sending")
    assert conv.block.block.shape == (3, 3)


def test_vf_mode_drops_the_pll():
    assert VscDevice(mode="VF", pll_bw=30).pll_bw == 0.0


@pytest.mark.parametrize("role, mode, signs", [("sending", "VF", (1, 1, -1)),
                                               ("receiving", "DCV", (-1, -1, 1))])
def test_nodal_form_flips_to_load_convention(role, mode, signs):
    conv = hvdc_converter(VscDevice(mode=mode, op=OperatingPoint(Udc0=1.0)), role)
    H = freqresp(conv.block.block, S)
    N = freqresp(conv.nodal().block, S)
    assert np.allclose(N, np.asarray(signs)[None, :, None] * H)


def test_two_bus_power_flow_matches_closed_form():
    x = 0.2
    Y = np.array([[1, -1], [-1, 1]]) / (1j * x)
    V = newton_power_flow(Y, slack=[1], V_slack=[1.0], S_inj=np.array([0.8 + 0.0j, 0.0]))
    # P = |V1||V2| sin(delta) / x with unity power factor at bus 0
    P = abs(V[0]) * sin_delta(V) / x
    assert P == pytest.approx(0.8, rel=1e-10)
    Q = np.imag(V[0] * np.conj(Y[0] @ V))
    assert Q == pytest.approx(0.0, abs=1e-10)


def sin_delta(V):
    return np.sin(np.angle(V[0]) - np.angle(V[1])) * abs(V[1])
