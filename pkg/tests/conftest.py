"""Shared fixtures: reference networks and small random-system factories."""

from pathlib import Path

import numpy as np
import pytest

from impnet.lti import DescriptorSystem
from impnet.topologies import twin_vsc_network, acdc_network, reconstructed_vsc

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def random_stable_system(rng, n=4, m=2, p=2, descriptor=False):
    """Random real state-space block with poles in the open left half plane."""
    A = rng.standard_normal((n, n))
    A = A - (np.abs(np.linalg.eigvals(A)).max() + 0.5) * np.eye(n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = rng.standard_normal((p, m))
    if descriptor:
        # append an algebraic constraint x_alg = x_0, so E is singular
        E = np.zeros((n + 1, n + 1))
        E[:n, :n] = np.eye(n)
        Af = np.zeros((n + 1, n + 1))
        Af[:n, :n] = A
        Af[n, n] = -1.0
        Af[n, 0] = 1.0
        Bf = np.vstack([B, np.zeros((1, m))])
        Cf = np.hstack([C, rng.standard_normal((p, 1))])
        return DescriptorSystem(E, Af, Bf, Cf, D)
    return DescriptorSystem(np.eye(n), A, B, C, D)


def pll_pair_devices(pll1):
    return (reconstructed_vsc(1.0, pll_bw=pll1, outer_bw=20.0, cc_bw=300.0),
            reconstructed_vsc(1.0, pll_bw=40.0, outer_bw=20.0, cc_bw=300.0))


@pytest.fixture(scope="session")
def pll10_net():
    return twin_vsc_network(*pll_pair_devices(10.0), xs=0.125)


@pytest.fixture(scope="session")
def pll15_net():
    return twin_vsc_network(*pll_pair_devices(15.0), xs=0.125)


@pytest.fixture(scope="session")
def pll30_net():
    v = reconstructed_vsc(1.0, pll_bw=30.0, outer_bw=20.0, cc_bw=300.0)
    return twin_vsc_network(v, v, xs=0.1333)


@pytest.fixture(scope="session")
def mixed_net():
    return twin_vsc_network(reconstructed_vsc(1.0, cc_bw=300.0, pll_bw=10.0, outer_bw=10.0),
                        reconstructed_vsc(1.0, cc_bw=240.0, pll_bw=25.0, outer_bw=10.0),
                        xs=0.125)


@pytest.fixture(scope="session")
def bidirectional_net():
    return twin_vsc_network(reconstructed_vsc(1.0, pll_bw=20.0, outer_bw=20.0),
                        reconstructed_vsc(-0.5, pll_bw=20.0, outer_bw=20.0), xs=0.25)


@pytest.fixture(scope="session")
def acdc_net():
    """Loaded two-area system with a dc link between the areas."""
    from impnet.components import OperatingPoint, VscDevice

    v = reconstructed_vsc(1.0, pll_bw=10.0, outer_bw=10.0)
    rec = VscDevice(mode="DCV", outer_bw=40.0, q_bw=10.0, pll_bw=20.0,
                    op=OperatingPoint(Q0=0.6, Udc0=1.0))
    return acdc_network(v, v, receiving=rec, x3=0.15, xs=0.125)


def multiset_error(a, b):
    """Worst relative distance after greedy nearest matching; inf if sizes differ."""
    a, b = list(np.asarray(a, dtype=complex)), list(np.asarray(b, dtype=complex))
    if len(a) != len(b):
        return np.inf
    worst = 0.0
    for x in a:
        d = [abs(x - y) / max(1.0, abs(y)) for y in b]
        j = int(np.argmin(d))
        worst = max(worst, d[j])
        b.pop(j)
    return worst


# ---------------------------------------------------------------------------
# acceptance reporting
# ---------------------------------------------------------------------------

SUITE_BUDGET_S = 300.0
_acceptance_lines = pytest.StashKey[list]()
_session_start = pytest.StashKey[float]()


def pytest_sessionstart(session):
    import time

    session.config.stash[_session_start] = time.perf_counter()
    session.config.stash[_acceptance_lines] = []


@pytest.fixture
def announce(request, capsys):
    """Print one acceptance line immediately and keep it for the summary."""
    def emit(line):
        request.config.stash[_acceptance_lines].append(line)
        with capsys.disabled():
            print(f"\n{line}")
    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import time

    lines = config.stash.get(_acceptance_lines, [])
    if not lines:
        return
    elapsed = time.perf_counter() - config.stash[_session_start]
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in lines:
        tr.write_line(line)
    ok = elapsed < SUITE_BUDGET_S
    tr.write_line(f"{'PASS' if ok else 'FAIL'}  AC10b full test session runtime "
                  f"{elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)")
