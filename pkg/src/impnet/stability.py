"""Stability verdicts from the three impedance-based criteria.

* SC1: generalized Nyquist on the minor loop gain ``L = Z_source Y_load``,
  counting clockwise encirclements of the origin by ``det(I + L)`` on a
  clockwise D-contour, with the open-loop RHP poles of ``L`` accounted for.
* SC2: invariant zeros of the loop impedance ``Z_source + Z_load``.
* SC3: invariant zeros of the assembled nodal admittance ``Y_sys``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .components import OMEGA1
from .contour import DContour, phase_increments, track_eigenvalues, winding_number
from .errors import ContourTooCoarse, FrameMismatch, PointOnLocus, WrongShape
from .frames import FramedBlock
from .lti import classify_half_plane, freqresp, poles, transmission_zeros
from .network import AssembledSystem, PartitionSpec, partition, split_at

__all__ = [
    "StabilityVerdict",
    "MarginEntry",
    "MarginReport",
    "PartitionPoint",
    "PartitionSweep",
    "sc1_nyquist",
    "sc2_loop_zeros",
    "sc3_system_zeros",
    "zeros_verdict",
    "partition_sweep",
    "weak_point_scan",
]

STABLE, UNSTABLE, MARGINAL = "stable", "unstable", "marginal"


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of one criterion.

    ``winding`` is the net number of clockwise encirclements of the origin
    by ``det(I + L)`` (equivalently of -1 by the eigen-loci, summed); SC1
    is stable iff ``winding == -rhp_open_loop_poles``.
    """

    criterion: str
    verdict: str
    rhp_open_loop_poles: int | None = None
    winding: int | None = None
    rhp_zeros: tuple = ()
    critical_frequencies: tuple = ()
    details: dict = field(default_factory=dict, compare=False)

    @property
    def stable(self):
        return self.verdict == STABLE


def _pair_frequencies(vals):
    """Distinct |Im|/2pi of complex values (Hz), conjugates merged."""
    f = sorted({round(abs(v.imag) / (2 * np.pi), 9) for v in vals})
    return tuple(f)


def zeros_verdict(criterion, zeros, details=None) -> StabilityVerdict:
    """Verdict from a set of closed-loop natural frequencies."""
    stable, marg, rhp = classify_half_plane(zeros)
    if rhp.size:
        verdict, crit = UNSTABLE, np.concatenate([rhp, marg])
    elif marg.size:
        verdict, crit = MARGINAL, marg
    else:
        verdict, crit = STABLE, np.zeros(0)
    det = dict(details or {})
    osc = stable[np.abs(stable.imag) > 1e-9]
    if osc.size:
        zeta = -osc.real / np.abs(osc)
        k = int(np.argmin(zeta))
        det["least_damped"] = complex(osc[k])
        det["least_damped_ratio"] = float(zeta[k])
    return StabilityVerdict(criterion, verdict, rhp_zeros=tuple(complex(z) for z in rhp),
                            critical_frequencies=_pair_frequencies(crit),
                            details=det)


def sc2_loop_zeros(loop: FramedBlock) -> StabilityVerdict:
    """SC2: RHP zeros of ``det(Z_Loop)`` from the loop block's system pencil."""
    z = transmission_zeros(loop.block)
    return zeros_verdict("SC2", z, {"zeros": tuple(complex(v) for v in z)})


def sc3_system_zeros(asm: AssembledSystem) -> StabilityVerdict:
    """SC3: RHP zeros of ``det(Y_sys)`` for the whole assembled network."""
    z = transmission_zeros(asm.Y_sys)
    return zeros_verdict("SC3", z, {"zeros": tuple(complex(v) for v in z)})


# ---------------------------------------------------------------------------
# SC1
# ---------------------------------------------------------------------------

def _loop_values(zs, yl, pts):
    H = freqresp(zs, pts) @ freqresp(yl, pts)
    return H


def _contour_for(zs, yl, density=1, omega1=OMEGA1):
    pz = np.concatenate([poles(zs), poles(yl)])
    scale = max(1.0, np.abs(pz).max(initial=0.0))
    radius = 1e3 * scale
    _, marg, _ = classify_half_plane(pz)
    indent = 1e-3 * omega1
    others = pz[~np.isin(pz, marg)]
    for m in marg:
        d = np.abs(others - m)
        if d.size:
            indent = min(indent, 0.25 * d.min())
    return DContour(radius, axis_poles=marg, indent=indent, n_axis=400 * density,
                    n_arc=64 * density, n_indent=16 * density), pz


def sc1_nyquist(source: FramedBlock, load: FramedBlock, density=1,
                threshold=np.pi / 8) -> StabilityVerdict:
    """SC1: generalized Nyquist criterion for ``L = Z_source Y_load``.

    Parameters
    ----------
    source, load : FramedBlock
        Source impedance (or admittance) and load admittance (or impedance)
        at the same bus and frame; 2x2 ac blocks or 1x1 dc blocks.
    density : int
        Multiplier on the initial contour sampling (refinement studies).
    threshold : float
        Adaptive bisection continues while ``det(I + L)`` or any eigen-locus
        turns by more than this between neighbouring samples.
    """
    if source.domain != load.domain or not np.isclose(source.frame, load.frame, atol=1e-12):
        raise FrameMismatch("source and load must share domain and frame")
    zs = source.as_impedance().block
    yl = load.as_admittance().block
    if zs.shape != yl.shape or zs.shape[0] != zs.shape[1]:
        raise WrongShape(f"incompatible blocks {zs.shape} and {yl.shape}")
    contour, pz = _contour_for(zs, yl, density)
    _, _, rhp = classify_half_plane(pz)
    P = int(rhp.size)
    eye = np.eye(zs.shape[0])

    def track(pts):
        H = _loop_values(zs, yl, pts)
        return np.linalg.det(eye[None] + H)

    details = {"rhp_open_loop": tuple(complex(p) for p in rhp)}
    try:
        dvals = contour.refine(track, threshold=threshold)
        H = _loop_values(zs, yl, contour.points)
        loci = track_eigenvalues(H)
        # refine further where an individual locus turns quickly about -1
        for _ in range(8):
            steps = np.abs(phase_increments(loci + 1.0))
            bad = np.nonzero(np.any(steps > threshold, axis=1))[0]
            if bad.size == 0 or len(contour) > 200_000:
                break
            contour.midpoints(bad)
            H = _loop_values(zs, yl, contour.points)
            loci = track_eigenvalues(H)
        dvals = np.linalg.det(eye[None] + H)
        N = winding_number(dvals)
    except PointOnLocus as exc:
        details["reason"] = str(exc)
        return StabilityVerdict("SC1", MARGINAL, P, None, details=details)
    except ContourTooCoarse:
        raise
    # eigen-loci cross-check: per-locus phase steps about -1, closure matched
    lam = loci + 1.0
    closing = track_eigenvalues(np.stack([np.diag(loci[-1]), np.diag(loci[0])]))
    steps = np.angle(lam[1:] / lam[:-1]).sum(axis=0)
    perm_first = closing[1] + 1.0
    steps_total = steps.sum() + np.angle(perm_first / lam[-1]).sum()
    loci_winding = -int(np.rint(steps_total / (2 * np.pi)))
    axis = contour.axis_mask()
    dist = np.abs(loci[axis] + 1.0)
    k = np.unravel_index(np.argmin(dist), dist.shape)
    s_min = contour.points[axis][k[0]]
    details.update({
        "n_points": len(contour),
        "loci_winding": loci_winding,
        "loci_consistent": loci_winding == N,
        "min_distance": float(dist[k]),
        "min_distance_hz": float(abs(s_min.imag) / (2 * np.pi)),
        "radius": contour.radius,
    })
    Z = N + P
    verdict = STABLE if Z == 0 else UNSTABLE
    details["closed_loop_rhp"] = Z
    crit = (details["min_distance_hz"],) if verdict != STABLE else ()
    return StabilityVerdict("SC1", verdict, P, N, critical_frequencies=crit, details=details)


def nyquist_samples(source: FramedBlock, load: FramedBlock, grid):
    """Eigen-loci of ``Z_source Y_load`` on an axis grid (for plotting tables)."""
    zs = source.as_impedance().block
    yl = load.as_admittance().block
    pts = grid.points if hasattr(grid, "points") else np.asarray(grid)
    return track_eigenvalues(_loop_values(zs, yl, pts))


def locus_margin(source: FramedBlock, load: FramedBlock):
    """Minimum distance of any eigen-locus to -1 on the imaginary axis."""
    v = sc1_nyquist(source, load)
    return v.details.get("min_distance", 0.0), v


# ---------------------------------------------------------------------------
# partition studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionPoint:
    k_part: float
    load_poles: tuple
    rhp_poles: int
    dominant_pair: complex
    verdict: StabilityVerdict


@dataclass(frozen=True)
class PartitionSweep:
    bus: str
    points: tuple
    first_rhp_k: float | None

    @property
    def verdicts(self):
        return tuple(p.verdict.verdict for p in self.points)


def _track_pair(asm, bus, source, ks, step=0.02):
    """Follow the load pole that ends rightmost at max(ks) back to k = 0.

    Returns the pole position at each requested k and the first fine-grid
    k where it sits in the right half plane.
    """
    kmax = max(ks)
    grid = np.unique(np.concatenate([np.arange(0.0, kmax + step / 2, step), ks]))
    sets = []
    for k in grid:
        _, yl = partition(asm, PartitionSpec(bus, float(k), source))
        p = poles(yl.block)
        sets.append(p[p.imag >= 0])
    # pad to common length with far-away dummies, then follow by assignment
    n = max(s.size for s in sets)
    pad = [np.concatenate([s, np.full(n - s.size, -1e12 + 0j)]) for s in sets]
    tracks = track_eigenvalues(np.stack([np.diag(p) for p in pad]))
    last = tracks[-1]
    j = int(np.argmax(np.where(np.abs(last.imag) > 1e-6, last.real, -np.inf)))
    path = tracks[:, j]
    first = None
    for k, p in zip(grid, path):
        if p.real > 0:
            first = float(k)
            break
    at = {float(k): complex(p) for k, p in zip(grid, path)}
    return [at[float(k)] for k in ks], first


def partition_sweep(asm: AssembledSystem, ks, bus="PCC", source=None) -> PartitionSweep:
    """Move the partition point into the source impedance by ``k_part``.

    For each ``k`` the load's open-loop poles and the SC1 verdict (with
    RHP pole accounting) are reported, together with the trajectory of the
    dominant pole pair (the one that is rightmost at the largest ``k``,
    followed continuously back to ``k = 0``).
    """
    ks = [float(k) for k in ks]
    dom, first = _track_pair(asm, bus, source, ks)
    pts = []
    for k, d in zip(ks, dom):
        zs, yl = partition(asm, PartitionSpec(bus, k, source))
        p = poles(yl.block)
        _, _, rhp = classify_half_plane(p)
        v = sc1_nyquist(zs, yl)
        pts.append(PartitionPoint(k, tuple(complex(x) for x in p), int(rhp.size), d, v))
    return PartitionSweep(bus, tuple(pts), first)


@dataclass(frozen=True)
class MarginEntry:
    name: str
    bus: str
    margin: float
    frequency_hz: float
    verdict: str
    rhp_poles: int
    pole_adjusted: bool


@dataclass(frozen=True)
class MarginReport:
    entries: tuple

    @property
    def ranking(self):
        return tuple(e.name for e in sorted(self.entries, key=lambda e: (e.margin, e.name)))

    def entry(self, name):
        return next(e for e in self.entries if e.name == name)


def weak_point_scan(asm: AssembledSystem, candidates) -> MarginReport:
    """Rank devices by the Nyquist distance of their terminal split to -1.

    Each candidate (a device name, or a bus holding exactly one device) is
    split off as the load; the rest of the network, Kron-reduced at its
    terminal, is the source.  The margin is the minimum distance of any
    eigen-locus of ``Z_rest Y_device`` to -1 along the imaginary axis.
    """
    entries = []
    for c in candidates:
        devs = [d for d in asm.net.devices if d.name == c]
        if not devs:
            devs = [d for d in asm.net.devices if d.bus == c]
            if len(devs) != 1:
                raise KeyError(f"{c!r} is neither a device nor a single-device bus")
        d = devs[0]
        ysrc, ydev = split_at(asm, d.bus, [d.name])
        v = sc1_nyquist(ysrc.inverse(), ydev)
        m = v.details.get("min_distance", 0.0)
        entries.append(MarginEntry(d.name, d.bus, float(m), float(v.details.get("min_distance_hz", 0.0)),
                                   v.verdict, int(v.rhp_open_loop_poles or 0),
                                   bool(v.rhp_open_loop_poles)))
    return MarginReport(tuple(entries))
