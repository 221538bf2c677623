"""Nyquist D-contours, adaptive refinement and argument-principle counting."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContourTooCoarse, PointOnLocus
from .lti import FrequencyGrid, FrequencyResponse

__all__ = ["DContour", "winding_number", "phase_increments", "track_eigenvalues"]

_AXIS, _CIRCLE, _CHORD = 0, 1, 2


class DContour:
    """Clockwise boundary of the right half plane, closed at radius ``radius``.

    The imaginary axis is sampled logarithmically on both sides of the
    origin.  Poles on the axis listed in ``axis_poles`` are skirted with
    right-facing semicircles of radius ``indent`` so they stay outside the
    enclosed region.  Points can be inserted later with :meth:`refine`;
    each point remembers which piece of the contour it lives on, so
    midpoints land on the true arc rather than on a chord.
    """

    def __init__(self, radius, axis_poles=(), indent=0.1, omega_min=1e-2,
                 n_axis=400, n_arc=64, n_indent=16):
        self.radius = float(radius)
        omega_min = min(omega_min, self.radius / 10)
        w = np.logspace(np.log10(omega_min), np.log10(self.radius), n_axis)
        w = np.concatenate([-w[::-1], np.linspace(-omega_min, omega_min, 9)[1:-1], w])
        centers = sorted({float(np.imag(p)) for p in axis_poles})
        merged = []
        for c in centers:
            if merged and c - merged[-1] < 2 * indent:
                continue
            merged.append(c)
        kinds, cen, rad, phi = [], [], [], []

        def axis_pts(ws):
            for x in ws:
                kinds.append(_AXIS); cen.append(0j); rad.append(0.0); phi.append(x)

        lo = -self.radius
        for c in merged:
            seg = w[(w > lo) & (w < c - indent)]
            axis_pts(np.concatenate([[lo] if lo == -self.radius else [], seg, [c - indent]]))
            for a in np.linspace(-np.pi / 2, np.pi / 2, n_indent + 2)[1:-1]:
                kinds.append(_CIRCLE); cen.append(1j * c); rad.append(indent); phi.append(a)
            lo = c + indent
            axis_pts([lo])
        seg = w[(w > lo) & (w < self.radius)]
        axis_pts(np.concatenate([[lo] if lo == -self.radius else [], seg, [self.radius]]))
        for a in np.linspace(np.pi / 2, -np.pi / 2, n_arc + 2)[1:-1]:
            kinds.append(_CIRCLE); cen.append(0j); rad.append(self.radius); phi.append(a)
        self._kind = np.array(kinds)
        self._cen = np.array(cen, dtype=complex)
        self._rad = np.array(rad)
        self._phi = np.array(phi)
        self._s = self._points(self._kind, self._cen, self._rad, self._phi)

    @staticmethod
    def _points(kind, cen, rad, phi):
        s = np.where(kind == _AXIS, 1j * phi, cen + rad * np.exp(1j * phi))
        return np.where(kind == _CHORD, cen, s)

    @property
    def points(self):
        return self._s

    @property
    def grid(self):
        return FrequencyGrid(self._s, "contour")

    def __len__(self):
        return self._s.size

    def axis_mask(self):
        return self._kind == _AXIS

    def midpoints(self, seg):
        """Insert a point after each index in ``seg``; returns new positions."""
        seg = np.asarray(seg, dtype=int)
        nxt = (seg + 1) % self._s.size
        k1, k2 = self._kind[seg], self._kind[nxt]
        same_circle = ((k1 == _CIRCLE) & (k2 == _CIRCLE) & (self._cen[seg] == self._cen[nxt])
                       & (self._rad[seg] == self._rad[nxt]))
        both_axis = (k1 == _AXIS) & (k2 == _AXIS)
        kind = np.where(both_axis, _AXIS, np.where(same_circle, _CIRCLE, _CHORD))
        phi = np.where(both_axis | same_circle, 0.5 * (self._phi[seg] + self._phi[nxt]), 0.0)
        cen = np.where(same_circle, self._cen[seg], 0.5 * (self._s[seg] + self._s[nxt]))
        cen = np.where(both_axis, 0j, cen)
        rad = np.where(same_circle, self._rad[seg], 0.0)
        snew = self._points(kind, cen, rad, phi)
        order = np.argsort(seg, kind="stable")
        seg, kind, cen, rad, phi, snew = (a[order] for a in (seg, kind, cen, rad, phi, snew))
        ins = seg + 1
        self._kind = np.insert(self._kind, ins, kind)
        self._cen = np.insert(self._cen, ins, cen)
        self._rad = np.insert(self._rad, ins, rad)
        self._phi = np.insert(self._phi, ins, phi)
        self._s = np.insert(self._s, ins, snew)
        return ins + np.arange(ins.size)

    def refine(self, track, threshold=np.pi / 8, max_points=200_000, max_rounds=60):
        """Bisect segments until no tracked scalar turns by more than ``threshold``.

        ``track(points) -> (N, k)`` complex array; values are measured about
        the origin, so callers pass e.g. ``det(I + L)`` or ``lambda + 1``.
        Returns the tracked values on the final contour.
        """
        vals = np.atleast_2d(np.asarray(track(self._s)))
        if vals.shape[0] != self._s.size:
            vals = vals.T
        for _ in range(max_rounds):
            steps = np.abs(phase_increments(vals))
            bad = np.nonzero(np.any(steps > threshold, axis=1))[0]
            if bad.size == 0 or self._s.size + bad.size > max_points:
                break
            new = self.midpoints(bad)
            newvals = np.atleast_2d(np.asarray(track(self._s[new])))
            if newvals.shape[0] != new.size:
                newvals = newvals.T
            full = np.empty((self._s.size, vals.shape[1]), dtype=complex)
            mask = np.zeros(self._s.size, dtype=bool)
            mask[new] = True
            full[mask] = newvals
            full[~mask] = vals
            vals = full
        return vals


def phase_increments(values):
    """Branch-cut-safe phase steps between consecutive samples, closing the loop.

    ``values`` has shape (N,) or (N, k); row i holds the step from sample i
    to sample i+1 (the last row wraps to the first sample).
    """
    v = np.asarray(values, dtype=complex)
    nxt = np.roll(v, -1, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.angle(nxt / v)


def winding_number(samples, about=0.0, exclusion=1e-9, max_step=np.pi / 2):
    """Net clockwise encirclements of ``about`` by a closed sampled locus.

    Parameters
    ----------
    samples : FrequencyResponse or array_like
        Scalar function sampled along a closed contour (the closing
        segment from the last sample back to the first is included).
    about : complex
        Point whose encirclements are counted.
    exclusion : float
        Samples closer than ``exclusion * max(1, |about|)`` raise PointOnLocus.
    max_step : float
        Largest admissible phase step between samples.
    """
    if isinstance(samples, FrequencyResponse):
        if samples.n_out != 1 or samples.n_in != 1:
            raise ValueError("winding_number needs a scalar response")
        f = samples.values[:, 0, 0]
    else:
        f = np.asarray(samples, dtype=complex).ravel()
    z = f - about
    dist = np.abs(z)
    tol = exclusion * max(1.0, abs(about))
    if np.any(dist < tol):
        k = int(np.argmin(dist))
        raise PointOnLocus(f"locus passes within {dist[k]:.3g} of {about}", index=k)
    d = phase_increments(z)
    if np.any(np.abs(d) > max_step):
        k = int(np.argmax(np.abs(d)))
        raise ContourTooCoarse(f"phase step {d[k]:.3f} rad between samples {k} and {k + 1}")
    total = d.sum() / (2 * np.pi)
    return -int(np.rint(total))


def track_eigenvalues(mats):
    """Eigenvalues of a sequence of square matrices, continuity-matched.

    Consecutive eigenvalue sets are paired by minimal total displacement.
    Returns an array of shape (N, k).
    """
    mats = np.asarray(mats, dtype=complex)
    lam = np.linalg.eigvals(mats)
    out = np.empty_like(lam)
    out[0] = lam[0]
    k = lam.shape[1]
    if k == 1:
        return lam
    for i in range(1, lam.shape[0]):
        prev = out[i - 1]
        cur = lam[i]
        if k == 2:
            straight = abs(cur[0] - prev[0]) + abs(cur[1] - prev[1])
            swap = abs(cur[1] - prev[0]) + abs(cur[0] - prev[1])
            out[i] = cur if straight <= swap else cur[::-1]
        else:
            cost = np.abs(prev[:, None] - cur[None, :])
            _, col = linear_sum_assignment(cost)
            out[i] = cur[col]
    return out
