"""Descriptor-form MIMO LTI systems.

Every impedance and admittance in impnet is held as a descriptor system

    E dx/dt = A x + B u,      y = C x + D u

with a possibly singular ``E``.  Series/parallel connections, inversions
and Schur complements are carried out exactly on the realization, so the
poles and zeros of a composed network remain computable by a single
generalized eigenvalue problem.  Sampled frequency responses are produced
on demand.

All compositions keep ``E`` block diagonal; the pencil routines rely on
that only for speed, not for correctness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    IrregularPencil,
    NonSquare,
    SingularAtFrequency,
)

__all__ = [
    "DescriptorSystem",
    "FrequencyGrid",
    "FrequencyResponse",
    "evaluate",
    "freqresp",
    "compose",
    "poles",
    "transmission_zeros",
    "pencil_eigenvalues",
    "schur_eliminate",
    "block",
    "static",
    "classify_half_plane",
]

# condition number above which the shifted pencil counts as singular
SINGULAR_COND = 1e13
# generalized eigenvalues beyond this magnitude (rad/s) are treated as infinite
INFINITE_CUTOFF = 1e7
MARGINAL_REL = 1e-6


def _as2d(M, rows, cols, name):
    if M is None:
        return np.zeros((rows, cols))
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return np.zeros((rows, cols), dtype=M.dtype if M.dtype.kind == "c" else float)
    return M


def _result_dtype(*arrs):
    return complex if any(np.iscomplexobj(a) for a in arrs) else float


class DescriptorSystem:
    """Rational MIMO transfer matrix ``C (sE - A)^-1 B + D``.

    Parameters
    ----------
    E, A : (n, n) array_like
        Descriptor pencil.  ``E`` may be singular.
    B : (n, m) array_like
    C : (p, n) array_like
    D : (p, m) array_like

    Instances are immutable: the stored arrays are read-only copies.
    """

    __slots__ = ("E", "A", "B", "C", "D")

    def __init__(self, E, A, B, C, D):
        A = np.asarray(A)
        n = 0 if A.size == 0 else A.shape[0]
        D = np.atleast_2d(np.asarray(D))
        p, m = D.shape
        E = np.zeros((0, 0)) if n == 0 else np.atleast_2d(np.asarray(E))
        A = np.zeros((0, 0)) if n == 0 else np.atleast_2d(A)
        B = np.zeros((n, m)) if n == 0 else np.atleast_2d(np.asarray(B))
        C = np.zeros((p, n)) if n == 0 else np.atleast_2d(np.asarray(C))
        if E.shape != (n, n) or A.shape != (n, n):
            raise DimensionMismatch(f"E {E.shape} and A {A.shape} must be {n}x{n}")
        if B.shape != (n, m):
            raise DimensionMismatch(f"B has shape {B.shape}, expected {(n, m)}")
        if C.shape != (p, n):
            raise DimensionMismatch(f"C has shape {C.shape}, expected {(p, n)}")
        dt = _result_dtype(E, A, B, C, D)
        for name, M in zip(self.__slots__, (E, A, B, C, D)):
            M = np.array(M, dtype=dt)
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} contains non-finite entries")
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    def __setattr__(self, name, value):
        raise AttributeError("DescriptorSystem is immutable")

    # -- basic properties -------------------------------------------------
    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_in(self) -> int:
        return self.D.shape[1]

    @property
    def n_out(self) -> int:
        return self.D.shape[0]

    @property
    def shape(self):
        return self.D.shape

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.A)

    def __repr__(self):
        return (f"DescriptorSystem(n_states={self.n_states}, n_out={self.n_out}, "
                f"n_in={self.n_in}, real={self.is_real})")

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_ss(cls, A, B, C, D):
        A = np.atleast_2d(np.asarray(A))
        n = A.shape[0] if A.size else 0
        return cls(np.eye(n), A, B, C, D)

    @classmethod
    def static(cls, K):
        K = np.atleast_2d(np.asarray(K))
        return cls(np.zeros((0, 0)), np.zeros((0, 0)), None, None, K)

    @classmethod
    def siso(cls, num, den):
        """Realize a proper-or-improper SISO polynomial ratio (highest power first)."""
        num = np.trim_zeros(np.atleast_1d(np.asarray(num, dtype=complex)), "f")
        den = np.trim_zeros(np.atleast_1d(np.asarray(den, dtype=complex)), "f")
        if den.size == 0:
            raise ValueError("zero denominator")
        if num.size == 0:
            return cls.static([[0.0]])
        if num.size > den.size:
            # improper: realize the reciprocal and invert
            return invert(cls.siso(den, num))
        num = np.concatenate([np.zeros(den.size - num.size), num]) / den[0]
        den = den / den[0]
        n = den.size - 1
        d = num[0]
        if n == 0:
            return cls.static([[d]])
        r = num[1:] - d * den[1:]
        A = np.zeros((n, n), dtype=complex)
        A[0, :] = -den[1:]
        A[1:, :-1] = np.eye(n - 1)
        B = np.zeros((n, 1), dtype=complex)
        B[0, 0] = 1.0
        C = r.reshape(1, n)
        sys = cls.from_ss(A, B, C, [[d]])
        if np.all(np.isreal(num)) and np.all(np.isreal(den)):
            sys = DescriptorSystem(sys.E.real, sys.A.real, sys.B.real, sys.C.real, sys.D.real)
        return sys

    # -- arithmetic sugar ----------------------------------------------------
    def __add__(self, other):
        return compose("add", self, _coerce(other, self.shape))

    __radd__ = __add__

    def __neg__(self):
        return DescriptorSystem(self.E, self.A, self.B, -self.C, -self.D)

    def __sub__(self, other):
        return self + (-_coerce(other, self.shape))

    def __rsub__(self, other):
        return (-self) + other

    def __matmul__(self, other):
        if not isinstance(other, DescriptorSystem):
            return self.transform(right=np.atleast_2d(other))
        return compose("multiply", self, other)

    def __rmatmul__(self, other):
        return self.transform(left=np.atleast_2d(other))

    def __mul__(self, k):
        if isinstance(k, DescriptorSystem):
            return compose("multiply", self, k)
        return self.transform(left=np.asarray(k) * np.eye(self.n_out))

    __rmul__ = __mul__

    def inv(self):
        return compose("invert", self)

    def transform(self, left=None, right=None):
        """Return ``left @ H(s) @ right`` with constant matrices."""
        B, C, D = self.B, self.C, self.D
        if right is not None:
            right = np.atleast_2d(right)
            if right.shape[0] != self.n_in:
                raise DimensionMismatch("right factor does not match inputs")
            B, D = B @ right, D @ right
        if left is not None:
            left = np.atleast_2d(left)
            if left.shape[1] != self.n_out:
                raise DimensionMismatch("left factor does not match outputs")
            C, D = left @ C, left @ D
        return DescriptorSystem(self.E, self.A, B, C, D)

    def select(self, rows=None, cols=None):
        rows = slice(None) if rows is None else np.atleast_1d(rows)
        cols = slice(None) if cols is None else np.atleast_1d(cols)
        return DescriptorSystem(self.E, self.A, self.B[:, cols], self.C[rows, :],
                                self.D[rows][:, cols])

    def __getitem__(self, idx):
        r, c = idx
        return self.select(np.arange(self.n_out)[r], np.arange(self.n_in)[c])

    def conj_system(self):
        """System whose response is ``conj(H(conj(s)))``."""
        return DescriptorSystem(self.E.conj(), self.A.conj(), self.B.conj(),
                                self.C.conj(), self.D.conj())

    # -- evaluation -----------------------------------------------------------
    def __call__(self, s):
        return evaluate(self, s)

    def freqresp(self, points, check=True):
        return freqresp(self, points, check=check)


def _coerce(other, shape):
    if isinstance(other, DescriptorSystem):
        return other
    K = np.asarray(other)
    if K.ndim == 0:
        K = K * np.eye(shape[0]) if shape[0] == shape[1] else np.full(shape, K)
    return DescriptorSystem.static(K)


def static(K) -> DescriptorSystem:
    return DescriptorSystem.static(K)


# ---------------------------------------------------------------------------
# frequency grids and responses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyGrid:
    """Ordered complex frequencies (rad/s).

    ``kind`` is ``"axis"`` for imaginary-axis sweeps (strictly increasing
    in omega) or ``"contour"`` for closed contours traversed clockwise
    around the right half plane; the closing segment from the last point
    back to the first is implied.
    """

    points: np.ndarray
    kind: str = "axis"

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex).ravel()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.kind not in ("axis", "contour"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.kind == "axis":
            if np.any(pts.real != 0):
                raise ValueError("axis grid points must be purely imaginary")
            if np.any(np.diff(pts.imag) <= 0):
                raise ValueError("axis grid must be strictly increasing in omega")

    def __len__(self):
        return self.points.size

    @classmethod
    def from_hz(cls, hz):
        return cls(2j * np.pi * np.asarray(hz, dtype=float), "axis")

    @classmethod
    def sweep_hz(cls, fmin=2.0, fmax=100.0, step=2.0):
        n = int(round((fmax - fmin) / step)) + 1
        return cls.from_hz(fmin + step * np.arange(n))

    @property
    def hz(self):
        return self.points.imag / (2 * np.pi)


@dataclass(frozen=True)
class FrequencyResponse:
    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None, None]
        if v.shape[0] != len(self.grid):
            raise DimensionMismatch("values length must equal grid length")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_out(self):
        return self.values.shape[1]

    @property
    def n_in(self):
        return self.values.shape[2]

    def entry(self, i, j):
        return self.values[:, i, j]


def evaluate(sys: DescriptorSystem, s: complex) -> np.ndarray:
    """Return ``C (sE - A)^-1 B + D`` at a single complex frequency."""
    return freqresp(sys, np.array([s]))[0]


def freqresp(sys: DescriptorSystem, points, check=True) -> np.ndarray:
    """Evaluate at many frequencies; returns an array of shape (N, p, m).

    Points are independent; results come back in input order.
    """
    pts = np.asarray(points.points if isinstance(points, FrequencyGrid) else points,
                     dtype=complex).ravel()
    p, m = sys.shape
    n = sys.n_states
    out = np.broadcast_to(sys.D.astype(complex), (pts.size, p, m)).copy()
    if n == 0:
        return out
    M = pts[:, None, None] * sys.E[None] - sys.A[None]
    if check:
        # cheap reciprocal-condition screen, exact SVD only on suspicious points
        cond = np.linalg.cond(M)
        bad = ~(cond < SINGULAR_COND)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise SingularAtFrequency(complex(pts[k]), float(cond[k]))
    X = np.linalg.solve(M, np.broadcast_to(sys.B.astype(complex), (pts.size, n, m)))
    out += sys.C[None] @ X
    return out


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def _blkdiag(*mats):
    mats = [np.atleast_2d(m) if np.asarray(m).size else np.zeros((0, 0)) for m in mats]
    return scipy.linalg.block_diag(*mats) if mats else np.zeros((0, 0))


def add(lhs: DescriptorSystem, rhs: DescriptorSystem) -> DescriptorSystem:
    if lhs.shape != rhs.shape:
        raise DimensionMismatch(f"cannot add {lhs.shape} and {rhs.shape}")
    return DescriptorSystem(
        _blkdiag(lhs.E, rhs.E), _blkdiag(lhs.A, rhs.A),
        np.vstack([lhs.B, rhs.B]) if lhs.n_states + rhs.n_states else None,
        np.hstack([lhs.C, rhs.C]) if lhs.n_states + rhs.n_states else None,
        lhs.D + rhs.D)


def multiply(lhs: DescriptorSystem, rhs: DescriptorSystem) -> DescriptorSystem:
    """Series connection ``lhs(s) @ rhs(s)``."""
    if lhs.n_in != rhs.n_out:
        raise DimensionMismatch(f"cannot multiply {lhs.shape} by {rhs.shape}")
    n1, n2 = lhs.n_states, rhs.n_states
    dt = _result_dtype(lhs.A, rhs.A, lhs.B, rhs.C, lhs.D, rhs.D)
    A = np.zeros((n1 + n2, n1 + n2), dtype=dt)
    A[:n1, :n1] = lhs.A
    A[:n1, n1:] = lhs.B @ rhs.C
    A[n1:, n1:] = rhs.A
    B = np.vstack([lhs.B @ rhs.D, rhs.B])
    C = np.hstack([lhs.C, lhs.D @ rhs.C])
    return DescriptorSystem(_blkdiag(lhs.E, rhs.E), A, B, C, lhs.D @ rhs.D)


def invert(sys: DescriptorSystem) -> DescriptorSystem:
    """Inverse transfer matrix realized in descriptor form.

    The former input becomes an algebraic state, so ``D`` need not be
    invertible.
    """
    p, m = sys.shape
    if p != m:
        raise NonSquare(f"cannot invert a {p}x{m} system")
    n = sys.n_states
    dt = _result_dtype(sys.A, sys.B, sys.C, sys.D)
    E = _blkdiag(sys.E, np.zeros((m, m)))
    A = np.zeros((n + m, n + m), dtype=dt)
    A[:n, :n] = sys.A
    A[:n, n:] = sys.B
    A[n:, :n] = sys.C
    A[n:, n:] = sys.D
    B = np.vstack([np.zeros((n, m)), -np.eye(m)])
    C = np.hstack([np.zeros((m, n)), np.eye(m)])
    out = DescriptorSystem(E, A, B, C, np.zeros((m, m)))
    _check_regular(out)
    return out


def feedback(lhs: DescriptorSystem, rhs: DescriptorSystem) -> DescriptorSystem:
    """Negative feedback ``lhs (I + rhs lhs)^-1`` with a single copy of each block."""
    if rhs.n_in != lhs.n_out or rhs.n_out != lhs.n_in:
        raise DimensionMismatch("feedback blocks are not conformable")
    n1, n2, m = lhs.n_states, rhs.n_states, lhs.n_in
    dt = _result_dtype(lhs.A, rhs.A, lhs.B, rhs.B, lhs.C, rhs.C, lhs.D, rhs.D)
    N = n1 + n2 + m
    A = np.zeros((N, N), dtype=dt)
    A[:n1, :n1] = lhs.A
    A[:n1, n1 + n2:] = lhs.B
    A[n1:n1 + n2, :n1] = rhs.B @ lhs.C
    A[n1:n1 + n2, n1:n1 + n2] = rhs.A
    A[n1:n1 + n2, n1 + n2:] = rhs.B @ lhs.D
    A[n1 + n2:, :n1] = -rhs.D @ lhs.C
    A[n1 + n2:, n1:n1 + n2] = -rhs.C
    A[n1 + n2:, n1 + n2:] = -(np.eye(m) + rhs.D @ lhs.D)
    B = np.vstack([np.zeros((n1 + n2, m)), np.eye(m)])
    C = np.hstack([lhs.C, np.zeros((lhs.n_out, n2)), lhs.D])
    out = DescriptorSystem(_blkdiag(lhs.E, rhs.E, np.zeros((m, m))), A, B, C,
                           np.zeros((lhs.n_out, m)))
    _check_regular(out)
    return out


def parallel(lhs: DescriptorSystem, rhs: DescriptorSystem) -> DescriptorSystem:
    """Parallel connection of two impedances, ``(Z1^-1 + Z2^-1)^-1``."""
    if lhs.shape != rhs.shape:
        raise DimensionMismatch(f"cannot parallel {lhs.shape} and {rhs.shape}")
    return invert(add(invert(lhs), invert(rhs)))


def compose(op: str, lhs: DescriptorSystem, rhs: DescriptorSystem | None = None):
    """Exact algebraic combination of descriptor systems.

    ``op`` is one of ``add``, ``multiply``, ``invert``, ``parallel`` or
    ``feedback``; ``rhs`` is ignored for ``invert``.
    """
    if op == "invert":
        return invert(lhs)
    if rhs is None:
        raise ValueError(f"operation {op!r} needs two operands")
    funcs = {"add": add, "multiply": multiply, "parallel": parallel, "feedback": feedback}
    try:
        f = funcs[op]
    except KeyError:
        raise ValueError(f"unknown composition {op!r}") from None
    out = f(lhs, rhs)
    if op != "add":
        _check_regular(out)
    return out


def block(rows) -> DescriptorSystem:
    """Assemble a block transfer matrix from a nested list of systems.

    ``None`` entries are zero blocks; their sizes are inferred from the
    other blocks in the same block row and column.
    """
    nr, nc = len(rows), len(rows[0])
    heights = [None] * nr
    widths = [None] * nc
    for i, row in enumerate(rows):
        if len(row) != nc:
            raise DimensionMismatch("ragged block rows")
        for j, b in enumerate(row):
            if b is None:
                continue
            b = _coerce(b, (1, 1)) if not isinstance(b, DescriptorSystem) else b
            h, w = b.shape
            if heights[i] not in (None, h) or widths[j] not in (None, w):
                raise DimensionMismatch(f"block ({i},{j}) has inconsistent shape")
            heights[i], widths[j] = h, w
    if None in heights or None in widths:
        raise DimensionMismatch("every block row and column needs one sized block")
    ro = np.concatenate([[0], np.cumsum(heights)])
    co = np.concatenate([[0], np.cumsum(widths)])
    p, m = ro[-1], co[-1]
    parts = [(i, j, b if isinstance(b, DescriptorSystem) else _coerce(b, (heights[i], widths[j])))
             for i, row in enumerate(rows) for j, b in enumerate(row) if b is not None]
    dt = _result_dtype(*[x for _, _, b in parts for x in (b.A, b.B, b.C, b.D)])
    n = sum(b.n_states for _, _, b in parts)
    E = _blkdiag(*[b.E for _, _, b in parts])
    A = _blkdiag(*[b.A for _, _, b in parts]).astype(dt)
    B = np.zeros((n, m), dtype=dt)
    C = np.zeros((p, n), dtype=dt)
    D = np.zeros((p, m), dtype=dt)
    k = 0
    for i, j, b in parts:
        ns = b.n_states
        B[k:k + ns, co[j]:co[j + 1]] = b.B
        C[ro[i]:ro[i + 1], k:k + ns] = b.C
        D[ro[i]:ro[i + 1], co[j]:co[j + 1]] += b.D
        k += ns
    return DescriptorSystem(E, A, B, C, D)


def schur_eliminate(sys: DescriptorSystem, keep) -> DescriptorSystem:
    """Kron-reduce a square port model, keeping the ports ``keep``.

    The discarded ports are constrained to zero output (no external
    injection) and their inputs become algebraic states, i.e. the Schur
    complement ``H_PP - H_PK H_KK^-1 H_KP`` without inverting anything.
    """
    p, m = sys.shape
    if p != m:
        raise NonSquare("Schur elimination needs a square port model")
    keep = np.atleast_1d(np.asarray(keep, dtype=int))
    elim = np.setdiff1d(np.arange(m), keep)
    if elim.size == 0:
        return sys.select(keep, keep)
    n, k = sys.n_states, elim.size
    dt = _result_dtype(sys.A, sys.B, sys.C, sys.D)
    A = np.zeros((n + k, n + k), dtype=dt)
    A[:n, :n] = sys.A
    A[:n, n:] = sys.B[:, elim]
    A[n:, :n] = sys.C[elim]
    A[n:, n:] = sys.D[np.ix_(elim, elim)]
    B = np.vstack([sys.B[:, keep], sys.D[np.ix_(elim, keep)]])
    C = np.hstack([sys.C[keep], sys.D[np.ix_(keep, elim)]])
    out = DescriptorSystem(_blkdiag(sys.E, np.zeros((k, k))), A, B, C,
                           sys.D[np.ix_(keep, keep)])
    _check_regular(out)
    return out


def _check_regular(sys: DescriptorSystem, trials=3):
    n = sys.n_states
    if n == 0:
        return
    rng = np.random.default_rng(12345)
    scale = 1.0 + np.abs(sys.A).max() / max(np.abs(sys.E).max(), 1e-300)
    for _ in range(trials):
        s = scale * (rng.standard_normal() + 1j * rng.standard_normal())
        if np.linalg.cond(s * sys.E - sys.A) < 1e14:
            return
    raise IrregularPencil("det(sE - A) vanishes identically")


# ---------------------------------------------------------------------------
# poles and zeros
# ---------------------------------------------------------------------------

def _balance_pencil(A, E, iters=12):
    """Two-sided power-of-two scaling of (A, E) to equalize row/column norms."""
    n = A.shape[0]
    M = np.abs(A) + np.abs(E)
    lr = np.zeros(n)
    lc = np.zeros(n)
    for _ in range(iters):
        S = M * np.exp2(lr)[:, None] * np.exp2(lc)[None, :]
        r = S.sum(axis=1)
        r[r == 0] = 1.0
        lr -= np.round(0.5 * np.log2(r))
        S = M * np.exp2(lr)[:, None] * np.exp2(lc)[None, :]
        c = S.sum(axis=0)
        c[c == 0] = 1.0
        lc -= np.round(0.5 * np.log2(c))
    Dl = np.exp2(lr)[:, None]
    Dr = np.exp2(lc)[None, :]
    return A * Dl * Dr, E * Dl * Dr


def pencil_eigenvalues(A, E, cutoff=INFINITE_CUTOFF) -> np.ndarray:
    """Finite generalized eigenvalues of ``A - sE`` after balancing.

    Raises IrregularPencil when a (numerically) zero/zero eigenvalue pair
    shows up, which happens exactly for singular pencils.
    """
    A = np.asarray(A)
    E = np.asarray(E)
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    Ab, Eb = _balance_pencil(A, E)
    w = scipy.linalg.eigvals(Ab, Eb, homogeneous_eigvals=True)
    alpha, beta = w
    na = np.linalg.norm(Ab, 1)
    ne = max(np.linalg.norm(Eb, 1), 1e-300)
    tiny = 1e3 * np.finfo(float).eps
    if np.any((np.abs(alpha) < tiny * na) & (np.abs(beta) < tiny * ne)):
        raise IrregularPencil("pencil has a 0/0 eigenvalue (singular pencil)")
    finite = np.abs(beta) > 1e-11 * np.abs(alpha) * ne / max(na, 1e-300)
    lam = np.full(alpha.shape, np.inf, dtype=complex)
    lam[finite] = alpha[finite] / beta[finite]
    lam = lam[finite & (np.abs(lam) < cutoff)]
    return _sort_eigs(lam)


def _sort_eigs(lam):
    lam = np.asarray(lam, dtype=complex)
    order = np.lexsort((np.round(lam.imag, 9), np.round(lam.real, 9)))
    return lam[order]


def poles(sys: DescriptorSystem, cutoff=INFINITE_CUTOFF) -> np.ndarray:
    """Finite generalized eigenvalues of (A, E), with multiplicity."""
    if sys.n_states == 0:
        return np.zeros(0, dtype=complex)
    _check_regular(sys)
    return pencil_eigenvalues(sys.A, sys.E, cutoff)


def system_pencil(sys: DescriptorSystem):
    """Rosenbrock pencil ``([[A, B], [C, D]], diag(E, 0))``."""
    n, m = sys.n_states, sys.n_in
    dt = _result_dtype(sys.A, sys.B, sys.C, sys.D)
    M = np.zeros((n + m, n + m), dtype=dt)
    M[:n, :n] = sys.A
    M[:n, n:] = sys.B
    M[n:, :n] = sys.C
    M[n:, n:] = sys.D
    N = _blkdiag(sys.E, np.zeros((m, m)))
    return M, N


def transmission_zeros(sys: DescriptorSystem, cutoff=INFINITE_CUTOFF) -> np.ndarray:
    """Finite invariant zeros of a square system, with multiplicity.

    For a realization without decoupling modes these are the roots of
    ``det H(s)``; for a network model built from physical element
    realizations they are the closed-loop natural frequencies.
    """
    if sys.n_in != sys.n_out:
        raise NonSquare(f"transmission zeros need a square system, got {sys.shape}")
    M, N = system_pencil(sys)
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    rng = np.random.default_rng(7)
    scale = 1.0 + np.abs(M).max() / max(np.abs(N).max(), 1e-300)
    ok = False
    for _ in range(3):
        s = scale * (rng.standard_normal() + 1j * rng.standard_normal())
        if np.linalg.cond(M - s * N) < 1e14:
            ok = True
            break
    if not ok:
        raise IrregularPencil("system pencil is singular for all s")
    return pencil_eigenvalues(M, N, cutoff)


def classify_half_plane(values, rel=MARGINAL_REL):
    """Split eigenvalues into (stable, marginal, unstable) arrays.

    An eigenvalue is marginal when ``|Re| < rel * max(1, |Im|)``.
    """
    v = np.asarray(values, dtype=complex)
    band = rel * np.maximum(1.0, np.abs(v.imag))
    marg = np.abs(v.real) < band
    return v[(v.real < 0) & ~marg], v[marg], v[(v.real > 0) & ~marg]
