"""Reference-frame bookkeeping for AC and AC/DC impedance blocks.

Blocks are tagged with the domain they are expressed in (``"dq"`` or the
modified sequence domain ``"msd"``) and with the angle of the frame they
were linearized in, measured from the common reference of their area.
:func:`apply_io` re-refers a block to another frame by conjugation with a
constant rotation; because rotations are static blocks the result stays a
descriptor system with computable poles and zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import WrongDomain, WrongShape
from .lti import DescriptorSystem, freqresp
from .contour import track_eigenvalues

__all__ = [
    "FramedBlock",
    "T_SYM",
    "T_SYM_INV",
    "t_dq",
    "t_rot",
    "t_rot_hvdc",
    "normalize_angle",
    "sym_decompose",
    "sym_recompose",
    "is_dq_symmetric",
    "apply_io",
    "apply_io_acdc",
    "eigenloci",
]

T_SYM = 0.5 * np.array([[1, 1j], [1, -1j]])
T_SYM_INV = np.array([[1, 1], [-1j, 1j]])

DOMAINS = ("dq", "msd")
KINDS = ("impedance", "admittance")


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    t = float(np.mod(theta + np.pi, 2 * np.pi) - np.pi)
    return np.pi if t == -np.pi else t


def t_dq(theta: float) -> np.ndarray:
    """Park rotation taking common-frame dq vectors into a frame at ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def t_rot(theta: float) -> np.ndarray:
    """The same rotation seen on (p, n) modified-sequence components."""
    return np.diag([np.exp(-1j * theta), np.exp(1j * theta)])


def t_rot_hvdc(theta: float) -> np.ndarray:
    """AC/DC rotation: ``t_rot`` on the ac ports, identity on the dc port."""
    T = np.eye(3, dtype=complex)
    T[:2, :2] = t_rot(theta)
    return T


@dataclass(frozen=True)
class FramedBlock:
    """An impedance or admittance block tagged with domain and frame angle.

    AC blocks are 2x2; AC/DC blocks are 3x3 with the dc port last.
    ``frame`` is the angle (rad) of the frame the block is expressed in,
    relative to the common reference of its area.
    """

    block: DescriptorSystem
    domain: str = "msd"
    frame: float = 0.0
    kind: str = "impedance"

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise WrongDomain(f"unknown domain {self.domain!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.block.shape not in ((2, 2), (3, 3), (1, 1)):
            raise WrongShape(f"framed blocks are 1x1, 2x2 or 3x3, got {self.block.shape}")
        object.__setattr__(self, "frame", normalize_angle(self.frame))

    @property
    def is_acdc(self):
        return self.block.shape == (3, 3)

    def with_block(self, block, **kw):
        return replace(self, block=block, **kw)

    def inverse(self):
        """Swap impedance and admittance."""
        other = "admittance" if self.kind == "impedance" else "impedance"
        return replace(self, block=self.block.inv(), kind=other)

    def as_impedance(self):
        return self if self.kind == "impedance" else self.inverse()

    def as_admittance(self):
        return self if self.kind == "admittance" else self.inverse()

    def __call__(self, s):
        return self.block(s)


def _require(z: FramedBlock, domain=None, shape=(2, 2)):
    if z.block.shape != shape:
        raise WrongShape(f"expected a {shape} block, got {z.block.shape}")
    if domain is not None and z.domain != domain:
        raise WrongDomain(f"expected a {domain} block, got {z.domain}")


def sym_decompose(z: FramedBlock) -> FramedBlock:
    """dq block -> modified sequence domain, ``T_sym Z T_sym^-1``."""
    _require(z, "dq")
    return z.with_block(z.block.transform(T_SYM, T_SYM_INV), domain="msd")


def sym_recompose(z: FramedBlock) -> FramedBlock:
    """Modified sequence domain -> dq; exact inverse of :func:`sym_decompose`."""
    _require(z, "msd")
    return z.with_block(z.block.transform(T_SYM_INV, T_SYM), domain="dq")


def is_dq_symmetric(z: FramedBlock, tol=1e-9, n_freq=20, seed=0) -> bool:
    """True when Z_dd = Z_qq and Z_dq = -Z_qd at randomized frequencies."""
    if z.domain == "msd":
        z = sym_recompose(z)
    _require(z, "dq")
    rng = np.random.default_rng(seed)
    s = (rng.standard_normal(n_freq) * 0.3 + 1j * rng.uniform(-1, 1, n_freq)) * 10 ** rng.uniform(0, 3, n_freq)
    H = freqresp(z.block, s)
    scale = np.maximum(np.abs(H).max(axis=(1, 2)), 1e-300)
    e1 = np.abs(H[:, 0, 0] - H[:, 1, 1]) / scale
    e2 = np.abs(H[:, 0, 1] + H[:, 1, 0]) / scale
    return bool(np.all(e1 < tol) and np.all(e2 < tol))


def apply_io(z: FramedBlock, theta_new: float = 0.0) -> FramedBlock:
    """Re-refer an AC block to the frame at ``theta_new``.

    With ``d = z.frame - theta_new`` the block becomes
    ``T(-d) Z T(d)``, using ``t_rot`` in the sequence domain and ``t_dq``
    in dq.  The action is absolute: applying it twice with different
    targets equals applying it once with the last target.
    """
    if z.block.shape != (2, 2):
        raise WrongShape(f"apply_io needs a 2x2 block, got {z.block.shape}")
    d = z.frame - theta_new
    T = t_rot if z.domain == "msd" else t_dq
    if d == 0.0:
        return replace(z, frame=theta_new)
    return z.with_block(z.block.transform(T(-d), T(d)), frame=theta_new)


def apply_io_acdc(y: FramedBlock, theta_new: float = 0.0) -> FramedBlock:
    """Re-refer a 3x3 AC/DC block; the dc-dc entry is left untouched."""
    if y.block.shape != (3, 3):
        raise WrongShape(f"apply_io_acdc needs a 3x3 block, got {y.block.shape}")
    if y.domain != "msd":
        raise WrongDomain("AC/DC blocks are handled in the sequence domain")
    d = y.frame - theta_new
    if d == 0.0:
        return replace(y, frame=theta_new)
    b = y.block.transform(t_rot_hvdc(-d), t_rot_hvdc(d))
    # keep the dc feedthrough bit-identical (the rotation is exactly 1 there)
    D = np.array(b.D)
    D[2, 2] = y.block.D[2, 2]
    C = np.array(b.C)
    C[2, :] = y.block.C[2, :]
    B = np.array(b.B)
    B[:, 2] = y.block.B[:, 2]
    b = DescriptorSystem(b.E, b.A, B, C, D)
    return y.with_block(b, frame=theta_new)


def eigenloci(z, grid) -> np.ndarray:
    """Continuity-matched eigenvalue tracks of a square block over a grid.

    Returns an array of shape (N, k).
    """
    sys = z.block if isinstance(z, FramedBlock) else z
    if sys.n_in != sys.n_out:
        raise WrongShape("eigen-loci need a square block")
    pts = grid.points if hasattr(grid, "points") else np.asarray(grid)
    return track_eigenvalues(freqresp(sys, pts))
