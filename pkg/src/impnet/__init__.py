"""Impedance-based small-signal stability analysis of converter networks.

Submodules
----------
lti         descriptor state-space blocks, poles, transmission zeros
frames      dq/sequence-domain blocks and the rotation (impedance) operator
components  converter, passive and HVDC terminal models plus power flow
network     network description, nodal assembly and reductions
stability   SC1/SC2/SC3 criteria, partition sweeps, weak-point ranking
oracle      independent closed-loop model used for cross-checks
config/cli  TOML network descriptions and the ``impnet`` command
"""

__version__ = "0.1.0"

from .errors import ImpnetError  # noqa: E402

__all__ = ["ImpnetError", "__version__"]
