"""cavityq: simulation toolkit for qudits encoded in cavity Fock levels.

Dense truncated-Fock-space engine, dispersive-device estimators, the
SNAP/displacement gate vocabulary, bosonic-code noise tools, pulse-level
optimal control, single-photon state transfer, and a qudit Hamiltonian
Trotterization demo, behind one deterministic CLI.
"""

__version__ = "0.1.0"

from . import codes, device, errors, gates, noise, pulse, qst, trotter
from . import cli
from .fock import (
    HilbertShape,
    Operator,
    StateVector,
    annihilation,
    basis_state,
    coherent_state,
    creation,
    fidelity,
    identity,
    mean_occupation,
    mode_probabilities,
    number_operator,
    propagator,
    reduced_density_matrix,
    tensor,
)

__all__ = [
    "cli",
    "codes",
    "device",
    "errors",
    "gates",
    "noise",
    "pulse",
    "qst",
    "trotter",
    "HilbertShape",
    "Operator",
    "StateVector",
    "annihilation",
    "basis_state",
    "coherent_state",
    "creation",
    "fidelity",
    "identity",
    "mean_occupation",
    "mode_probabilities",
    "number_operator",
    "propagator",
    "reduced_density_matrix",
    "tensor",
    "__version__",
]
