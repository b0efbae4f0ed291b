"""Information-theoretic diagnostics of error-corrupted toric-code memories.

Three mutually verifying engines compute the Renyi relative entropy, coherent
information and topological entanglement negativity of toric-code states
subject to independent bit-flip and phase errors: a dense density-matrix
oracle at L = 2, exact enumeration over loop groups and error configurations,
and seeded Metropolis Monte Carlo on the equivalent multi-flavor Ising
models.  Analysis utilities locate the error-induced transition via Binder
crossings and finite-size scaling.
"""

__version__ = "0.1.0"

from .lattice import PauliString, ToricCode, build_code, commutation_sign, \
    enumerate_loops, region_sign, y_phase
from .model import DiagnosticResult, ErrorModel, nishimori_coupling

__all__ = [
    "PauliString", "ToricCode", "build_code", "commutation_sign",
    "enumerate_loops", "region_sign", "y_phase",
    "DiagnosticResult", "ErrorModel", "nishimori_coupling",
    "__version__",
]
