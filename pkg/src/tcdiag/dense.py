"""Dense density-matrix engine for L = 2 (Hilbert dimension 256, or 1024 with
two reference qubits).

This is the ground-truth oracle the enumeration and Monte Carlo engines are
validated against.  Every in-scope state is real in the computational basis
(Pauli-diagonal channels acting on stabilizer projectors), so matrices are
stored as real float64 and the imaginary parts that would appear in a complex
formulation are asserted away by construction.

Basis convention: qubit q corresponds to bit q of the basis index; code edges
occupy bits 0 .. N-1 in the indexing of `lattice`, reference qubits (when
present) the bits above them.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CapacityError
from .lattice import ToricCode
from .model import ErrorModel

MAX_DENSE_QUBITS = 12

# Numerical floors for state validation.
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_FLOOR = -1e-10


class DenseState:
    """A density matrix with a fixed code-qubit / reference-qubit split."""

    def __init__(self, matrix: np.ndarray, n_code: int, n_ref: int = 0):
        self.matrix = matrix
        self.n_code = n_code
        self.n_ref = n_ref
        self.n_qubits = n_code + n_ref
        if matrix.shape != (1 << self.n_qubits, 1 << self.n_qubits):
            raise ValueError(f"matrix shape {matrix.shape} does not match {self.n_qubits} qubits")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self):
        m = self.matrix
        if not np.all(np.abs(m - m.T) < HERMITICITY_TOL):
            raise ValueError("state is not Hermitian within tolerance")
        tr = float(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr} deviates from 1")
        evals = np.linalg.eigvalsh(m)
        if evals.min() < PSD_FLOOR:
            raise ValueError(f"negative eigenvalue {evals.min()} below floor")
        return self

    def purity(self) -> float:
        return float(np.sum(self.matrix * self.matrix))

    def copy(self) -> "DenseState":
        return DenseState(self.matrix.copy(), self.n_code, self.n_ref)


def _apply_x_string_left(m: np.ndarray, mask: int) -> np.ndarray:
    if mask == 0:
        return m
    perm = np.arange(m.shape[0]) ^ mask
    return m[perm, :]


def _apply_z_string_left(m: np.ndarray, mask: int) -> np.ndarray:
    if mask == 0:
        return m
    idx = np.arange(m.shape[0])
    signs = 1.0 - 2.0 * (np.bitwise_count(idx & mask) & 1).astype(np.float64)
    return signs[:, None] * m


def _conjugate_x(m: np.ndarray, qubit: int) -> np.ndarray:
    perm = np.arange(m.shape[0]) ^ (1 << qubit)
    return m[perm][:, perm]


def _conjugate_z(m: np.ndarray, qubit: int) -> np.ndarray:
    idx = np.arange(m.shape[0])
    signs = 1.0 - 2.0 * ((idx >> qubit) & 1).astype(np.float64)
    return m * np.outer(signs, signs)


def _projector_product(dim: int, x_strings: list[int], z_strings: list[int]) -> np.ndarray:
    """Product of (1 + O)/2 over the given commuting X- and Z-type strings."""
    m = np.eye(dim)
    for mask in x_strings:
        m = 0.5 * (m + _apply_x_string_left(m, mask))
    for mask in z_strings:
        m = 0.5 * (m + _apply_z_string_left(m, mask))
    return m


def _check_capacity(n_qubits: int):
    if n_qubits > MAX_DENSE_QUBITS:
        raise CapacityError(
            f"dense engine limited to {MAX_DENSE_QUBITS} qubits, got {n_qubits} (use L=2)")


def build_rho0(code: ToricCode, variant: str = "max-mixed") -> DenseState:
    """Initial code state before errors.

    variant "max-mixed": maximally mixed state in the ground-state subspace,
    (1/4) prod_s (1+A_s)/2 prod_p (1+B_p)/2.
    variant "bell-reference": both logical qubits maximally entangled with two
    reference qubits, the +1 eigenstate of the stabilizers augmented by
    logical-Z/reference-Z and logical-X/reference-X pairs (a rank-1 state).
    """
    n = code.n_qubits
    if variant == "max-mixed":
        _check_capacity(n)
        m = _projector_product(1 << n, code.star_masks, code.plaquette_masks)
        m /= np.trace(m)
        return DenseState(m, n_code=n).validate()
    if variant == "bell-reference":
        _check_capacity(n + 2)
        dim = 1 << (n + 2)
        x_strings = list(code.star_masks)
        z_strings = list(code.plaquette_masks)
        for k in range(2):
            ref_bit = 1 << (n + k)
            z_strings.append(code.logical_z_masks[k] | ref_bit)
            x_strings.append(code.logical_x_masks[k] | ref_bit)
        m = _projector_product(dim, x_strings, z_strings)
        m /= np.trace(m)
        return DenseState(m, n_code=n, n_ref=2).validate()
    raise ValueError(f"unknown variant {variant!r}")


def build_pure_ground_state(code: ToricCode) -> DenseState:
    """Rank-1 ground state fixed by all stabilizers plus both logical Zs."""
    n = code.n_qubits
    _check_capacity(n)
    m = _projector_product(1 << n, code.star_masks,
                           code.plaquette_masks + code.logical_z_masks)
    m /= np.trace(m)
    return DenseState(m, n_code=n).validate()


def apply_channel(state: DenseState, model: ErrorModel) -> DenseState:
    """Composition of all single-site X channels then Z channels on the code
    qubits.  Reference qubits are never touched."""
    m = state.matrix.copy()
    for q in range(state.n_code):
        if model.p_x > 0.0:
            m = (1.0 - model.p_x) * m + model.p_x * _conjugate_x(m, q)
        if model.p_z > 0.0:
            m = (1.0 - model.p_z) * m + model.p_z * _conjugate_z(m, q)
    return DenseState(m, state.n_code, state.n_ref)


def apply_string(state: DenseState, x_mask: int = 0, z_mask: int = 0) -> DenseState:
    """Conjugate the state by the Pauli string X^(x_mask) Z^(z_mask)."""
    if (x_mask | z_mask) >> state.n_code:
        raise ValueError("string acts outside the code qubits")
    m = state.matrix
    m = _apply_x_string_left(m, x_mask)
    m = _apply_z_string_left(m, z_mask)
    # right factors (conjugation): columns, transposed application
    m = _apply_x_string_left(m.T, x_mask)
    m = _apply_z_string_left(m, z_mask).T
    return DenseState(m, state.n_code, state.n_ref)


def _spectrum(m: np.ndarray) -> np.ndarray:
    evals = np.linalg.eigvalsh(m)
    return np.clip(evals, 0.0, None)


def renyi_moment(state: DenseState, n: int) -> float:
    """tr rho^n from the eigenvalue spectrum."""
    if n > 6:
        raise ValueError(f"moment order capped at 6, got {n}")
    lam = _spectrum(state.matrix)
    return float(np.sum(lam ** n))


def partial_transpose(state: DenseState, region_mask: int) -> np.ndarray:
    """Matrix of rho^(T_A) for the qubit subset given as a bitmask."""
    dim = state.dim
    idx = np.arange(dim)
    keep = ~region_mask & (dim - 1)
    rows = (idx[:, None] & keep) | (idx[None, :] & region_mask)
    cols = (idx[None, :] & keep) | (idx[:, None] & region_mask)
    return state.matrix[rows, cols]


def renyi_negativity(state: DenseState, region_mask: int, order: int) -> float:
    """Even-order Renyi negativity of the qubit subset A (order = 2n):
    E^(2n) = (1 / (2 - 2n)) log[ tr (rho^T_A)^(2n) / tr rho^(2n) ]."""
    if order % 2 != 0 or order < 2:
        raise ValueError(f"negativity order must be a positive even integer, got {order}")
    if region_mask == 0 or region_mask == (1 << state.n_qubits) - 1:
        raise ValueError("region must be a proper nonempty qubit subset")
    if order == 2:
        # partial transpose preserves the Frobenius norm, so the order-2
        # ratio is identically 1
        return 0.0
    pt = partial_transpose(state, region_mask)
    lam_pt = np.linalg.eigvalsh(pt)
    num = float(np.sum(lam_pt ** order))
    den = float(np.sum(_spectrum(state.matrix) ** order))
    return math.log(num / den) / (2 - order)


def log_negativity(state: DenseState, region_mask: int) -> float:
    """log || rho^(T_A) ||_1."""
    pt = partial_transpose(state, region_mask)
    lam = np.linalg.eigvalsh(pt)
    return float(np.log(np.sum(np.abs(lam))))


def renyi_relative_entropy(state: DenseState, excited: DenseState, n: int) -> float:
    """D^(n) = (1/(1-n)) log[ tr rho rho_m^(n-1) / tr rho^n ]; +inf when the
    numerator vanishes (perfectly distinguishable states)."""
    if n < 2:
        raise ValueError(f"Renyi index must be >= 2, got {n}")
    num = float(np.trace(state.matrix @ np.linalg.matrix_power(excited.matrix, n - 1)))
    den = renyi_moment(state, n)
    if num <= 1e-12 * den:
        return math.inf
    return math.log(num / den) / (1 - n)


def partial_trace(state: DenseState, keep_mask: int) -> np.ndarray:
    """Reduced density matrix on the qubits flagged in keep_mask."""
    keep = [q for q in range(state.n_qubits) if (keep_mask >> q) & 1]
    traced = [q for q in range(state.n_qubits) if not (keep_mask >> q) & 1]
    scatter_keep = np.zeros(1 << len(keep), dtype=np.int64)
    for a in range(1 << len(keep)):
        idx = 0
        for bit, q in enumerate(keep):
            if (a >> bit) & 1:
                idx |= 1 << q
        scatter_keep[a] = idx
    out = np.zeros((1 << len(keep), 1 << len(keep)))
    for c in range(1 << len(traced)):
        idx_c = 0
        for bit, q in enumerate(traced):
            if (c >> bit) & 1:
                idx_c |= 1 << q
        rows = scatter_keep + idx_c
        out += state.matrix[np.ix_(rows, rows)]
    return out


def partial_trace_refs(state: DenseState) -> DenseState:
    """Trace out the reference qubits, leaving the code block."""
    if state.n_ref == 0:
        return state
    dq = 1 << state.n_code
    dr = 1 << state.n_ref
    m = state.matrix.reshape(dr, dq, dr, dq)
    return DenseState(np.einsum("rirj->ij", m), state.n_code, 0)


def renyi_coherent_info(state_rq: DenseState, n: int) -> float:
    """I_c^(n) = (1/(n-1)) log[ tr rho_RQ^n / tr rho_Q^n ]."""
    if n < 2:
        raise ValueError(f"Renyi index must be >= 2, got {n}")
    if state_rq.n_ref == 0:
        raise ValueError("state carries no reference qubits")
    dq = 1 << state_rq.n_code
    dr = 1 << state_rq.n_ref
    m = state_rq.matrix.reshape(dr, dq, dr, dq)
    rho_q = np.einsum("rirj->ij", m)
    num = renyi_moment(state_rq, n)
    lam_q = np.clip(np.linalg.eigvalsh(rho_q), 0.0, None)
    den = float(np.sum(lam_q ** n))
    return math.log(num / den) / (n - 1)
