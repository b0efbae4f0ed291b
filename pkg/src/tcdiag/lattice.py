"""Toric-code lattice geometry and symplectic Pauli-string algebra.

Qubits live on the edges of an L x L square lattice with periodic boundary
conditions, N = 2 L^2 of them.  Edge indexing is row-major with all horizontal
edges before all vertical ones:

    h(r, c) = r * L + c          east-going edge out of vertex (r, c)
    v(r, c) = L^2 + r * L + c    south-going edge out of vertex (r, c)

Pauli strings are stored as a pair of N-bit integers (x_bits, z_bits); string
composition is bitwise XOR and all phase information is surfaced only through
the sign-valued operations below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .errors import CapacityError

# Enumerating a loop group touches 2^(L^2 + 1) elements; beyond this rank the
# stream would not finish in reasonable memory/time.
MAX_LOOP_RANK = 34


@dataclass(frozen=True)
class PauliString:
    """A Pauli operator modulo global phase, as X/Z support bitmasks."""

    nq: int
    x_bits: int = 0
    z_bits: int = 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.nq != other.nq:
            raise ValueError(f"length mismatch: {self.nq} != {other.nq}")
        return PauliString(self.nq, self.x_bits ^ other.x_bits, self.z_bits ^ other.z_bits)

    def weight(self) -> int:
        return (self.x_bits | self.z_bits).bit_count()

    def region_weight(self, region_mask: int) -> int:
        return ((self.x_bits | self.z_bits) & region_mask).bit_count()

    def is_identity(self) -> bool:
        return self.x_bits == 0 and self.z_bits == 0

    def __str__(self) -> str:
        chars = []
        for i in range(self.nq):
            x = (self.x_bits >> i) & 1
            z = (self.z_bits >> i) & 1
            chars.append("IXZY"[x + 2 * z] if x + 2 * z != 3 else "Y")
        return "".join(chars)


def commutation_sign(g: PauliString, h: PauliString) -> int:
    """+1 if g and h commute, -1 if they anticommute (symplectic form parity)."""
    if g.nq != h.nq:
        raise ValueError(f"length mismatch: {g.nq} != {h.nq}")
    overlap = (g.x_bits & h.z_bits).bit_count() + (g.z_bits & h.x_bits).bit_count()
    return -1 if overlap & 1 else 1


def region_sign(g: PauliString, h: PauliString, region_mask: int) -> int:
    """Commutation sign of the restrictions g|_A, h|_A to the edge set A."""
    overlap = (g.x_bits & h.z_bits & region_mask).bit_count() \
        + (g.z_bits & h.x_bits & region_mask).bit_count()
    return -1 if overlap & 1 else 1


def y_phase(g: PauliString, region_mask: int) -> int:
    """(-1)^(number of Pauli-Y factors of g inside the region)."""
    n_y = (g.x_bits & g.z_bits & region_mask).bit_count()
    return -1 if n_y & 1 else 1


class ToricCode:
    """Geometry, stabilizers and logical operators of the L x L toric code."""

    def __init__(self, L: int):
        if L < 2:
            raise ValueError(f"L must be >= 2, got {L} (L=1 torus is degenerate)")
        self.L = L
        self.n_qubits = 2 * L * L
        self.n_vertices = L * L
        self.n_plaquettes = L * L

        self.star_masks = [self._star_mask(s) for s in range(self.n_vertices)]
        self.plaquette_masks = [self._plaquette_mask(p) for p in range(self.n_plaquettes)]

        # X-type vertex stabilizers and Z-type plaquette stabilizers.
        self.stabilizers_x = [PauliString(self.n_qubits, x_bits=m) for m in self.star_masks]
        self.stabilizers_z = [PauliString(self.n_qubits, z_bits=m) for m in self.plaquette_masks]

        # Logical pairs: logical_z[k] anticommutes with logical_x[k] and
        # commutes with the other one.  logical_z[0] is the straight horizontal
        # Z-cycle through row 0, logical_z[1] the vertical cycle through
        # column 0; logical_x[k] is the transverse dual cycle crossing it once.
        lz0 = 0
        for c in range(L):
            lz0 |= 1 << self.h_edge(0, c)
        lz1 = 0
        for r in range(L):
            lz1 |= 1 << self.v_edge(r, 0)
        lx0 = 0
        for r in range(L):
            lx0 |= 1 << self.h_edge(r, 0)
        lx1 = 0
        for c in range(L):
            lx1 |= 1 << self.v_edge(0, c)
        self.logical_z_masks = [lz0, lz1]
        self.logical_x_masks = [lx0, lx1]
        self.logicals_z = [PauliString(self.n_qubits, z_bits=m) for m in self.logical_z_masks]
        self.logicals_x = [PauliString(self.n_qubits, x_bits=m) for m in self.logical_x_masks]

    # -- edge indexing ---------------------------------------------------

    def h_edge(self, r: int, c: int) -> int:
        return (r % self.L) * self.L + (c % self.L)

    def v_edge(self, r: int, c: int) -> int:
        return self.L * self.L + (r % self.L) * self.L + (c % self.L)

    def vertex(self, r: int, c: int) -> int:
        return (r % self.L) * self.L + (c % self.L)

    def plaquette(self, r: int, c: int) -> int:
        """Plaquette with top-left corner vertex (r, c)."""
        return (r % self.L) * self.L + (c % self.L)

    def _star_mask(self, s: int) -> int:
        r, c = divmod(s, self.L)
        return (1 << self.h_edge(r, c)) | (1 << self.h_edge(r, c - 1)) \
            | (1 << self.v_edge(r, c)) | (1 << self.v_edge(r - 1, c))

    def _plaquette_mask(self, p: int) -> int:
        r, c = divmod(p, self.L)
        return (1 << self.h_edge(r, c)) | (1 << self.h_edge(r + 1, c)) \
            | (1 << self.v_edge(r, c)) | (1 << self.v_edge(r, c + 1))

    # -- loop groups -----------------------------------------------------

    def loop_generators(self, kind: str, contractible_only: bool = False) -> list[int]:
        """Edge masks generating the closed-loop group of the given Pauli kind.

        Z loops live on the original lattice (products of plaquette boundaries),
        X loops on the dual lattice (products of vertex stars).  One stabilizer
        is redundant and dropped; the two non-contractible logical cycles are
        appended unless contractible_only is set.
        """
        if kind == "Z":
            gens = list(self.plaquette_masks[:-1])
            if not contractible_only:
                gens += self.logical_z_masks
        elif kind == "X":
            gens = list(self.star_masks[:-1])
            if not contractible_only:
                gens += self.logical_x_masks
        else:
            raise ValueError(f"kind must be 'X' or 'Z', got {kind!r}")
        return gens

    def translate_edge_mask(self, mask: int, dr: int, dc: int) -> int:
        """Image of an edge set under the lattice translation by (dr, dc)."""
        out = 0
        L = self.L
        for r in range(L):
            for c in range(L):
                if (mask >> self.h_edge(r, c)) & 1:
                    out |= 1 << self.h_edge(r + dr, c + dc)
                if (mask >> self.v_edge(r, c)) & 1:
                    out |= 1 << self.v_edge(r + dr, c + dc)
        return out

    # -- edge regions ----------------------------------------------------

    def edges_interior_to_plaquettes(self, plaquettes: set[int]) -> int:
        """Mask of edges both of whose adjacent plaquettes are in the set.

        This is the qubit region associated with a block of plaquette-model
        sites: the cut runs between the block and its complement.
        """
        mask = 0
        L = self.L
        for r in range(L):
            for c in range(L):
                # h(r, c) separates plaquettes (r-1, c) and (r, c).
                if self.plaquette(r - 1, c) in plaquettes and self.plaquette(r, c) in plaquettes:
                    mask |= 1 << self.h_edge(r, c)
                # v(r, c) separates plaquettes (r, c-1) and (r, c).
                if self.plaquette(r, c - 1) in plaquettes and self.plaquette(r, c) in plaquettes:
                    mask |= 1 << self.v_edge(r, c)
        return mask

    def edges_interior_to_vertices(self, vertices: set[int]) -> int:
        """Mask of edges both of whose endpoint vertices are in the set."""
        mask = 0
        L = self.L
        for r in range(L):
            for c in range(L):
                if self.vertex(r, c) in vertices and self.vertex(r, c + 1) in vertices:
                    mask |= 1 << self.h_edge(r, c)
                if self.vertex(r, c) in vertices and self.vertex(r + 1, c) in vertices:
                    mask |= 1 << self.v_edge(r, c)
        return mask

    def all_edges_mask(self) -> int:
        return (1 << self.n_qubits) - 1

    # -- debug dump --------------------------------------------------------

    def describe(self) -> str:
        """Stable plain-text adjacency listing of the code instance."""
        lines = [f"toric code L={self.L} qubits={self.n_qubits}"]
        for s in range(self.n_vertices):
            edges = sorted(_mask_bits(self.star_masks[s]))
            lines.append(f"star {s}: edges {edges}")
        for p in range(self.n_plaquettes):
            edges = sorted(_mask_bits(self.plaquette_masks[p]))
            lines.append(f"plaquette {p}: edges {edges}")
        for k in range(2):
            lines.append(f"logical_z[{k}]: edges {sorted(_mask_bits(self.logical_z_masks[k]))}")
            lines.append(f"logical_x[{k}]: edges {sorted(_mask_bits(self.logical_x_masks[k]))}")
        return "\n".join(lines)


def _mask_bits(mask: int) -> list[int]:
    bits = []
    i = 0
    while mask:
        if mask & 1:
            bits.append(i)
        mask >>= 1
        i += 1
    return bits


def build_code(L: int) -> ToricCode:
    return ToricCode(L)


def gray_masks(generators: list[int]) -> Iterator[int]:
    """All XOR-combinations of the generators in Gray-code order.

    Successive elements differ by exactly one generator, so the running mask
    is updated incrementally (cheap even for 2^20-scale groups).
    """
    rank = len(generators)
    mask = 0
    yield mask
    for k in range(1, 1 << rank):
        bit = (k & -k).bit_length() - 1
        mask ^= generators[bit]
        yield mask


def enumerate_loops(code: ToricCode, kind: str,
                    contractible_only: bool = False) -> Iterator[tuple[PauliString, int]]:
    """Stream every element of the loop group once, with its weight."""
    gens = code.loop_generators(kind, contractible_only)
    if len(gens) > MAX_LOOP_RANK:
        raise CapacityError(
            f"loop group rank {len(gens)} exceeds guard {MAX_LOOP_RANK} (L={code.L})")
    for mask in gray_masks(gens):
        if kind == "Z":
            yield PauliString(code.n_qubits, z_bits=mask), mask.bit_count()
        else:
            yield PauliString(code.n_qubits, x_bits=mask), mask.bit_count()
