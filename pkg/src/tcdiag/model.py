"""Error channel parameters and result containers shared by all engines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ErrorModel:
    """Independent single-qubit bit-flip (p_x) and phase (p_z) error rates.

    The loop expansion of the corrupted state assigns X loops a line tension
    mu_x = -log(1 - 2 p_z) and Z loops mu_z = -log(1 - 2 p_x); the matching
    spin-model couplings are J = mu / 2.  p = 1/2 maps to infinite tension
    (the +inf sentinel), p = 0 to free loops.
    """

    p_x: float = 0.0
    p_z: float = 0.0

    def __post_init__(self):
        for name, p in (("p_x", self.p_x), ("p_z", self.p_z)):
            if not 0.0 <= p <= 0.5:
                raise ValueError(f"{name} must lie in [0, 1/2], got {p}")

    @staticmethod
    def _tension(p: float) -> float:
        if p == 0.5:
            return math.inf
        return -math.log(1.0 - 2.0 * p)

    @property
    def mu_x(self) -> float:
        return self._tension(self.p_z)

    @property
    def mu_z(self) -> float:
        return self._tension(self.p_x)

    @property
    def coupling_x(self) -> float:
        return 0.5 * self.mu_x

    @property
    def coupling_z(self) -> float:
        return 0.5 * self.mu_z

    def tension(self, kind: str) -> float:
        if kind == "X":
            return self.mu_x
        if kind == "Z":
            return self.mu_z
        raise ValueError(f"kind must be 'X' or 'Z', got {kind!r}")

    def coupling(self, kind: str) -> float:
        return 0.5 * self.tension(kind)


def nishimori_coupling(p: float) -> float:
    """Random-bond coupling J with e^(-2J) = p / (1 - p)."""
    if not 0.0 < p < 0.5:
        raise ValueError(f"Nishimori coupling needs p in (0, 1/2), got {p}")
    return 0.5 * math.log((1.0 - p) / p)


@dataclass
class DiagnosticResult:
    """A single diagnostic value with its uncertainty and provenance."""

    quantity: str
    value: float
    error: float = 0.0
    method: str = ""
    n: int | None = None
    L: int | None = None
    p: float | None = None
    flag: str = "ok"            # ok | undersampled | infinite | no-crossing
    provenance: dict = field(default_factory=dict)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)
