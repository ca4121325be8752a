"""Complex vector fields on box grids, frequency pairs, and norm exponents."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolated, DegenerateFrequency
from .grids import BoxGrid


@dataclass
class ComplexVectorField:
    """A complex 3-vector sample at every node of a box grid.

    values has shape (3, n1, n2, n3).  The optional ``payload`` dict carries
    solver-native data (e.g. staggered-grid samples) alongside the public
    node-centered view; it is ignored by all generic field operations.
    """

    grid: BoxGrid
    values: np.ndarray
    payload: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        want = (3,) + tuple(self.grid.n)
        if self.values.shape != want:
            raise ConstraintViolated(
                f"field shape {self.values.shape} does not match grid {want}")
        if not np.all(np.isfinite(self.values)):
            raise ConstraintViolated("field contains non-finite entries")

    @classmethod
    def zeros(cls, grid: BoxGrid) -> "ComplexVectorField":
        return cls(grid, np.zeros((3,) + tuple(grid.n), dtype=np.complex128))

    @classmethod
    def from_function(cls, grid: BoxGrid, fn) -> "ComplexVectorField":
        """Sample ``fn(X, Y, Z) -> (v1, v2, v3)`` at every node."""
        X, Y, Z = grid.meshgrid()
        comps = fn(X, Y, Z)
        vals = np.stack([np.broadcast_to(np.asarray(c, dtype=np.complex128),
                                         tuple(grid.n)) for c in comps])
        return cls(grid, vals)

    def copy(self) -> "ComplexVectorField":
        return ComplexVectorField(self.grid, self.values.copy(),
                                  payload=None if self.payload is None
                                  else dict(self.payload))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


@dataclass(frozen=True)
class FrequencyPair:
    """Fundamental angular frequency and its derived wavenumber.

    kappa**2 = omega**2 * mu0 * eps0; the second harmonic lives at 2*omega
    with wavenumber 2*kappa.
    """

    omega: float
    eps0: float = 1.0
    mu0: float = 1.0

    def __post_init__(self):
        if self.omega <= 0:
            raise DegenerateFrequency(f"omega must be positive, got {self.omega}")
        if self.eps0 <= 0 or self.mu0 <= 0:
            raise ConstraintViolated("background eps0, mu0 must be positive")

    @property
    def kappa(self) -> float:
        return self.omega * np.sqrt(self.mu0 * self.eps0)

    def channel_omega(self, k: int) -> float:
        """Angular frequency of harmonic k (k = 1 or 2)."""
        return k * self.omega

    def channel_kappa(self, k: int) -> float:
        return k * self.kappa


@dataclass(frozen=True)
class NormExponent:
    """Lebesgue exponent p in (3, 6) and weight exponent delta in (1/2, 1)."""

    p: float = 4.0
    delta: float = 0.75

    def __post_init__(self):
        if not (3.0 < self.p < 6.0):
            raise ConstraintViolated(f"p must lie in (3, 6), got {self.p}")
        if not (0.5 < self.delta < 1.0):
            raise ConstraintViolated(
                f"delta must lie in (1/2, 1), got {self.delta}")
