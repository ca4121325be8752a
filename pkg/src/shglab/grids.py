"""Axis-aligned box grids.

The computational domain is an axis-aligned box discretized by a tensor
grid of nodes; spacing along each axis is ``extent/(n-1)`` so that the
first and last node lie exactly on the boundary faces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGrid


@dataclass(frozen=True)
class BoxGrid:
    """Node-centered tensor grid on a box.

    origin: coordinates of the (0,0,0) node.
    extent: box side lengths; the last node sits at origin + extent.
    n:      node counts per axis (at least 4).
    """

    origin: tuple[float, float, float]
    extent: tuple[float, float, float]
    n: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if len(self.origin) != 3 or len(self.extent) != 3 or len(self.n) != 3:
            raise InvalidGrid("grid needs three axes")
        if any(m < 4 for m in self.n):
            raise InvalidGrid(f"need at least 4 nodes per axis, got n={self.n}")
        if any(e <= 0 for e in self.extent):
            raise InvalidGrid(f"extent must be positive, got {self.extent}")

    @classmethod
    def cube(cls, side: float, n: int, center=(0.0, 0.0, 0.0)) -> "BoxGrid":
        """Cube of the given side centered at ``center`` with n nodes per axis."""
        half = side / 2.0
        return cls(tuple(c - half for c in center), (side,) * 3, (n,) * 3)

    @property
    def h(self) -> tuple[float, float, float]:
        return tuple(self.extent[a] / (self.n[a] - 1) for a in range(3))

    @property
    def node_count(self) -> int:
        return self.n[0] * self.n[1] * self.n[2]

    def axis(self, a: int) -> np.ndarray:
        """Node coordinates along axis ``a``."""
        return self.origin[a] + self.h[a] * np.arange(self.n[a])

    def axes(self):
        return tuple(self.axis(a) for a in range(3))

    def meshgrid(self):
        """Broadcastable (X, Y, Z) coordinate arrays over all nodes."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def shape(self) -> tuple[int, int, int]:
        return self.n

    def same_layout(self, other: "BoxGrid") -> bool:
        return (self.n == other.n and
                np.allclose(self.origin, other.origin) and
                np.allclose(self.extent, other.extent))
