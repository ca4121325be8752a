"""Material models: permittivity, permeability, quadratic susceptibility.

Coefficients may be uniform (python scalars) or node-sampled arrays on the
grid.  The quadratic susceptibility is a complex 3-vector field that must
vanish identically on the outermost node layer, so that everything built
from it is compactly supported inside the box.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolated
from .grids import BoxGrid


def radial_profile(coords, sigma: float, radius: float, center=(0.0, 0.0, 0.0)):
    """Smooth compactly supported radial bump.

    Gaussian of width ``sigma`` times the quartic cutoff
    ``max(0, 1-(r/radius)^2)**4``, which vanishes with three continuous
    derivatives at ``r = radius``.  ``coords`` is a 3-tuple of broadcastable
    coordinate arrays.
    """
    r2 = sum((coords[a] - center[a]) ** 2 for a in range(3))
    r = np.sqrt(r2)
    cut = np.maximum(0.0, 1.0 - (r / radius) ** 2) ** 4
    return np.exp(-r2 / (2.0 * sigma ** 2)) * cut


def chi2_bump(grid: BoxGrid, vec=(1.0, 0.5, -0.25), sigma: float | None = None,
              radius: float | None = None, center=None) -> np.ndarray:
    """Standard synthetic susceptibility: radial bump times a constant vector."""
    side = min(grid.extent)
    sigma = 0.125 * side if sigma is None else sigma
    radius = 0.45 * side if radius is None else radius
    if center is None:
        center = tuple(grid.origin[a] + grid.extent[a] / 2 for a in range(3))
    g = radial_profile(grid.meshgrid(), sigma, radius, center)
    return np.stack([np.asarray(v, dtype=np.complex128) * g for v in vec])


def eps_bump(grid: BoxGrid, amplitude: float = 0.4, sigma: float | None = None,
             radius: float | None = None, center=None,
             background: complex = 1.0) -> np.ndarray:
    """Permittivity with a smooth radial bump over a uniform background."""
    side = min(grid.extent)
    sigma = 0.16 * side if sigma is None else sigma
    radius = 0.38 * side if radius is None else radius
    if center is None:
        center = tuple(grid.origin[a] + grid.extent[a] / 2 for a in range(3))
    g = radial_profile(grid.meshgrid(), sigma, radius, center)
    return background + amplitude * g.astype(np.complex128)


def _check_positive_real(name, value):
    arr = np.asarray(value)
    if not np.all(arr.real > 0):
        raise ConstraintViolated(f"Re({name}) must be positive everywhere")


@dataclass
class MaterialModel:
    """Material coefficients on a box grid.

    eps, mu: uniform complex scalars or node arrays with positive real part.
    chi2:    complex (3, n1, n2, n3) array or None (no quadratic response);
             must vanish on the outermost node layer.
    eps0, mu0: positive real background constants.
    overrides: optional per-harmonic coefficient replacements,
             {k: (eps_k, mu_k)} for harmonic index k in {1, 2}, used by
             media whose coefficients differ between the two frequencies.
    """

    grid: BoxGrid
    eps: complex | np.ndarray = 1.0 + 0.0j
    mu: complex | np.ndarray = 1.0 + 0.0j
    chi2: np.ndarray | None = None
    eps0: float = 1.0
    mu0: float = 1.0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.eps0 <= 0 or self.mu0 <= 0:
            raise ConstraintViolated("eps0 and mu0 must be positive reals")
        for name in ("eps", "mu"):
            v = getattr(self, name)
            if isinstance(v, np.ndarray):
                v = np.ascontiguousarray(v, dtype=np.complex128)
                if v.shape != tuple(self.grid.n):
                    raise ConstraintViolated(
                        f"{name} array shape {v.shape} != grid {self.grid.n}")
                setattr(self, name, v)
            else:
                setattr(self, name, complex(v))
            _check_positive_real(name, getattr(self, name))
        for k, pair in self.overrides.items():
            if k not in (1, 2):
                raise ConstraintViolated(f"override harmonic must be 1 or 2, got {k}")
            _check_positive_real(f"eps override {k}", pair[0])
            _check_positive_real(f"mu override {k}", pair[1])
        if self.chi2 is not None:
            self.chi2 = np.ascontiguousarray(self.chi2, dtype=np.complex128)
            want = (3,) + tuple(self.grid.n)
            if self.chi2.shape != want:
                raise ConstraintViolated(
                    f"chi2 shape {self.chi2.shape} != {want}")
            edge = np.zeros(tuple(self.grid.n), dtype=bool)
            for a in range(3):
                sl = [slice(None)] * 3
                sl[a] = 0
                edge[tuple(sl)] = True
                sl[a] = -1
                edge[tuple(sl)] = True
            if np.any(self.chi2[:, edge] != 0):
                raise ConstraintViolated(
                    "chi2 must vanish on the boundary node layer")

    # -- per-harmonic coefficient access ------------------------------------
    def eps_at(self, k: int = 1):
        if k in self.overrides:
            return self.overrides[k][0]
        return self.eps

    def mu_at(self, k: int = 1):
        if k in self.overrides:
            return self.overrides[k][1]
        return self.mu

    def uniform_coeffs(self, k: int = 1):
        """Return (eps, mu) as complex scalars, or None if spatially varying."""
        e, m = self.eps_at(k), self.mu_at(k)
        if isinstance(e, np.ndarray) or isinstance(m, np.ndarray):
            return None
        return complex(e), complex(m)

    def chi2_array(self) -> np.ndarray:
        if self.chi2 is None:
            return np.zeros((3,) + tuple(self.grid.n), dtype=np.complex128)
        return self.chi2

    @property
    def has_chi2(self) -> bool:
        return self.chi2 is not None and bool(np.any(self.chi2))

    def conjugated(self) -> "MaterialModel":
        """The medium with complex-conjugated eps and mu (same chi2)."""
        conj = lambda v: np.conj(v) if isinstance(v, np.ndarray) else complex(v).conjugate()
        return MaterialModel(
            grid=self.grid, eps=conj(self.eps), mu=conj(self.mu),
            chi2=self.chi2, eps0=self.eps0, mu0=self.mu0,
            overrides={k: (conj(e), conj(m)) for k, (e, m) in self.overrides.items()})

    @classmethod
    def vacuum(cls, grid: BoxGrid) -> "MaterialModel":
        return cls(grid=grid)
