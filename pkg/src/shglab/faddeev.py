"""Faddeev kernels and the vacuum dyadic fundamental solution on a super-cell.

Everything here is spectral on a periodic super-cell: the scalar kernel is
realized as the Fourier multiplier 1/(|xi|^2 - 2i zeta.xi), and the dyadic
Green's operator composes that multiplier with the matrix differential
operator written in the zeta-shifted frequency variable.  Sources must be
compactly supported in the central sub-box so that periodic wrap-around
stays below discretization error.

Kernel construction is pure; convolutions hold no shared mutable state, so
concurrent applications of one kernel are safe.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import (ConstraintViolated, DegenerateFrequency,
                     IllConditionedSymbol, InvalidGrid, SupportViolation)
from .fields import ComplexVectorField, FrequencyPair
from .grids import BoxGrid


def make_supercell(grid: BoxGrid, factor: int = 2) -> BoxGrid:
    """Periodic super-cell centered on ``grid`` with ``factor``-times the side.

    The FFT lattice is the super-cell's nodes minus the duplicate end plane,
    so the periodic period is exactly ``factor * extent`` per axis.
    """
    if factor < 2:
        raise InvalidGrid("super-cell must be at least twice the domain side")
    n_sc = tuple(factor * (n - 1) + 1 for n in grid.n)
    origin = tuple(o - (factor - 1) / 2.0 * L
                   for o, L in zip(grid.origin, grid.extent))
    extent = tuple(factor * L for L in grid.extent)
    return BoxGrid(origin, extent, n_sc)


def _fft_shape(grid: BoxGrid):
    return tuple(n - 1 for n in grid.n)


def _fft_freqs(grid: BoxGrid):
    """Angular frequency arrays, broadcastable over the FFT lattice."""
    out = []
    for a in range(3):
        xi = 2.0 * np.pi * sfft.fftfreq(grid.n[a] - 1, d=grid.h[a])
        shape = [1, 1, 1]
        shape[a] = xi.size
        out.append(xi.reshape(shape))
    return out


def _lattice_coords(grid: BoxGrid, centered: bool = True):
    """Node coordinates of the FFT lattice, optionally about the cell center."""
    out = []
    for a in range(3):
        x = grid.origin[a] + grid.h[a] * np.arange(grid.n[a] - 1)
        if centered:
            x = x - (grid.origin[a] + grid.extent[a] / 2.0)
        shape = [1, 1, 1]
        shape[a] = x.size
        out.append(x.reshape(shape))
    return out


@dataclass
class FaddeevKernel:
    """Sampled Fourier symbol 1/(|xi|^2 - 2i zeta.xi) on a super-cell."""

    zeta: np.ndarray
    kappa2: complex
    supercell: BoxGrid
    eta: float
    symbol: np.ndarray
    zeroed_count: int

    def check_symbol(self) -> float:
        """Max |symbol * denominator - 1| over retained frequency nodes."""
        x1, x2, x3 = _fft_freqs(self.supercell)
        z = self.zeta
        den = (x1 ** 2 + x2 ** 2 + x3 ** 2
               - 2j * (z[0] * x1 + z[1] * x2 + z[2] * x3))
        retained = self.symbol != 0
        return float(np.max(np.abs(self.symbol[retained] * den[retained] - 1.0),
                            initial=0.0))

    def apply_scalar(self, values: np.ndarray) -> np.ndarray:
        """Multiplier applied to one scalar lattice array (shape = FFT lattice)."""
        return sfft.ifftn(sfft.fftn(values) * self.symbol)


def faddeev_kernel(zeta, grid: BoxGrid, eta: float | None = None,
                   kappa2: complex | None = None) -> FaddeevKernel:
    """Sample the scalar kernel symbol on the periodic super-cell ``grid``.

    ``eta`` is the regularization floor for the denominator magnitude;
    by default 1e-8 times the largest denominator on the lattice.  Nodes
    below the floor (always including DC) are zeroed and counted.  When
    ``kappa2`` is given, zeta.zeta is validated against it.
    """
    z = np.asarray(zeta, dtype=complex).reshape(3)
    zz = complex(z @ z)
    znorm2 = float(np.sum(np.abs(z) ** 2))
    if kappa2 is not None:
        if abs(zz - kappa2) > 1e-10 * max(znorm2, 1e-300):
            raise ConstraintViolated(
                f"zeta.zeta = {zz} differs from the required {kappa2}")
    else:
        kappa2 = zz
    x1, x2, x3 = _fft_freqs(grid)
    den = (x1 ** 2 + x2 ** 2 + x3 ** 2
           - 2j * (z[0] * x1 + z[1] * x2 + z[2] * x3))
    mag = np.abs(den)
    if eta is None:
        eta = 1e-8 * float(mag.max())
    bad = mag < eta
    count = int(bad.sum())
    if count > 1e-3 * den.size:
        raise IllConditionedSymbol(
            f"{count} of {den.size} frequency nodes fall below eta={eta:g}")
    symbol = np.zeros(np.broadcast_shapes(x1.shape, x2.shape, x3.shape),
                      dtype=complex)
    np.divide(1.0, den, out=symbol, where=~bad)
    return FaddeevKernel(zeta=z, kappa2=kappa2, supercell=grid, eta=float(eta),
                         symbol=symbol, zeroed_count=count)


def _margin_mask(grid: BoxGrid):
    """True at lattice nodes inside the padding margin (outer quarter)."""
    masks = []
    for a in range(3):
        x = grid.origin[a] + grid.h[a] * np.arange(grid.n[a] - 1)
        lo = grid.origin[a] + grid.extent[a] / 4.0
        hi = grid.origin[a] + 3.0 * grid.extent[a] / 4.0
        shape = [1, 1, 1]
        shape[a] = x.size
        masks.append(((x < lo - 1e-12) | (x > hi + 1e-12)).reshape(shape))
    return masks[0] | masks[1] | masks[2]


def _check_support(values: np.ndarray, grid: BoxGrid):
    mask = _margin_mask(grid)
    top = float(np.max(np.abs(values)))
    if top == 0.0:
        return
    outer = float(np.max(np.abs(values[..., mask])))
    if outer > 1e-13 * top:
        raise SupportViolation(
            "source has significant values inside the padding margin "
            f"(|f| up to {outer:g} vs peak {top:g})")


def _fft_view(field: ComplexVectorField) -> np.ndarray:
    N = _fft_shape(field.grid)
    return field.values[:, :N[0], :N[1], :N[2]]


def _wrap_planes(vals: np.ndarray, grid: BoxGrid) -> np.ndarray:
    """Lift FFT-lattice values back to the node grid (periodic end planes)."""
    out = np.empty((vals.shape[0],) + tuple(grid.n), dtype=complex)
    N = _fft_shape(grid)
    out[:, :N[0], :N[1], :N[2]] = vals
    out[:, -1, :N[1], :N[2]] = vals[:, 0]
    out[:, :, -1, :N[2]] = out[:, :, 0, :N[2]]
    out[:, :, :, -1] = out[:, :, :, 0]
    return out


def gzeta_convolve(f: ComplexVectorField, kernel: FaddeevKernel) -> ComplexVectorField:
    """Componentwise convolution with the Faddeev kernel (spectral)."""
    if not f.grid.same_layout(kernel.supercell):
        raise InvalidGrid("field does not live on the kernel's super-cell")
    vals = _fft_view(f)
    _check_support(vals, f.grid)
    out = sfft.ifftn(sfft.fftn(vals, axes=(1, 2, 3)) * kernel.symbol,
                     axes=(1, 2, 3))
    return ComplexVectorField(f.grid, _wrap_planes(out, f.grid))


def dyadic_green_apply(source_pair, freq: FrequencyPair, zeta,
                       harmonic: int = 1):
    """Vacuum fundamental solution of the first-order pair applied to sources.

    Applies (kap2/w) [[1 + DD./kap2, (i/(w eps0)) Dx],
                      [-(i/(w mu0)) Dx, 1 + DD./kap2]]
    composed with the scalar kernel convolution, where every derivative is
    the zeta-shifted spectral one and kap2 = w^2 eps0 mu0 for this harmonic
    channel.  Requires zeta.zeta = -w^2 eps0 mu0, which makes
    e^{zeta.x} g_zeta the scalar fundamental solution used inside.

    The gauging multiplies by e^{+-zeta.(x-x_c)} pointwise, so the direct
    dyadic apply is intended for moderate |Re zeta| * side; large-|zeta|
    work should stay in envelope form (see the CGO remainder solver).
    """
    Se, Sh = source_pair
    grid = Se.grid
    if not Sh.grid.same_layout(grid):
        raise InvalidGrid("source pair must share one super-cell grid")
    w = harmonic * freq.omega
    if w == 0:
        raise DegenerateFrequency("zero channel frequency")
    kap2 = w ** 2 * freq.eps0 * freq.mu0
    z = np.asarray(zeta, dtype=complex).reshape(3)
    zz = complex(z @ z)
    znorm2 = float(np.sum(np.abs(z) ** 2))
    if abs(zz + kap2) > 1e-10 * max(znorm2, 1e-300):
        raise ConstraintViolated(
            f"zeta.zeta = {zz} must equal -w^2 eps0 mu0 = {-kap2}")

    kernel = faddeev_kernel(z, grid, kappa2=zz)
    X = _lattice_coords(grid, centered=True)
    gauge_dn = np.exp(-(z[0] * X[0] + z[1] * X[1] + z[2] * X[2]))
    se = _fft_view(Se)
    sh = _fft_view(Sh)
    _check_support(se, grid)
    _check_support(sh, grid)

    ue = sfft.fftn(se * gauge_dn, axes=(1, 2, 3))
    uh = sfft.fftn(sh * gauge_dn, axes=(1, 2, 3))
    ue *= kernel.symbol
    uh *= kernel.symbol

    x1, x2, x3 = _fft_freqs(grid)
    D = [1j * x1 + z[0], 1j * x2 + z[1], 1j * x3 + z[2]]

    def ddiv(u):
        div = D[0] * u[0] + D[1] * u[1] + D[2] * u[2]
        return np.stack([D[a] * div for a in range(3)])

    def dcross(u):
        return np.stack([D[1] * u[2] - D[2] * u[1],
                         D[2] * u[0] - D[0] * u[2],
                         D[0] * u[1] - D[1] * u[0]])

    espec = ue + ddiv(ue) / kap2 + (1j / (w * freq.eps0)) * dcross(uh)
    hspec = uh + ddiv(uh) / kap2 - (1j / (w * freq.mu0)) * dcross(ue)
    pref = kap2 / w
    gauge_up = np.exp(z[0] * X[0] + z[1] * X[1] + z[2] * X[2])
    Eout = pref * gauge_up * sfft.ifftn(espec, axes=(1, 2, 3))
    Hout = pref * gauge_up * sfft.ifftn(hspec, axes=(1, 2, 3))
    return (ComplexVectorField(grid, _wrap_planes(Eout, grid)),
            ComplexVectorField(grid, _wrap_planes(Hout, grid)))
