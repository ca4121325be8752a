"""Discrete norms for node fields and boundary traces.

Volume integrals use trapezoidal quadrature on the node grid; derivatives
are centered differences (one-sided at the boundary).  These are the norm
surrogates used by the solvers' reports and by the smallness bookkeeping of
the quadratic solver.
"""
from __future__ import annotations

import numpy as np

from .fields import ComplexVectorField
from .grids import BoxGrid
from .traces import TangentialTrace, face_axes, surface_divergence


def axis_quad_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def volume_quad_weights(grid: BoxGrid) -> np.ndarray:
    wx = axis_quad_weights(grid.n[0], grid.h[0])
    wy = axis_quad_weights(grid.n[1], grid.h[1])
    wz = axis_quad_weights(grid.n[2], grid.h[2])
    return wx[:, None, None] * wy[None, :, None] * wz[None, None, :]


def lp_volume(values: np.ndarray, grid: BoxGrid, p: float,
              weight: np.ndarray | None = None) -> float:
    """(sum_i quad_i * |values_i|^p)^(1/p) over vector or scalar samples."""
    mag2 = np.abs(values) ** 2
    while mag2.ndim > 3:
        mag2 = mag2.sum(axis=0)
    q = volume_quad_weights(grid)
    if weight is not None:
        q = q * weight
    return float(np.sum(q * mag2 ** (p / 2)) ** (1.0 / p))


def weighted_l2(values: np.ndarray, grid: BoxGrid, delta: float) -> float:
    """L2 norm with polynomial weight (1+|x|^2)^delta on the samples."""
    X = grid.meshgrid()
    r2 = sum(np.asarray(Xa, dtype=float) ** 2 for Xa in X)
    w = (1.0 + r2) ** delta
    return lp_volume(values, grid, 2.0, weight=np.broadcast_to(w, grid.shape()))


def gradient_components(values: np.ndarray, grid: BoxGrid) -> np.ndarray:
    """Centered-difference gradient of each component; shape (m, 3, n1, n2, n3)."""
    v = values if values.ndim == 4 else values[None]
    out = np.empty(v.shape[:1] + (3,) + v.shape[1:], dtype=v.dtype)
    for m in range(v.shape[0]):
        for a in range(3):
            out[m, a] = np.gradient(v[m], grid.h[a], axis=a)
    return out


def field_norm_w1p(field: ComplexVectorField, p: float = 4.0) -> float:
    """L^p norm of the field plus L^p norm of its centered gradient."""
    grid = field.grid
    base = lp_volume(field.values, grid, p)
    grad = gradient_components(field.values, grid)
    return base + lp_volume(grad.reshape((-1,) + tuple(grid.n)), grid, p)


def _face_quad_weights(grid: BoxGrid, i: int) -> np.ndarray:
    _, _, b, c = face_axes(i)
    wb = axis_quad_weights(grid.n[b], grid.h[b])
    wc = axis_quad_weights(grid.n[c], grid.h[c])
    return wb[:, None] * wc[None, :]


def lp_trace(trace: TangentialTrace, p: float) -> float:
    total = 0.0
    for i in range(6):
        q = _face_quad_weights(trace.grid, i)
        mag2 = np.abs(trace.faces[i]) ** 2
        total += float(np.sum(q * mag2.sum(axis=0) ** (p / 2)))
    return total ** (1.0 / p)


def trace_norm_div(trace: TangentialTrace, p: float = 4.0) -> float:
    """Boundary norm: L^p of the trace, of its in-face gradient, and of its
    surface divergence, summed.  Vanishes exactly iff the trace is zero."""
    grid = trace.grid
    base = lp_trace(trace, p)
    gtot = 0.0
    for i in range(6):
        a, s, b, c = face_axes(i)
        q = _face_quad_weights(grid, i)
        g2 = np.zeros(trace.faces[i].shape[1:])
        for k in range(3):
            g2 += np.abs(np.gradient(trace.faces[i][k], grid.h[b], axis=0)) ** 2
            g2 += np.abs(np.gradient(trace.faces[i][k], grid.h[c], axis=1)) ** 2
        gtot += float(np.sum(q * g2 ** (p / 2)))
    div = surface_divergence(trace)
    dtot = 0.0
    for i in range(6):
        q = _face_quad_weights(grid, i)
        dtot += float(np.sum(q * np.abs(div[i]) ** p))
    return base + gtot ** (1.0 / p) + dtot ** (1.0 / p)


def rel_l2(values: np.ndarray, reference: np.ndarray) -> float:
    """Plain relative ell^2 difference of two same-shaped sample arrays."""
    num = np.linalg.norm(np.ravel(values - reference))
    den = np.linalg.norm(np.ravel(reference))
    return float(num / den) if den > 0 else float(num)
