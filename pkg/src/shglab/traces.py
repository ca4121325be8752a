"""Tangential boundary traces on the six faces of a box grid.

The trace of a vector field w on a face with outward unit normal nu is
t(w) = nu x w, a tangential vector field (t . nu = 0 identically).  Faces
are enumerated in the fixed order

    ((0,-1), (0,+1), (1,-1), (1,+1), (2,-1), (2,+1))

where the first entry is the constant axis and the second the side.  Face
data is stored as a full 3-vector sampled on the (n_b, n_c) node layer of
the face, with (b, c) the remaining axes in increasing order; the normal
component slot is exactly zero.

Traces optionally carry a ``payload`` dict with extra synthesis information
(for example the one-sided interior field samples a solver produced along
with the trace, or the analytic description of a probing field).  Payloads
ride along through the linear operations when that is meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolated
from .fields import ComplexVectorField
from .grids import BoxGrid

FACES = ((0, -1), (0, +1), (1, -1), (1, +1), (2, -1), (2, +1))


def face_axes(i: int):
    """(normal_axis, side, b, c) for face index i; b < c are in-plane axes."""
    a, s = FACES[i]
    b, c = [ax for ax in range(3) if ax != a]
    return a, s, b, c


def face_normal(i: int) -> np.ndarray:
    a, s = FACES[i]
    nu = np.zeros(3)
    nu[a] = float(s)
    return nu


def _boundary_slice(a: int, s: int):
    sl = [slice(None)] * 3
    sl[a] = 0 if s < 0 else -1
    return tuple(sl)


@dataclass
class TangentialTrace:
    """Tangential vector data on all six faces of a box grid."""

    grid: BoxGrid
    faces: tuple
    payload: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.faces) != 6:
            raise ConstraintViolated("trace needs data on all six faces")
        fixed = []
        for i, data in enumerate(self.faces):
            a, s, b, c = face_axes(i)
            arr = np.ascontiguousarray(data, dtype=np.complex128)
            want = (3, self.grid.n[b], self.grid.n[c])
            if arr.shape != want:
                raise ConstraintViolated(
                    f"face {i} data shape {arr.shape} != {want}")
            if np.any(arr[a] != 0):
                raise ConstraintViolated(
                    f"face {i} trace has a nonzero normal component")
            if not np.all(np.isfinite(arr.view(np.float64))):
                raise ConstraintViolated(f"face {i} trace has non-finite entries")
            fixed.append(arr)
        self.faces = tuple(fixed)

    # -- constructors --------------------------------------------------------
    @classmethod
    def zeros(cls, grid: BoxGrid) -> "TangentialTrace":
        out = []
        for i in range(6):
            _, _, b, c = face_axes(i)
            out.append(np.zeros((3, grid.n[b], grid.n[c]), dtype=np.complex128))
        return cls(grid, tuple(out))

    @classmethod
    def from_face_function(cls, grid: BoxGrid, fn, payload=None) -> "TangentialTrace":
        """Build from fn(face_index, X, Y, Z) -> 3 components.

        The coordinate arrays are node coordinates restricted to the face.
        fn must return the trace vector itself; its normal slot is zeroed
        exactly afterwards so the tangency invariant holds.
        """
        X = grid.meshgrid()
        out = []
        for i in range(6):
            a, s, b, c = face_axes(i)
            sl = _boundary_slice(a, s)
            coords = tuple(np.broadcast_to(X[k], grid.shape())[sl] for k in range(3))
            vals = fn(i, *coords)
            arr = np.stack([np.broadcast_to(np.asarray(v, dtype=np.complex128),
                                            coords[0].shape) for v in vals])
            arr = arr.copy()
            arr[a] = 0.0
            out.append(arr)
        return cls(grid, tuple(out), payload=payload)

    # -- linear structure ------------------------------------------------------
    def _combine(self, other, ca, cb):
        faces = tuple(ca * fa + cb * fb for fa, fb in zip(self.faces, other.faces))
        payload = _combine_payloads(self.payload, other.payload, ca, cb)
        return TangentialTrace(self.grid, faces, payload=payload)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, c):
        payload = _scale_payload(self.payload, c)
        return TangentialTrace(self.grid, tuple(c * f for f in self.faces),
                               payload=payload)

    __rmul__ = __mul__

    def conj(self) -> "TangentialTrace":
        return TangentialTrace(self.grid, tuple(np.conj(f) for f in self.faces))

    # -- measurements ----------------------------------------------------------
    def max_abs(self) -> float:
        return max(float(np.max(np.abs(f))) for f in self.faces)

    def copy(self) -> "TangentialTrace":
        return TangentialTrace(self.grid, tuple(f.copy() for f in self.faces),
                               payload=dict(self.payload) if self.payload else None)


def _combine_payloads(pa, pb, ca, cb):
    """Linearly combine payloads where that makes sense (sampled H layers)."""
    if pa is None or pb is None:
        return None
    if pa.get("kind") != "h_layers" or pb.get("kind") != "h_layers":
        return None
    if pa.get("stagger") != pb.get("stagger"):
        return None
    combined = tuple(
        tuple(ca * ha + cb * hb for ha, hb in zip(fa, fb))
        for fa, fb in zip(pa["layers"], pb["layers"]))
    return {"kind": "h_layers", "stagger": pa["stagger"], "layers": combined}


def _scale_payload(p, c):
    if p is None:
        return None
    if p.get("kind") == "h_layers":
        layers = tuple(tuple(c * h for h in f) for f in p["layers"])
        return {"kind": "h_layers", "stagger": p["stagger"], "layers": layers}
    if p.get("kind") in ("plane", "cgo"):
        q = dict(p)
        q["scale"] = c * p.get("scale", 1.0)
        return q
    return None


def tangential_trace(field: ComplexVectorField, payload=None) -> TangentialTrace:
    """Restrict a node field to the boundary and rotate: t(w) = nu x w."""
    grid = field.grid
    out = []
    for i in range(6):
        a, s, b, c = face_axes(i)
        sl = _boundary_slice(a, s)
        w = [field.values[k][sl] for k in range(3)]
        t = [np.zeros_like(w[0]) for _ in range(3)]
        # nu x w with nu = s * e_a:  (e_a x w)_b = -w_c or +w_c by orientation
        ea = np.zeros(3)
        ea[a] = 1.0
        for k in range(3):
            i1, i2 = (k + 1) % 3, (k + 2) % 3
            t[k] = s * (ea[i1] * w[i2] - ea[i2] * w[i1])
        out.append(np.stack(t))
    return TangentialTrace(grid, tuple(out), payload=payload)


def surface_divergence(trace: TangentialTrace):
    """Per-face surface divergence of the in-plane components.

    Centered differences inside each face, one-sided at face edges.
    Returns a tuple of six scalar arrays of shape (n_b, n_c).
    """
    grid = trace.grid
    out = []
    for i in range(6):
        a, s, b, c = face_axes(i)
        tb, tc = trace.faces[i][b], trace.faces[i][c]
        div = (np.gradient(tb, grid.h[b], axis=0)
               + np.gradient(tc, grid.h[c], axis=1))
        out.append(div)
    return tuple(out)
