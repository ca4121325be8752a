"""Plain-text serialization of fields and traces.

Field files:  a single header line

    grid n1 n2 n3 h1 h2 h3 origin o1 o2 o3

followed by one line per node with six reals (Re/Im of the three
components), nodes ordered with the first index fastest.

Trace files use the same header plus a leading integer face-tag column
(0..5 in the fixed face order); within a face the first in-plane axis is
fastest.
"""
from __future__ import annotations

import numpy as np

from .errors import ConstraintViolated
from .fields import ComplexVectorField
from .grids import BoxGrid
from .traces import TangentialTrace, face_axes


def _header(grid: BoxGrid) -> str:
    n, h, o = grid.n, grid.h, grid.origin
    return ("grid " + " ".join(str(k) for k in n)
            + " " + " ".join(repr(float(x)) for x in h)
            + " origin " + " ".join(repr(float(x)) for x in o))


def _parse_header(line: str) -> BoxGrid:
    tok = line.split()
    if len(tok) != 11 or tok[0] != "grid" or tok[7] != "origin":
        raise ConstraintViolated(f"bad field-file header: {line!r}")
    n = tuple(int(t) for t in tok[1:4])
    h = tuple(float(t) for t in tok[4:7])
    origin = tuple(float(t) for t in tok[8:11])
    extent = tuple(h[a] * (n[a] - 1) for a in range(3))
    return BoxGrid(origin=origin, extent=extent, n=n)


def _to_rows(values: np.ndarray) -> np.ndarray:
    # (3, n1, n2, n3) -> (N, 3) with the first grid index fastest
    arr = np.transpose(values, (3, 2, 1, 0)).reshape(-1, 3)
    return np.column_stack([arr.real[:, 0], arr.imag[:, 0],
                            arr.real[:, 1], arr.imag[:, 1],
                            arr.real[:, 2], arr.imag[:, 2]])


def _from_rows(rows: np.ndarray, shape) -> np.ndarray:
    vec = rows[:, 0::2] + 1j * rows[:, 1::2]
    arr = vec.reshape(shape[3], shape[2], shape[1], 3)
    return np.ascontiguousarray(np.transpose(arr, (3, 2, 1, 0)))


def save_field(path, field: ComplexVectorField) -> None:
    rows = _to_rows(field.values)
    with open(path, "w") as f:
        f.write(_header(field.grid) + "\n")
        np.savetxt(f, rows, fmt="%.17g")


def load_field(path) -> ComplexVectorField:
    with open(path) as f:
        grid = _parse_header(f.readline())
        rows = np.loadtxt(f, ndmin=2)
    want = grid.node_count
    if rows.shape != (want, 6):
        raise ConstraintViolated(
            f"field file has {rows.shape} data entries, expected ({want}, 6)")
    values = _from_rows(rows, (3,) + tuple(grid.n))
    return ComplexVectorField(grid, values)


def save_trace(path, trace: TangentialTrace) -> None:
    blocks = []
    for i in range(6):
        _, _, b, c = face_axes(i)
        face = trace.faces[i]
        arr = np.transpose(face, (2, 1, 0)).reshape(-1, 3)
        rows = np.column_stack([
            np.full(arr.shape[0], i, dtype=float),
            arr.real[:, 0], arr.imag[:, 0],
            arr.real[:, 1], arr.imag[:, 1],
            arr.real[:, 2], arr.imag[:, 2]])
        blocks.append(rows)
    with open(path, "w") as f:
        f.write(_header(trace.grid) + "\n")
        np.savetxt(f, np.vstack(blocks), fmt=["%d"] + ["%.17g"] * 6)


def load_trace(path) -> TangentialTrace:
    with open(path) as f:
        grid = _parse_header(f.readline())
        rows = np.loadtxt(f, ndmin=2)
    if rows.shape[1] != 7:
        raise ConstraintViolated("trace file rows must be: face tag + six reals")
    faces = []
    for i in range(6):
        _, _, b, c = face_axes(i)
        sel = rows[rows[:, 0].astype(int) == i, 1:]
        nb, nc = grid.n[b], grid.n[c]
        if sel.shape[0] != nb * nc:
            raise ConstraintViolated(
                f"trace file face {i}: {sel.shape[0]} rows, expected {nb * nc}")
        vec = sel[:, 0::2] + 1j * sel[:, 1::2]
        face = np.ascontiguousarray(
            np.transpose(vec.reshape(nc, nb, 3), (2, 1, 0)))
        faces.append(face)
    return TangentialTrace(grid, tuple(faces))
