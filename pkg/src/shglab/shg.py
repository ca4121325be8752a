"""Nonlinear second-harmonic forward solver.

The coupled two-frequency system is

    curl E^w  = i w  mu_1 H^w          curl H^w  = -i w  eps_1 E^w  + J^w
    curl E^2w = i 2w mu_2 H^2w         curl H^2w = -i 2w eps_2 E^2w + J^2w

with quadratic polarization sources

    J^w  = i w  chi2 (conj(E^w) . E^2w)      (vector chi2 times scalar product)
    J^2w = i 2w chi2 (E^w . E^w)

and prescribed tangential traces of both electric fields.  For small
boundary data the solution is the fixed point of a contraction: write the
fields as (linear solve with the given trace) + (zero-trace correction) and
iterate the correction map.  This module implements the correction map, the
Picard iteration with contraction bookkeeping, and an independent residual
evaluator for solution quadruples.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolated, ContractionFailed, NoConvergence, SmallnessViolated
from .fields import ComplexVectorField
from .grids import BoxGrid
from .linear import solve_linear_bvp, solve_linear_sources
from .materials import MaterialModel
from .norms import field_norm_w1p, trace_norm_div
from .traces import TangentialTrace, tangential_trace


def _check_zero_trace(f: ComplexVectorField, name: str):
    tr = tangential_trace(f)
    if tr.max_abs() != 0.0:
        raise ConstraintViolated(f"{name} must have an exactly zero tangential trace")


@dataclass
class ShgState:
    """Zero-trace correction fields of the two-frequency iteration."""

    e_omega: ComplexVectorField
    h_omega: ComplexVectorField
    e_2omega: ComplexVectorField
    h_2omega: ComplexVectorField
    iterations: int = 0
    contraction_history: list = field(default_factory=list)

    def __post_init__(self):
        _check_zero_trace(self.e_omega, "e_omega")
        _check_zero_trace(self.e_2omega, "e_2omega")

    @classmethod
    def zero(cls, grid: BoxGrid) -> "ShgState":
        return cls(ComplexVectorField.zeros(grid), ComplexVectorField.zeros(grid),
                   ComplexVectorField.zeros(grid), ComplexVectorField.zeros(grid))

    def norm(self) -> float:
        return field_norm_w1p(self.e_omega) + field_norm_w1p(self.e_2omega)

    def diff_norm(self, other: "ShgState") -> float:
        grid = self.e_omega.grid
        d1 = ComplexVectorField(grid, self.e_omega.values - other.e_omega.values)
        d2 = ComplexVectorField(grid, self.e_2omega.values - other.e_2omega.values)
        return field_norm_w1p(d1) + field_norm_w1p(d2)


@dataclass
class ShgSolveOptions:
    """Smallness/iteration controls of the contraction solve."""

    epsilon_ball: float = 0.5
    delta_ball: float = 0.25
    tol: float = 1e-10
    max_iter: int = 50

    def __post_init__(self):
        if min(self.epsilon_ball, self.delta_ball, self.tol) <= 0 or self.max_iter <= 0:
            raise ConstraintViolated("all contraction options must be positive")
        if self.tol >= self.delta_ball:
            raise ConstraintViolated("tol must be smaller than delta_ball")


@dataclass
class ShgReport:
    iterations: int
    converged: bool
    increments: list
    contraction_factors: list
    residuals: tuple
    stability_constant: float


def shg_sources(material: MaterialModel, omega: complex,
                E_omega: ComplexVectorField, E_2omega: ComplexVectorField):
    """Assemble the two polarization source fields from total electric fields."""
    chi = material.chi2_array()
    dot_w = np.sum(np.conj(E_omega.values) * E_2omega.values, axis=0)
    dot_2w = np.sum(E_omega.values * E_omega.values, axis=0)
    J_w = ComplexVectorField(material.grid, 1j * omega * chi * dot_w[None])
    J_2w = ComplexVectorField(material.grid, 2j * omega * chi * dot_2w[None])
    return J_w, J_2w


def shg_operator_A(state: ShgState, base, material: MaterialModel,
                   omega: complex, tol: float = 1e-10) -> ShgState:
    """One application of the correction map.

    base: the linear solutions (E0^w, E0^2w) carrying the boundary data.
    Returns the zero-trace state whose fields solve the two source problems
    driven by the polarization of (base + state).
    """
    grid = material.grid
    E_w = ComplexVectorField(grid, base[0].values + state.e_omega.values)
    E_2w = ComplexVectorField(grid, base[1].values + state.e_2omega.values)
    J_w, J_2w = shg_sources(material, omega, E_w, E_2w)
    e_w, h_w, _ = solve_linear_sources(material, omega, J_w, harmonic=1, tol=tol)
    e_2w, h_2w, _ = solve_linear_sources(material, 2 * omega, J_2w, harmonic=2, tol=tol)
    return ShgState(e_w, h_w, e_2w, h_2w, iterations=state.iterations + 1,
                    contraction_history=list(state.contraction_history))


def solve_shg(material: MaterialModel, omega: complex,
              f_omega: TangentialTrace, f_2omega: TangentialTrace,
              opts: ShgSolveOptions | None = None):
    """Solve the coupled second-harmonic system by contraction iteration.

    Returns (E^w, H^w, E^2w, H^2w, report).  Raises SmallnessViolated when
    the input traces exceed the admissible ball, ContractionFailed when the
    measured contraction factor stays >= 1 or the iterates leave the ball,
    NoConvergence when max_iter is exhausted.
    """
    opts = opts or ShgSolveOptions()
    tn = trace_norm_div(f_omega) + trace_norm_div(f_2omega)
    if tn >= opts.epsilon_ball:
        raise SmallnessViolated(
            f"combined trace norm {tn:.3e} exceeds epsilon_ball {opts.epsilon_ball:.3e}")
    E0w, H0w, rep_w = solve_linear_bvp(material, omega, f_omega, harmonic=1)
    E02w, H02w, rep_2w = solve_linear_bvp(material, 2 * omega, f_2omega, harmonic=2)
    base = (E0w, E02w)
    grid = material.grid

    state = ShgState.zero(grid)
    incs: list = []
    rhos: list = []
    base_scale = max(1.0, field_norm_w1p(E0w) + field_norm_w1p(E02w))
    converged = False
    for _ in range(opts.max_iter):
        new = shg_operator_A(state, base, material, omega, tol=opts.tol)
        inc = new.diff_norm(state)
        if incs and incs[-1] > 0:
            rhos.append(inc / incs[-1])
        incs.append(inc)
        state = new
        state.contraction_history = list(rhos)
        if len(rhos) >= 3 and all(r >= 1.0 for r in rhos[-3:]):
            raise ContractionFailed(
                f"contraction factors {rhos[-3:]} stayed >= 1")
        if state.norm() > opts.delta_ball:
            raise ContractionFailed(
                f"iterate norm {state.norm():.3e} left the ball {opts.delta_ball:.3e}")
        if inc <= opts.tol * base_scale:
            converged = True
            break
    if not converged:
        raise NoConvergence(f"no fixed point within {opts.max_iter} iterations")

    def total(a: ComplexVectorField, b: ComplexVectorField) -> ComplexVectorField:
        pay = None
        if a.payload and b.payload and "stag" in a.payload and "stag" in b.payload:
            pay = dict(a.payload)
            pay["stag"] = [x + y for x, y in zip(a.payload["stag"], b.payload["stag"])]
        return ComplexVectorField(a.grid, a.values + b.values, payload=pay)

    Ew = total(E0w, state.e_omega)
    Hw = total(H0w, state.h_omega)
    E2w = total(E02w, state.e_2omega)
    H2w = total(H02w, state.h_2omega)
    res = shg_residual((Ew, Hw, E2w, H2w), material, omega)
    fields_norm = (field_norm_w1p(Ew) + field_norm_w1p(Hw)
                   + field_norm_w1p(E2w) + field_norm_w1p(H2w))
    report = ShgReport(iterations=state.iterations, converged=True,
                       increments=incs, contraction_factors=rhos,
                       residuals=res,
                       stability_constant=fields_norm / max(tn, 1e-300))
    return Ew, Hw, E2w, H2w, report


# ---------------------------------------------------------------------------
# independent residual evaluation
# ---------------------------------------------------------------------------

def _curl_node(values: np.ndarray, grid: BoxGrid) -> np.ndarray:
    d = lambda f, a: np.gradient(f, grid.h[a], axis=a)
    return np.stack([
        d(values[2], 1) - d(values[1], 2),
        d(values[0], 2) - d(values[2], 0),
        d(values[1], 0) - d(values[0], 1)])


def _stag_curl_e(E, h):
    """Forward-difference staggered curl, edge dofs -> face dofs."""
    dfw = lambda f, a: np.diff(f, axis=a) / h[a]
    return [dfw(E[2], 1) - dfw(E[1], 2),
            dfw(E[0], 2) - dfw(E[2], 0),
            dfw(E[1], 0) - dfw(E[0], 1)]


def _stag_curl_h_interior(H, h):
    """Backward-difference staggered curl, face dofs -> interior E dofs."""
    dbw = lambda f, a: np.diff(f, axis=a) / h[a]

    def dpad(f, a):
        g = dbw(f, a)
        shape = list(g.shape)
        shape[a] = 1
        z = np.zeros(shape, dtype=g.dtype)
        return np.concatenate([z, g, z], axis=a)

    return [dpad(H[2], 1) - dpad(H[1], 2),
            dpad(H[0], 2) - dpad(H[2], 0),
            dpad(H[1], 0) - dpad(H[0], 1)]


def _rel(num_arrs, den_arrs) -> float:
    num = np.sqrt(sum(float(np.sum(np.abs(x) ** 2)) for x in num_arrs))
    den = max(np.sqrt(max(float(np.sum(np.abs(x) ** 2)) for x in den_arrs)), 1e-300)
    return num / den


def _node_to_edge_mean(arr: np.ndarray, c: int) -> np.ndarray:
    sl0 = [slice(None)] * arr.ndim
    sl1 = [slice(None)] * arr.ndim
    ax = c + arr.ndim - 3
    sl0[ax] = slice(0, -1)
    sl1[ax] = slice(1, None)
    return 0.5 * (arr[tuple(sl0)] + arr[tuple(sl1)])


def shg_residual(quadruple, material: MaterialModel, omega: complex):
    """Residual norms of the four coupled curl equations.

    Returns (r_E^w, r_H^w, r_E^2w, r_H^2w): the plain ell^2 norms of the
    residuals of curl E - i k w mu H and curl H + i k w eps E - J^kw, each
    normalized by the largest term entering the equation.

    Fields produced by the solvers carry their staggered representation and
    are judged on it, against difference stencils coded here from scratch;
    plain node fields are judged with centered differences.  Either way the
    polarization sources are rebuilt from the node values, so this is an
    independent check of any solution quadruple.
    """
    Ew, Hw, E2w, H2w = quadruple
    grid = material.grid
    J_w, J_2w = shg_sources(material, omega, Ew, E2w)
    out = []
    staggered = all(f.payload and "stag" in f.payload for f in quadruple)
    for k, (E, H, J) in enumerate(((Ew, Hw, J_w), (E2w, H2w, J_2w)), start=1):
        w = k * omega
        eps = material.eps_at(k)
        mu = material.mu_at(k)
        epsA = np.asarray(eps, dtype=complex)
        muA = np.asarray(mu, dtype=complex)
        if staggered:
            Es, Hs = E.payload["stag"], H.payload["stag"]
            ce = _stag_curl_e(Es, grid.h)
            mu_h = [muA if muA.ndim == 0 else _avg_transverse(muA, c) for c in range(3)]
            r1 = [ce[c] - 1j * w * mu_h[c] * Hs[c] for c in range(3)]
            n1 = _rel(r1, [ce[c] for c in range(3)] + [1j * w * mu_h[c] * Hs[c] for c in range(3)])
            ch = _stag_curl_h_interior(Hs, grid.h)
            eps_e = [epsA if epsA.ndim == 0 else _node_to_edge_mean(epsA, c) for c in range(3)]
            J_e = [_node_to_edge_mean(J.values[c], c) for c in range(3)]
            r2, t2 = [], []
            for c in range(3):
                full = ch[c] + 1j * w * eps_e[c] * Es[c] - J_e[c]
                m = _interior_mask(Es[c].shape, c)
                r2.append(full[m])
                t2.extend([ch[c][m], (1j * w * eps_e[c] * Es[c])[m], J_e[c][m]])
            n2 = _rel(r2, t2)
        else:
            ce = _curl_node(E.values, grid)
            r1 = ce - 1j * w * muA * H.values
            n1 = _rel([r1], [ce, 1j * w * muA * H.values])
            ch = _curl_node(H.values, grid)
            r2 = ch + 1j * w * epsA * E.values - J.values
            n2 = _rel([r2], [ch, 1j * w * epsA * E.values, J.values])
        out.extend([n1, n2])
    return tuple(out)


def _avg_transverse(arr: np.ndarray, c: int) -> np.ndarray:
    out = arr
    for a in range(3):
        if a != c:
            out = _node_to_edge_mean(out, a)
    return out


def _interior_mask(shape, c):
    m = np.ones(shape, dtype=bool)
    for a in range(3):
        if a != c:
            sl = [slice(None)] * 3
            sl[a] = 0
            m[tuple(sl)] = False
            sl[a] = -1
            m[tuple(sl)] = False
    return m
