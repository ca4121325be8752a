"""Linear time-harmonic Maxwell solves on the box cavity.

The electric field satisfies the eliminated second-order system

    curl(mu^-1 curl E) - w^2 eps E = i w J_e + curl(mu^-1 J_m)

with prescribed tangential trace, and H = (i w mu)^-1 (curl E - J_m).
Constant-coefficient problems are solved directly by the separable
staggered engine; spatially varying eps/mu use BiCGStab preconditioned
with the constant-coefficient direct solve at the mean coefficients.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import _engine as eng
from .errors import DegenerateFrequency, ResonantFrequency
from .fields import ComplexVectorField
from .grids import BoxGrid
from .materials import MaterialModel
from .traces import TangentialTrace

_CAVITY_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()
_CACHE_MAX = 24


def get_cavity(grid: BoxGrid, phi, k2: complex) -> eng.GaugedCavity:
    """Shared, factorization-cached cavity for (grid, gauge, k2)."""
    phi = tuple(complex(p) for p in phi)
    key = (tuple(grid.n), tuple(float(x) for x in grid.origin),
           tuple(float(x) for x in grid.extent), phi, complex(k2))
    with _CACHE_LOCK:
        cav = _CAVITY_CACHE.get(key)
        if cav is None:
            cav = eng.GaugedCavity(grid, phi, k2)
            cav.prepare()
            if len(_CAVITY_CACHE) >= _CACHE_MAX:
                _CAVITY_CACHE.pop(next(iter(_CAVITY_CACHE)))
            _CAVITY_CACHE[key] = cav
    return cav


@dataclass
class LinearSolveReport:
    """Health record of one linear solve."""

    iterations: int
    relative_residual: float
    condition_estimate: float
    resonant: bool


def _mean_scalar(v) -> complex:
    return complex(np.mean(v)) if isinstance(v, np.ndarray) else complex(v)


class _Coeffs:
    """Per-harmonic coefficients staged onto the staggered lattice.

    The solved system is normalized by the mean permeability:

        curl(invmu_rel curl E) - k2 eps_rel E = mubar * (i w J_e + ...)

    with k2 = w^2 ebar mubar, eps_rel = eps/ebar, invmu_rel = mubar/mu.
    """

    def __init__(self, material: MaterialModel, w: complex, harmonic: int):
        if w == 0:
            raise DegenerateFrequency("zero frequency")
        self.w = complex(w)
        eps, mu = material.eps_at(harmonic), material.mu_at(harmonic)
        self.ebar, self.mubar = _mean_scalar(eps), _mean_scalar(mu)
        self.k2 = self.w ** 2 * self.ebar * self.mubar
        self.uniform = not (isinstance(eps, np.ndarray) or isinstance(mu, np.ndarray))
        self.eps_e = self.invmu_h = self.mu_h = None
        if not self.uniform:
            eps_rel = np.broadcast_to(np.asarray(eps / self.ebar, dtype=complex),
                                      tuple(material.grid.n))
            mu_arr = np.broadcast_to(np.asarray(mu, dtype=complex),
                                     tuple(material.grid.n))
            self.eps_e = [eng.node_to_edge(eps_rel, c) for c in range(3)]
            self.invmu_h = [_avg_to_face(self.mubar / mu_arr, c) for c in range(3)]
            self.mu_h = [_avg_to_face(mu_arr, c) for c in range(3)]


def _avg_to_face(arr: np.ndarray, c: int) -> np.ndarray:
    out = arr
    for a in range(3):
        if a != c:
            out = eng.node_to_edge(out, a)
    return out


def _stage_rhs(cav, co: _Coeffs, J_e=None, J_m=None):
    """Right-hand side arrays on E dofs plus the J_m face arrays (staggered)."""
    B = cav.zeros_e()
    Jm_faces = None
    if J_e is not None:
        Je_edges = eng.field_to_edges(J_e.values)
        for c in range(3):
            B[c] += 1j * co.w * co.mubar * Je_edges[c]
    if J_m is not None:
        Jm_faces = [_avg_to_face(J_m.values[c], c) for c in range(3)]
        scaled = Jm_faces if co.uniform else \
            [co.invmu_h[c] * Jm_faces[c] for c in range(3)]
        CJ = cav.curl_H(scaled)
        for c in range(3):
            B[c] += CJ[c]
    return B, Jm_faces


def _recover_h(cav, co: _Coeffs, E, Jm_faces=None):
    curl = cav.curl_E(E)
    H = []
    for c in range(3):
        num = curl[c] - (0 if Jm_faces is None else Jm_faces[c])
        mu = co.mubar if co.uniform else co.mu_h[c]
        H.append(num / (1j * co.w * mu))
    return H


def _gap_report(cav):
    if not hasattr(cav, "_gap"):
        cav._gap = cav.spectrum_gap()
    lo, hi = cav._gap
    if lo < 1e-12 * hi:
        raise ResonantFrequency(
            f"cavity operator is numerically singular (gap {lo:.2e} vs {hi:.2e})")
    return hi / lo, lo < 1e-8 * hi


def solve_staggered(material: MaterialModel, w: complex, harmonic: int = 1,
                    trace: TangentialTrace | None = None,
                    J_e: ComplexVectorField | None = None,
                    J_m: ComplexVectorField | None = None,
                    tol: float = 1e-10):
    """Internal driver: solve one harmonic channel, returning staggered data.

    Returns (cav, co, E_staggered, H_staggered, report).
    """
    co = _Coeffs(material, w, harmonic)
    cav = get_cavity(material.grid, (0.0, 0.0, 0.0), co.k2)
    cond, res_flag = _gap_report(cav)
    B, Jm_faces = _stage_rhs(cav, co, J_e, J_m)
    Ebc = cav.zeros_e() if trace is None else eng.trace_to_pinned(cav, trace)
    if co.uniform:
        E = cav.solve_bvp(B, Ebc)
        iters = 1
    else:
        CC = cav.curl_H([co.invmu_h[c] * x for c, x in enumerate(cav.curl_E(Ebc))])
        Beff = [B[c] - np.where(cav.pinmask(c), 0.0, CC[c]) for c in range(3)]
        E0, iters = cav.solve_rhs_var(Beff, co.eps_e, co.invmu_h, tol=tol)
        E = [E0[c] + Ebc[c] for c in range(3)]
    resid = cav.residual(E, B, eps_e=co.eps_e, invmu_h=co.invmu_h)
    H = _recover_h(cav, co, E, Jm_faces)
    report = LinearSolveReport(iterations=iters, relative_residual=float(resid),
                               condition_estimate=float(cond), resonant=res_flag)
    return cav, co, E, H, report


def _to_fields(grid, E, H):
    """Interpolate staggered solves to node fields, keeping the native
    staggered dof arrays in the payload (used by residual oracles and by
    the exact boundary pairing)."""
    Ef = ComplexVectorField(grid, eng.edges_to_field(E),
                            payload={"stag": [e.copy() for e in E], "role": "E"})
    Hf = ComplexVectorField(grid, eng.faces_to_field(H),
                            payload={"stag": [h.copy() for h in H], "role": "H"})
    return Ef, Hf


def solve_linear_bvp(material: MaterialModel, k_omega: complex,
                     f: TangentialTrace, harmonic: int = 1,
                     tol: float = 1e-10):
    """Solve the source-free system with prescribed tangential trace t(E) = f.

    k_omega is the (possibly complex) angular frequency of this harmonic
    channel.  Returns (E, H, report) as node-collocated fields.
    """
    cav, co, E, H, report = solve_staggered(
        material, k_omega, harmonic, trace=f, tol=tol)
    Ef, Hf = _to_fields(material.grid, E, H)
    return Ef, Hf, report


def solve_linear_sources(material: MaterialModel, k_omega: complex,
                         J_e: ComplexVectorField | None,
                         J_m: ComplexVectorField | None = None,
                         harmonic: int = 1, tol: float = 1e-10):
    """Solve with volume sources and homogeneous trace t(E) = 0."""
    cav, co, E, H, report = solve_staggered(
        material, k_omega, harmonic, J_e=J_e, J_m=J_m, tol=tol)
    Ef, Hf = _to_fields(material.grid, E, H)
    return Ef, Hf, report


def detect_resonance(material: MaterialModel, omega: float,
                     threshold: float = 1e-8, harmonic: int = 1,
                     power_iters: int = 14):
    """Estimate proximity of w^2 eps mu to an interior cavity eigenvalue.

    Runs inverse power iteration on A^H A for the zero-trace operator
    A = curl curl - k2 (complex symmetric, so A^-H = conj . A^-1 . conj),
    giving sigma_min, and a forward power iteration for a norm estimate.
    Returns (flag, condition_estimate); flag is True when
    sigma_min < threshold * norm_estimate.
    """
    co = _Coeffs(material, omega, harmonic)
    cav = get_cavity(material.grid, (0.0, 0.0, 0.0), co.k2)
    pin = [cav.pinmask(c) for c in range(3)]
    rng = np.random.default_rng(7)

    def mask(E):
        return [np.where(pin[c], 0.0, E[c]) for c in range(3)]

    def rand_e():
        return mask([rng.standard_normal(cav.eshape[c])
                     + 1j * rng.standard_normal(cav.eshape[c]) for c in range(3)])

    def norm(E):
        return np.sqrt(sum(np.vdot(e, e).real for e in E))

    def apply_a(E):
        return mask(cav.apply_cc(E, eps_e=co.eps_e, invmu_h=co.invmu_h))

    def inv_a(E):
        if co.uniform:
            return mask(cav.solve_rhs(E))
        out, _ = cav.solve_rhs_var(E, co.eps_e, co.invmu_h, tol=1e-9)
        return mask(out)

    # forward power iteration: ||A||_2 estimate
    v = rand_e()
    nrm = 1.0
    for _ in range(power_iters):
        v = apply_a(v)
        nrm = norm(v)
        v = [x / nrm for x in v]
    # inverse power iteration on A^H A
    v = rand_e()
    v = [x / norm(v) for x in v]
    sig = np.inf
    for _ in range(power_iters):
        u = inv_a([np.conj(x) for x in inv_a([np.conj(x) for x in v])])
        nu = norm(u)
        sig = 1.0 / np.sqrt(nu)
        v = [x / nu for x in u]
    flag = bool(sig < threshold * nrm)
    cond = float(nrm / sig)
    return flag, cond
