"""Exponentially weighted probing fields (complex geometrical optics).

A probe is a Maxwell solution of the form

    E = e^{zeta.x} eps0^{1/2} eps^{-1/2} (A + R),
    H = e^{zeta.x} mu0^{1/2} mu^{-1/2} (B + Q),

where ``zeta`` is a complex 3-vector with ``zeta.zeta = kappa^2`` and the
remainders (R, Q) decay as the asymptotic parameter tau = |Im part| grows.
Four such probes -- a pump/second-harmonic pair and a "tilde" pair living in
the conjugated medium -- are bundled into a :class:`CgoDirectionSet` whose
phases sum to a prescribed spatial frequency xi.  That sum rule is what turns
boundary pairings of probe data into Fourier samples of the quadratic
susceptibility.

Conventions.  The governing curl system here is

    curl E = i w mu H,    curl H = -i w eps E,

and an exponential e^{zeta.x} solves it only when zeta.zeta = -w^2 eps0 mu0.
With the direction sets normalised to zeta.zeta = kappa^2 > 0 this pins the
channel frequencies to w = -i k kappa / sqrt(eps0 mu0) for harmonic k, purely
imaginary.  All amplitude relations are stated with the shorthand
omega = kappa / sqrt(eps0 mu0), e.g. B = (k omega mu0)^{-1} zeta x A, which is
exactly the magnetic partner of A at the channel frequency above.  Direction
sets assume unit background constants (eps0 = mu0 = 1).

The remainders solve a rescaled Lippmann--Schwinger equation

    M(e, h) = M0 (A, B) + G_zeta [ M (V - q) (e, h) ],

iterated as a Neumann series on a padded super-cell, where G_zeta is the
scalar kernel of ``faddeev_kernel`` applied componentwise, M = diag(sqrt(eps),
sqrt(mu)) and (V, q) are multiplication potentials assembled from the
coefficient profiles by centered differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dfield, replace

import numpy as np

from .errors import (
    BranchError,
    ConstraintViolated,
    DegenerateFrequency,
    InvalidTau,
    InvalidXi,
    NeumannDiverged,
)
from .fields import ComplexVectorField
from .grids import BoxGrid
from .materials import MaterialModel
from .faddeev import faddeev_kernel
from .norms import lp_volume

VARIANTS = ("V1", "V2", "V3")

#: channel tag -> (zeta attr, A attr, B attr, harmonic, conjugated medium)
CHANNELS = {
    "omega": ("zeta1_omega", "A1_omega", "B1_omega", 1, False),
    "2omega": ("zeta1_2omega", "A1_2omega", "B1_2omega", 2, False),
    "tilde_omega": ("zetaT_omega", "AT_omega", "BT_omega", 1, True),
    "tilde_2omega": ("zetaT_2omega", "AT_2omega", "BT_2omega", 2, True),
}


def _cvec(v) -> np.ndarray:
    return np.asarray(v, dtype=np.complex128).reshape(3)


def lattice_symbol(zeta, h: float | None):
    """Per-axis symbol of e^{zeta.x} under the staggered half-step stencil.

    For ``h`` None the continuum limit (zeta itself) is returned; otherwise
    nu_a = (2/h) sinh(zeta_a h/2), the factor a one-cell centered difference
    pulls out of the exponential.
    """
    z = _cvec(zeta)
    if h is None:
        return z
    return (2.0 / h) * np.sinh(z * (h / 2.0))


@dataclass
class CgoDirectionSet:
    """Phases and amplitudes for one four-channel probing experiment.

    ``rotation`` holds the frame rows actually used in the component
    formulas; for variant V3 the second and third rows are the swapped pair.
    ``lattice_h`` marks a set whose phases have been matched to the discrete
    dispersion relation of a grid with that spacing (see
    :func:`match_to_lattice`); validation then measures the quadratic
    constraints through :func:`lattice_symbol` instead of the raw vectors.
    """

    xi: np.ndarray
    tau: float
    kappa: float
    variant: str
    rotation: np.ndarray
    zeta1_omega: np.ndarray
    zeta1_2omega: np.ndarray
    zetaT_omega: np.ndarray
    zetaT_2omega: np.ndarray
    A1_omega: np.ndarray
    A1_2omega: np.ndarray
    AT_omega: np.ndarray
    AT_2omega: np.ndarray
    B1_omega: np.ndarray
    B1_2omega: np.ndarray
    BT_omega: np.ndarray
    BT_2omega: np.ndarray
    lattice_h: float | None = None

    def channel(self, which: str):
        """(zeta, A, B, harmonic, conjugated-medium flag) for a channel tag."""
        try:
            zn, an, bn, k, cm = CHANNELS[which]
        except KeyError:
            raise ConstraintViolated(
                f"unknown channel {which!r}; expected one of {sorted(CHANNELS)}")
        return (getattr(self, zn), getattr(self, an), getattr(self, bn), k, cm)

    # -- consistency ----------------------------------------------------

    def validate(self, rtol: float = 1e-10, atol_linear: float = 1e-12):
        """Check the five defining constraints, raising ConstraintViolated."""
        kap = float(self.kappa)
        if not self.tau > kap:
            raise ConstraintViolated("tau must exceed kappa")
        quads = [("zeta1_omega", 1, "A1_omega"),
                 ("zeta1_2omega", 2, "A1_2omega"),
                 ("zetaT_omega", 1, "AT_omega"),
                 ("zetaT_2omega", 2, "AT_2omega")]
        for name, k, aname in quads:
            if (self.lattice_h is not None
                    and not np.any(getattr(self, aname))):
                # a zero-amplitude channel contributes no field; its phase is
                # slaved to the sum rules and need not sit on the discrete
                # dispersion variety
                continue
            z = getattr(self, name)
            nu = lattice_symbol(z, self.lattice_h)
            want = (k * kap) ** 2
            scale = max(1.0, float(np.sum(np.abs(nu) ** 2)))
            if abs(np.sum(nu * nu) - want) > rtol * scale:
                raise ConstraintViolated(
                    f"{name}: quadratic constraint off by "
                    f"{abs(np.sum(nu * nu) - want):.3e} (scale {scale:.3e})")
        scale = max(1.0, float(self.tau))
        r1 = (np.conj(self.zeta1_omega) + self.zeta1_2omega
              + np.conj(self.zetaT_omega) + 1j * self.xi)
        if np.max(np.abs(r1)) > atol_linear * scale:
            raise ConstraintViolated("phase sum rule != -i xi")
        r2 = 2.0 * self.zeta1_omega + np.conj(self.zetaT_2omega)
        if np.max(np.abs(r2)) > atol_linear * scale:
            raise ConstraintViolated("second-harmonic tilde phase sum rule")
        pairs = [("zeta1_omega", "A1_omega", "B1_omega", 1),
                 ("zeta1_2omega", "A1_2omega", "B1_2omega", 2),
                 ("zetaT_omega", "AT_omega", "BT_omega", 1),
                 ("zetaT_2omega", "AT_2omega", "BT_2omega", 2)]
        for zn, an, bn, k in pairs:
            z, a, b = getattr(self, zn), getattr(self, an), getattr(self, bn)
            nu = lattice_symbol(z, self.lattice_h)
            na, nz = np.linalg.norm(a), np.linalg.norm(nu)
            if abs(np.dot(nu, a)) > atol_linear * max(1.0, na * nz):
                raise ConstraintViolated(f"{zn}.{an} != 0")
            bexp = np.cross(nu, a) / (k * kap)
            if np.max(np.abs(bexp - b)) > atol_linear * max(1.0, nz * na / kap):
                raise ConstraintViolated(f"{bn} is not the partner of {an}")
            back = np.cross(nu, b) + (k * kap) * a
            if np.max(np.abs(back)) > 1e-9 * max(1.0, nz * np.linalg.norm(b)):
                raise ConstraintViolated(f"{zn} x {bn} != -k omega {an}")
        return self

    # -- serialization --------------------------------------------------

    def to_json(self) -> str:
        def enc(v):
            v = np.asarray(v)
            return {"re": np.real(v).tolist(), "im": np.imag(v).tolist()}
        doc = {"variant": self.variant,
               "xi": np.asarray(self.xi, dtype=float).tolist(),
               "tau": float(self.tau), "kappa": float(self.kappa),
               "lattice_h": self.lattice_h,
               "rotation": np.asarray(self.rotation, dtype=float).tolist()}
        for name in ("zeta1_omega", "zeta1_2omega", "zetaT_omega",
                     "zetaT_2omega", "A1_omega", "A1_2omega", "AT_omega",
                     "AT_2omega", "B1_omega", "B1_2omega", "BT_omega",
                     "BT_2omega"):
            doc[name] = enc(getattr(self, name))
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CgoDirectionSet":
        doc = json.loads(text)

        def dec(d):
            return np.asarray(d["re"], dtype=float) + 1j * np.asarray(
                d["im"], dtype=float)
        kw = {"variant": doc["variant"],
              "xi": np.asarray(doc["xi"], dtype=float),
              "tau": float(doc["tau"]), "kappa": float(doc["kappa"]),
              "lattice_h": doc.get("lattice_h"),
              "rotation": np.asarray(doc["rotation"], dtype=float)}
        for name in ("zeta1_omega", "zeta1_2omega", "zetaT_omega",
                     "zetaT_2omega", "A1_omega", "A1_2omega", "AT_omega",
                     "AT_2omega", "B1_omega", "B1_2omega", "BT_omega",
                     "BT_2omega"):
            kw[name] = dec(doc[name])
        return cls(**kw)


def _frame_from_xi(xi: np.ndarray):
    """Orthonormal (e1, e2, e3) with e1 = xi/|xi|, e2 from the least-aligned axis."""
    nrm = np.linalg.norm(xi)
    e1 = xi / nrm
    k = int(np.argmin(np.abs(e1)))
    ax = np.zeros(3)
    ax[k] = 1.0
    e2 = ax - np.dot(ax, e1) * e1
    e2 = e2 / np.linalg.norm(e2)
    e3 = np.cross(e1, e2)
    return e1, e2, e3


def build_cgo_directions(xi, tau: float, kappa: float,
                         variant: str = "V1") -> CgoDirectionSet:
    """Construct a validated four-channel direction set for frequency xi.

    With x1 = |xi|, S = sqrt(x1^2/4 + tau^2), T = sqrt(tau^2 - kappa^2), the
    phases in the adapted frame are

        zeta1^w  =  i(x1/2) e1 -  S e2 +  iT e3,
        zeta1^2w = -i x1    e1 + 2S e2 + 2iT e3,
        zetaT^w  = -i(x1/2) e1 -  S e2 +  iT e3,
        zetaT^2w =  i x1    e1 + 2S e2 + 2iT e3,

    so that conj(zeta1^w) + zeta1^2w + conj(zetaT^w) = -i xi and
    2 zeta1^w + conj(zetaT^2w) = 0.  Variant V3 swaps the roles of e2 and e3
    in all of the above; V1/V2 differ in the choice of the tilde amplitude.
    The second-harmonic tilde amplitude is identically zero.
    """
    xi = np.asarray(xi, dtype=float).reshape(3)
    x1 = float(np.linalg.norm(xi))
    if x1 == 0.0:
        raise InvalidXi("xi must be nonzero")
    tau = float(tau)
    kappa = float(kappa)
    if kappa <= 0.0:
        raise DegenerateFrequency("probing frequency kappa must be positive")
    if tau <= kappa:
        raise InvalidTau(f"tau = {tau} must exceed kappa = {kappa}")
    if tau <= x1:
        raise InvalidTau(f"tau = {tau} must exceed |xi| = {x1}")
    if variant not in VARIANTS:
        raise ConstraintViolated(f"variant must be one of {VARIANTS}")

    e1, e2, e3 = _frame_from_xi(xi)
    f2, f3 = (e3, e2) if variant == "V3" else (e2, e3)
    S = np.sqrt(x1 * x1 / 4.0 + tau * tau)
    T = np.sqrt(tau * tau - kappa * kappa)

    z1w = 1j * (x1 / 2.0) * e1 - S * f2 + 1j * T * f3
    z12 = -1j * x1 * e1 + 2.0 * S * f2 + 2j * T * f3
    zt1 = -1j * (x1 / 2.0) * e1 - S * f2 + 1j * T * f3
    zt2 = 1j * x1 * e1 + 2.0 * S * f2 + 2j * T * f3

    a1w = e1 + 1j * ((x1 / 2.0 + T) / S) * f2 + f3
    a12 = e1 + f2 + ((1j * x1 / 2.0 - S) / (1j * T)) * f3
    if variant == "V2":
        atw = e1 + f2 + ((1j * x1 / 2.0 + S) / (1j * T)) * f3
    else:
        atw = f2 + (S / (1j * T)) * f3
    at2 = np.zeros(3, dtype=complex)

    ds = CgoDirectionSet(
        xi=xi, tau=tau, kappa=kappa, variant=variant,
        rotation=np.stack([e1, f2, f3]),
        zeta1_omega=z1w, zeta1_2omega=z12,
        zetaT_omega=zt1, zetaT_2omega=zt2,
        A1_omega=_cvec(a1w), A1_2omega=_cvec(a12),
        AT_omega=_cvec(atw), AT_2omega=at2,
        B1_omega=np.cross(z1w, a1w) / kappa,
        B1_2omega=np.cross(z12, a12) / (2.0 * kappa),
        BT_omega=np.cross(zt1, atw) / kappa,
        BT_2omega=at2.copy())
    return ds.validate()


# ---------------------------------------------------------------------------
# multiplication potentials


def _d1(arr, axis, h, periodic):
    if periodic:
        return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2.0 * h)
    return np.gradient(arr, h, axis=axis, edge_order=2)


def _d2(arr, axis, h, periodic):
    if periodic:
        return (np.roll(arr, -1, axis=axis) + np.roll(arr, 1, axis=axis)
                - 2.0 * arr) / (h * h)
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (1, 1)
    p = np.pad(arr, pad, mode="edge")
    sl = [slice(None)] * arr.ndim
    lo, hi = list(sl), list(sl)
    lo[axis] = slice(0, -2)
    hi[axis] = slice(2, None)
    return (p[tuple(hi)] + p[tuple(lo)] - 2.0 * arr) / (h * h)


@dataclass
class PotentialFields:
    """Multiplication potentials of the rescaled second-order system.

    The 6x6 block potential V acts on an envelope pair (e, h) as

        V_E(e, h) = scalar * e + Hess(log eps) e + (i w / eps) grad(eps mu) x h,
        V_H(e, h) = scalar * h + Hess(log mu)  h - (i w / mu ) grad(eps mu) x e,

    with scalar = w^2 (eps mu - eps0 mu0), and q is the diagonal pair
    (Lap sqrt(eps)/sqrt(eps), Lap sqrt(mu)/sqrt(mu)).  M = diag(sqrt(eps),
    sqrt(mu)) and M0 its background value.  Hessian entries may be stored as
    None when they vanish identically (uniform coefficients).
    """

    omega: complex
    scalar: np.ndarray
    hess_log_eps: np.ndarray | None
    hess_log_mu: np.ndarray | None
    grad_em: np.ndarray
    cross_e: np.ndarray
    cross_h: np.ndarray
    q_e: np.ndarray
    q_h: np.ndarray
    m_eps: np.ndarray
    m_mu: np.ndarray
    m0: tuple[float, float]
    grid: BoxGrid | None = None

    def is_vacuum(self, tol: float = 0.0) -> bool:
        parts = [self.scalar, self.grad_em, self.q_e, self.q_h]
        if self.hess_log_eps is not None:
            parts.append(self.hess_log_eps)
        if self.hess_log_mu is not None:
            parts.append(self.hess_log_mu)
        return all(np.max(np.abs(p)) <= tol for p in parts)

    def apply_vmq(self, e: np.ndarray, h: np.ndarray):
        """(V - q)(e, h) on envelope arrays of shape (3,) + lattice."""
        ve = (self.scalar - self.q_e) * e
        vh = (self.scalar - self.q_h) * h
        if self.hess_log_eps is not None:
            ve = ve + np.einsum("ab...,b...->a...", self.hess_log_eps, e)
        if self.hess_log_mu is not None:
            vh = vh + np.einsum("ab...,b...->a...", self.hess_log_mu, h)
        ve = ve + self.cross_e * np.cross(self.grad_em, h, axis=0)
        vh = vh + self.cross_h * np.cross(self.grad_em, e, axis=0)
        return ve, vh


def _assemble_potentials(eps, mu, eps0, mu0, omega, h, periodic, grid=None):
    eps = np.asarray(eps, dtype=np.complex128)
    mu = np.asarray(mu, dtype=np.complex128)
    if np.any(np.real(eps) <= 0) or np.any(np.real(mu) <= 0):
        raise BranchError("eps and mu must have positive real part")
    em = eps * mu
    scalar = omega * omega * (em - eps0 * mu0)
    uniform_e, uniform_m = eps.ndim == 0, mu.ndim == 0

    def hess_and_q(coeff, uniform):
        if uniform:
            return None, np.zeros(())
        logc = np.log(coeff)
        hess = np.empty((3, 3) + coeff.shape, dtype=np.complex128)
        grads = [_d1(logc, a, h, periodic) for a in range(3)]
        for a in range(3):
            hess[a, a] = _d2(logc, a, h, periodic)
            for b in range(a + 1, 3):
                hess[a, b] = _d1(grads[a], b, h, periodic)
                hess[b, a] = hess[a, b]
        root = np.sqrt(coeff)
        lap = sum(_d2(root, a, h, periodic) for a in range(3))
        return hess, lap / root

    hess_e, q_e = hess_and_q(eps, uniform_e)
    hess_m, q_h = hess_and_q(mu, uniform_m)
    if em.ndim == 0:
        grad_em = np.zeros((3, 1, 1, 1), dtype=np.complex128)
    else:
        grad_em = np.stack([_d1(em, a, h, periodic) for a in range(3)])
    return PotentialFields(
        omega=complex(omega), scalar=scalar,
        hess_log_eps=hess_e, hess_log_mu=hess_m, grad_em=grad_em,
        cross_e=1j * omega / eps, cross_h=-1j * omega / mu,
        q_e=q_e, q_h=q_h, m_eps=np.sqrt(eps), m_mu=np.sqrt(mu),
        m0=(float(np.sqrt(eps0)), float(np.sqrt(mu0))), grid=grid)


def potential_matrices(material: MaterialModel, omega,
                       harmonic: int = 1) -> PotentialFields:
    """Assemble (V, q, M) on the material's own grid, centered differences.

    ``omega`` is the frequency entering the governing curl system; it may be
    complex (the probing regimes of this module run at purely imaginary
    frequency).  Coefficients are taken for the given harmonic.
    """
    grid = material.grid
    hs = grid.h
    if not np.allclose(hs, hs[0]):
        raise ConstraintViolated("potential assembly expects a cubic lattice")
    eps = material.eps_at(harmonic)
    mu = material.mu_at(harmonic)
    return _assemble_potentials(eps, mu, material.eps0, material.mu0,
                                omega, hs[0], periodic=False, grid=grid)


# ---------------------------------------------------------------------------
# remainder solves on the padded super-cell


def _c3_step(t):
    """Monotone C^3 ramp: 0 at t<=0, 1 at t>=1, three flat derivatives."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t ** 3)


def _aligned_supercell(grid: BoxGrid):
    """Factor-2 padded cell whose lattice contains the base nodes.

    Returns (supercell BoxGrid, node offsets of the base block).  The base
    grid must share one spacing h; the pad is (n-1)//2 whole cells per axis
    on the low side, so for odd n this is the centered doubled cell and for
    even n it sits half a cell off center.
    """
    offs = tuple((n - 1) // 2 for n in grid.n)
    origin = tuple(grid.origin[a] - offs[a] * grid.h[a] for a in range(3))
    extent = tuple(2.0 * e for e in grid.extent)
    nn = tuple(2 * (n - 1) + 1 for n in grid.n)
    return BoxGrid(origin=origin, extent=extent, n=nn), offs


def _extend_to_supercell(vals, grid: BoxGrid, sc: BoxGrid, offs, background):
    """Blend a base-grid coefficient into the pad, C^3 and background-valued.

    Inside the base block the values are kept exactly; outside, the deviation
    from the background continues from the nearest block node and is tapered
    to zero by a smooth per-axis window well before the periodic seam.
    """
    vals = np.asarray(vals, dtype=np.complex128)
    if vals.ndim == 0:
        return vals
    shape = tuple(n - 1 for n in sc.n)
    idx, wts = [], []
    for a in range(3):
        t = np.arange(shape[a]) - offs[a]
        idx.append(np.clip(t, 0, grid.n[a] - 1))
        dist = np.maximum(0, np.maximum(-t, t - (grid.n[a] - 1)))
        taper = max(2, offs[a] - 2)
        wts.append(_c3_step(1.0 - dist / taper))
    dev = vals - background
    ext = dev[np.ix_(idx[0], idx[1], idx[2])]
    ext = ext * (wts[0][:, None, None] * wts[1][None, :, None]
                 * wts[2][None, None, :])
    return background + ext


@dataclass(frozen=True)
class CgoSolveOptions:
    """Knobs for the remainder iteration."""
    tol: float = 1e-10
    max_iter: int = 60
    p: float = 4.0


@dataclass
class CgoReport:
    """Outcome of one remainder solve."""
    channel: str
    harmonic: int
    conj_medium: bool
    p: float
    iterations: int
    converged: bool
    ratio: float
    r_lp: float
    q_lp: float
    amp_scale: float
    updates: tuple


def solve_cgo_remainder(material: MaterialModel, dirset: CgoDirectionSet,
                        which: str, opts: CgoSolveOptions | None = None):
    """Neumann-iterate the rescaled remainder equation for one channel.

    Returns (R, Q, report) with R = eps0^{-1/2} eps^{1/2} e - A and
    Q = mu0^{-1/2} mu^{1/2} h - B restricted to the material's grid, where
    (e, h) is the envelope fixed point on the padded super-cell.  Norms in
    the report are L^p over the base cell.  Raises NeumannDiverged when the
    measured update ratio reaches one (the phases are not asymptotic enough
    for this material) or the iteration budget runs out.
    """
    opts = opts or CgoSolveOptions()
    if not 3.0 < opts.p < 6.0:
        raise ConstraintViolated("remainder norm exponent p must be in (3, 6)")
    if material.eps0 != 1.0 or material.mu0 != 1.0:
        raise ConstraintViolated(
            "direction sets carry unit-background conventions")
    zeta, A, B, k, conj_med = dirset.channel(which)
    grid = material.grid
    hs = grid.h
    if not np.allclose(hs, hs[0]):
        raise ConstraintViolated("remainder solves expect a cubic lattice")
    h = hs[0]

    amp_scale = float(np.sqrt(np.sum(np.abs(A) ** 2) + np.sum(np.abs(B) ** 2)))
    empty_report = lambda: CgoReport(
        channel=which, harmonic=k, conj_medium=conj_med, p=opts.p,
        iterations=0, converged=True, ratio=0.0, r_lp=0.0, q_lp=0.0,
        amp_scale=amp_scale, updates=())
    zeros = np.zeros((3,) + grid.shape(), dtype=np.complex128)
    if amp_scale == 0.0:
        return (ComplexVectorField(grid, zeros),
                ComplexVectorField(grid, zeros.copy()), empty_report())

    sc, offs = _aligned_supercell(grid)
    eps = np.asarray(material.eps_at(k), dtype=np.complex128)
    mu = np.asarray(material.mu_at(k), dtype=np.complex128)
    if conj_med:
        eps, mu = np.conj(eps), np.conj(mu)
    eps_x = _extend_to_supercell(eps, grid, sc, offs, material.eps0)
    mu_x = _extend_to_supercell(mu, grid, sc, offs, material.mu0)
    w = -1j * k * dirset.kappa
    pots = _assemble_potentials(eps_x, mu_x, material.eps0, material.mu0,
                                w, h, periodic=True, grid=sc)

    shape = tuple(n - 1 for n in sc.n)
    u0e = (pots.m0[0] * _cvec(A))[:, None, None, None]
    u0h = (pots.m0[1] * _cvec(B))[:, None, None, None]
    uE = np.broadcast_to(u0e, (3,) + shape).copy()
    uH = np.broadcast_to(u0h, (3,) + shape).copy()

    kernel = faddeev_kernel(zeta, sc, kappa2=(k * dirset.kappa) ** 2)
    updates, ratios = [], []
    converged = pots.is_vacuum()
    iterations = 0
    if not converged:
        for it in range(1, opts.max_iter + 1):
            iterations = it
            ve, vh = pots.apply_vmq(uE / pots.m_eps, uH / pots.m_mu)
            rhs_e, rhs_h = pots.m_eps * ve, pots.m_mu * vh
            newE = u0e + np.stack([kernel.apply_scalar(rhs_e[c])
                                   for c in range(3)])
            newH = u0h + np.stack([kernel.apply_scalar(rhs_h[c])
                                   for c in range(3)])
            upd = np.sqrt(np.sum(np.abs(newE - uE) ** 2)
                          + np.sum(np.abs(newH - uH) ** 2))
            unorm = np.sqrt(np.sum(np.abs(newE) ** 2)
                            + np.sum(np.abs(newH) ** 2))
            uE, uH = newE, newH
            updates.append(float(upd))
            if len(updates) >= 2 and updates[-2] > 0:
                ratios.append(updates[-1] / updates[-2])
            if upd <= opts.tol * max(unorm, 1e-300):
                converged = True
                break
            if ratios and ratios[-1] >= 1.0:
                raise NeumannDiverged(
                    f"series update ratio {ratios[-1]:.3f} >= 1 on channel "
                    f"{which}; a larger tau is needed for this material")
        if not converged:
            raise NeumannDiverged(
                f"no contraction to tol={opts.tol:g} within "
                f"{opts.max_iter} terms (last ratio "
                f"{ratios[-1] if ratios else float('nan'):.3f})")

    sl = tuple(slice(offs[a], offs[a] + grid.n[a]) for a in range(3))
    uE_base = uE[(slice(None),) + sl]
    uH_base = uH[(slice(None),) + sl]
    R = uE_base / pots.m0[0] - _cvec(A)[:, None, None, None]
    Q = uH_base / pots.m0[1] - _cvec(B)[:, None, None, None]
    Rf = ComplexVectorField(grid, np.ascontiguousarray(R))
    Qf = ComplexVectorField(grid, np.ascontiguousarray(Q))
    report = CgoReport(
        channel=which, harmonic=k, conj_medium=conj_med, p=opts.p,
        iterations=iterations, converged=True,
        ratio=float(max(ratios)) if ratios else 0.0,
        r_lp=lp_volume(Rf.values, grid, opts.p),
        q_lp=lp_volume(Qf.values, grid, opts.p),
        amp_scale=amp_scale, updates=tuple(updates))
    return Rf, Qf, report


def _is_background(material: MaterialModel, k: int) -> bool:
    co = material.uniform_coeffs(k)
    return (co is not None and co[0] == material.eps0 and co[1] == material.mu0)


def cgo_field(material: MaterialModel, dirset: CgoDirectionSet, channel: str,
              opts: CgoSolveOptions | None = None):
    """Assemble the probe pair (E, H) on the material's grid.

    E = e^{zeta.x} eps0^{1/2} eps^{-1/2} (A + R) and likewise for H; the
    conjugate-medium channels evaluate eps and mu conjugated.  When the
    medium equals the background at this harmonic the fields reduce to exact
    exponentials and the E payload carries the analytic descriptor used by
    the exact boundary-pairing path.
    """
    R, Q, report = solve_cgo_remainder(material, dirset, channel, opts)
    zeta, A, B, k, conj_med = dirset.channel(channel)
    grid = material.grid
    eps = np.asarray(material.eps_at(k), dtype=np.complex128)
    mu = np.asarray(material.mu_at(k), dtype=np.complex128)
    if conj_med:
        eps, mu = np.conj(eps), np.conj(mu)
    X, Y, Z = grid.meshgrid()
    phase = np.exp(zeta[0] * X + zeta[1] * Y + zeta[2] * Z)
    se = np.sqrt(material.eps0) / np.sqrt(eps)
    sm = np.sqrt(material.mu0) / np.sqrt(mu)
    Ev = phase * se * (R.values + _cvec(A)[:, None, None, None])
    Hv = phase * sm * (Q.values + _cvec(B)[:, None, None, None])
    payload_e = payload_h = None
    if _is_background(material, k):
        payload_e = {"kind": "cgo", "zeta": zeta.copy(), "amp": _cvec(A),
                     "scale": 1.0 + 0.0j}
        payload_h = {"kind": "cgo", "zeta": zeta.copy(), "amp": _cvec(B),
                     "scale": 1.0 + 0.0j}
    E = ComplexVectorField(grid, np.ascontiguousarray(Ev), payload=payload_e)
    H = ComplexVectorField(grid, np.ascontiguousarray(Hv), payload=payload_h)
    return E, H, report


# ---------------------------------------------------------------------------
# matching phases to the staggered lattice dispersion relation


def match_to_lattice(dirset: CgoDirectionSet, h: float,
                     iters: int = 60, tol: float = 1e-12) -> CgoDirectionSet:
    """Snap a direction set onto the discrete dispersion variety of spacing h.

    Adjusts the pump, second-harmonic and tilde-pump phases by a least-norm
    Newton step so that sum_a lattice_symbol(zeta)_a^2 equals (k kappa)^2 for
    each channel, while preserving the two linear phase sum rules exactly.
    Amplitudes are re-projected to be transverse to the lattice symbol and
    their magnetic partners rebuilt, so exponential probes built from the
    result satisfy the staggered curl equations to machine precision.
    """
    kap = dirset.kappa
    z1, z2, zt = (dirset.zeta1_omega.copy(), dirset.zeta1_2omega.copy(),
                  dirset.zetaT_omega.copy())
    targets = np.array([kap ** 2, 4.0 * kap ** 2, kap ** 2])

    def zs_of(d):
        dw, dt = d[:3] + 1j * d[3:6], d[6:9] + 1j * d[9:12]
        return (z1 + dw, z2 - np.conj(dw + dt), zt + dt)

    def resid(d):
        out = np.empty(3, dtype=complex)
        for i, z in enumerate(zs_of(d)):
            nu = lattice_symbol(z, h)
            out[i] = np.sum(nu * nu) - targets[i]
        return np.concatenate([out.real, out.imag])

    d = np.zeros(12)
    scale = max(1.0, dirset.tau ** 2)
    for _ in range(iters):
        r = resid(d)
        if np.max(np.abs(r)) <= tol * scale:
            break
        J = np.empty((6, 12))
        step = 1e-7 * max(1.0, np.max(np.abs(d)))
        for j in range(12):
            dp = d.copy()
            dp[j] += step
            J[:, j] = (resid(dp) - r) / step
        d = d - np.linalg.pinv(J) @ r
    else:
        raise ConstraintViolated(
            "lattice dispersion matching did not converge; grid too coarse "
            "for these phases")
    nz1, nz2, nzt = zs_of(d)
    nzt2 = -2.0 * np.conj(nz1)

    def project(z, a, k):
        nu = lattice_symbol(z, h)
        nn = np.sum(nu * nu)
        ap = a - nu * (np.dot(nu, a) / nn)
        return ap, np.cross(nu, ap) / (k * kap)

    a1w, b1w = project(nz1, dirset.A1_omega, 1)
    a12, b12 = project(nz2, dirset.A1_2omega, 2)
    atw, btw = project(nzt, dirset.AT_omega, 1)
    out = replace(
        dirset, zeta1_omega=nz1, zeta1_2omega=nz2, zetaT_omega=nzt,
        zetaT_2omega=nzt2, A1_omega=a1w, B1_omega=b1w, A1_2omega=a12,
        B1_2omega=b12, AT_omega=atw, BT_omega=btw,
        AT_2omega=dirset.AT_2omega.copy() * 0.0,
        BT_2omega=dirset.BT_2omega.copy() * 0.0, lattice_h=float(h))
    return out.validate(rtol=1e-9, atol_linear=1e-9)
