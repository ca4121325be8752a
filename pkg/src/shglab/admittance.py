"""Boundary admittance maps, second-order extraction, and the two pairings.

The admittance map sends the pair of input electric traces to the pair of
tangential magnetic traces of the solved fields.  Expanding it in the input
amplitude s isolates, at order s^2, the traces driven purely by the
quadratic susceptibility; pairing those against probing solutions of the
conjugate medium converts boundary data into volume integrals against chi2.

Output traces carry, as payload, the solver's tangential H samples on the
wall-adjacent dof layers.  Those samples are what make the boundary/volume
pairing identity exact on the lattice; they survive the linear operations
of the s-extraction, so extracted second-order traces pair exactly too.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _engine as eng
from .errors import ConstraintViolated, ExtrapolationUnreliable
from .fields import ComplexVectorField
from .materials import MaterialModel
from .norms import _face_quad_weights, lp_trace
from .shg import ShgSolveOptions, _check_zero_trace, shg_sources, solve_shg
from .traces import TangentialTrace, face_axes, tangential_trace


@dataclass
class AdmittanceSample:
    """One evaluation of an admittance map."""

    f_omega: TangentialTrace
    f_2omega: TangentialTrace
    th_omega: TangentialTrace
    th_2omega: TangentialTrace
    s: float
    report: object

    def __post_init__(self):
        for t in (self.th_omega, self.th_2omega):
            for i in range(6):
                a, _, _, _ = face_axes(i)
                if np.any(t.faces[i][a] != 0):
                    raise ConstraintViolated("output traces must be tangential")

    @property
    def outputs(self):
        return self.th_omega, self.th_2omega


@dataclass
class SecondOrderFields:
    """Second-order (in input amplitude) field coefficients; zero traces."""

    e_omega: ComplexVectorField
    h_omega: ComplexVectorField
    e_2omega: ComplexVectorField
    h_2omega: ComplexVectorField

    def __post_init__(self):
        _check_zero_trace(self.e_omega, "e_omega")
        _check_zero_trace(self.e_2omega, "e_2omega")


def _h_trace(Hfield: ComplexVectorField) -> TangentialTrace:
    payload = None
    if Hfield.payload and "stag" in Hfield.payload:
        payload = eng.h_layers_payload(Hfield.grid, Hfield.payload["stag"])
    return tangential_trace(Hfield, payload=payload)


def admittance_nonlinear(material: MaterialModel, omega: complex, f_pair,
                         s: float = 1.0,
                         opts: ShgSolveOptions | None = None) -> AdmittanceSample:
    """Full nonlinear admittance: solve the coupled system at inputs s*f."""
    f_w, f_2w = f_pair
    Ew, Hw, E2w, H2w, report = solve_shg(
        material, omega, s * f_w, s * f_2w, opts)
    return AdmittanceSample(f_w, f_2w, _h_trace(Hw), _h_trace(H2w), s, report)


def admittance_linear(material: MaterialModel, omega: complex, f_pair,
                      s: float = 1.0) -> AdmittanceSample:
    """Linearized admittance: two decoupled linear solves, chi2 ignored."""
    from .linear import solve_linear_bvp
    f_w, f_2w = f_pair
    out = []
    reports = []
    for k, f in ((1, f_w), (2, f_2w)):
        _, H, rep = solve_linear_bvp(material, k * omega, s * f, harmonic=k)
        out.append(_h_trace(H))
        reports.append(rep)
    return AdmittanceSample(f_w, f_2w, out[0], out[1], s, tuple(reports))


def second_order_fields(material: MaterialModel, omega: complex,
                        f_pair) -> SecondOrderFields:
    """Direct computation of the order-s^2 coefficient fields.

    Solves the two linear problems with the given traces, assembles the
    polarization sources from those first-order fields, and solves the two
    zero-trace source problems.  This is the oracle the s-extraction is
    compared against.
    """
    from .linear import solve_linear_bvp, solve_linear_sources
    f_w, f_2w = f_pair
    E1w, _, _ = solve_linear_bvp(material, omega, f_w, harmonic=1)
    E12w, _, _ = solve_linear_bvp(material, 2 * omega, f_2w, harmonic=2)
    J_w, J_2w = shg_sources(material, omega, E1w, E12w)
    e_w, h_w, _ = solve_linear_sources(material, omega, J_w, harmonic=1)
    e_2w, h_2w, _ = solve_linear_sources(material, 2 * omega, J_2w, harmonic=2)
    return SecondOrderFields(e_w, h_w, e_2w, h_2w)


def extract_second_order_trace(blackbox, f_pair, s_list=(1e-2, 5e-3),
                               linear_blackbox=None):
    """Second-order trace pair from admittance measurements only.

    Evaluates D(s) = s^-2 [Lambda(s f) - s Lambda_lin(f)] on the scalings in
    s_list (descending) and Richardson-extrapolates the O(s) error away using
    the last two entries.  ``blackbox`` maps (f_pair, s) or (scaled f_pair)
    to a trace pair; ``linear_blackbox``, when given, supplies the exact
    linearization, otherwise it is estimated from the blackbox at a scaling
    well below min(s_list).

    Returns ((tH2_w, tH2_2w), error_estimate).  Raises
    ExtrapolationUnreliable when the s-sequence differences do not shrink.
    """
    s_list = sorted((float(s) for s in s_list), reverse=True)
    if len(s_list) < 2:
        raise ConstraintViolated("need at least two scalings to extrapolate")

    def measure(s):
        out = blackbox(tuple(s * f for f in f_pair))
        return out

    if linear_blackbox is not None:
        lin = linear_blackbox(f_pair)
    else:
        s0 = s_list[-1] / 8.0
        a_pair = measure(s0)
        b_pair = measure(2 * s0)
        lin = tuple((2.0 / s0) * a - (1.0 / (2 * s0)) * b
                    for a, b in zip(a_pair, b_pair))

    Ds = []
    for s in s_list:
        lam = measure(s)
        Ds.append(tuple((lam_k - s * lin_k) * (1.0 / s ** 2)
                        for lam_k, lin_k in zip(lam, lin)))

    def dnorm(pa, pb):
        return sum(lp_trace(a - b, 2.0) for a, b in zip(pa, pb))

    diffs = [dnorm(Ds[i], Ds[i + 1]) for i in range(len(Ds) - 1)]
    if len(diffs) >= 2:
        for d0, d1 in zip(diffs, diffs[1:]):
            if d1 > d0:
                raise ExtrapolationUnreliable(
                    f"s-sequence residuals are not monotone: {diffs}")
    sa, sb = s_list[-2], s_list[-1]
    Da, Db = Ds[-2], Ds[-1]
    w_a = -sb / (sa - sb)
    w_b = sa / (sa - sb)
    extrap = tuple(w_a * a + w_b * b for a, b in zip(Da, Db))
    err = dnorm(extrap, Ds[-1])
    return extrap, err


# ---------------------------------------------------------------------------
# the two sides of the integral identity
# ---------------------------------------------------------------------------

def _probe_conj_evaluator(payload):
    """Evaluator for the conjugated analytic probe field, or None."""
    if not payload:
        return None
    kind = payload.get("kind")
    scale = complex(payload.get("scale", 1.0))
    if kind == "cgo":
        zc = np.conj(np.asarray(payload["zeta"], dtype=complex))
        ac = np.conj(scale * np.asarray(payload["amp"], dtype=complex))

        def ev(v, pos):
            return ac[v] * np.exp(zc[0] * pos[0] + zc[1] * pos[1] + zc[2] * pos[2])
        return ev
    if kind == "plane":
        kc = np.conj(np.asarray(payload["kvec"], dtype=complex))
        pc = np.conj(scale * np.asarray(payload["pol"], dtype=complex))

        def ev(v, pos):
            return pc[v] * np.exp(-1j * (kc[0] * pos[0] + kc[1] * pos[1]
                                         + kc[2] * pos[2]))
        return ev
    return None


def _channel_pairing(tH: TangentialTrace, tE: TangentialTrace) -> complex:
    """One channel of  integral of t(H) . (nu x t(conj(Etilde))) dS."""
    grid = tH.grid
    probe = _probe_conj_evaluator(tE.payload)
    data = tH.payload
    if (probe is not None and data and data.get("kind") == "h_layers"
            and data.get("stagger") == eng.stagger_key(grid)):
        return -eng.pairing_flux(grid, data["layers"], probe)
    # collocated fallback: face quadrature on the traces themselves
    total = 0.0 + 0.0j
    for i in range(6):
        a, s, b, c = face_axes(i)
        th = tH.faces[i]
        te = np.conj(tE.faces[i])
        nu = np.zeros(3)
        nu[a] = float(s)
        cross = np.empty_like(te)
        for k in range(3):
            k1, k2 = (k + 1) % 3, (k + 2) % 3
            cross[k] = nu[k1] * te[k2] - nu[k2] * te[k1]
        q = _face_quad_weights(grid, i)
        total += np.sum(q * np.sum(th * cross, axis=0))
    return total


def boundary_pairing(tH_pair, tilde_E_pair) -> complex:
    """Sum over both harmonics of the boundary integral
    of t(H2) . (nu x t(conj Etilde)).

    When the data traces carry wall-layer samples and the probe traces carry
    an analytic descriptor, the integral is evaluated with the quadrature
    that makes the discrete integration by parts exact; otherwise a plain
    face quadrature of the traces is used.
    """
    return sum(_channel_pairing(tH, tE)
               for tH, tE in zip(tH_pair, tilde_E_pair))


def _midpoint_integral(vals: np.ndarray, grid) -> complex:
    out = vals
    for a in range(3):
        sl0 = [slice(None)] * 3
        sl1 = [slice(None)] * 3
        sl0[a] = slice(0, -1)
        sl1[a] = slice(1, None)
        out = 0.5 * (out[tuple(sl0)] + out[tuple(sl1)])
    return complex(out.sum() * grid.h[0] * grid.h[1] * grid.h[2])


def volume_pairing(chi2, E1_pair, tildeE_pair, omega: complex) -> complex:
    """-i omega * integral of chi2 . [ (conj(E1^w).E1^2w) conj(Et^w)
                                       + 2 (E1^w.E1^w)    conj(Et^2w) ] dx

    by midpoint quadrature on the node grid.  chi2 may be a (3, n1, n2, n3)
    array or a ComplexVectorField.
    """
    E1w, E12w = E1_pair
    Etw, Et2w = tildeE_pair
    grid = E1w.grid
    chi = chi2.values if isinstance(chi2, ComplexVectorField) else np.asarray(chi2)
    dot_w = np.sum(np.conj(E1w.values) * E12w.values, axis=0)
    dot_2w = np.sum(E1w.values * E1w.values, axis=0)
    integrand = np.sum(
        chi * (dot_w[None] * np.conj(Etw.values)
               + 2.0 * dot_2w[None] * np.conj(Et2w.values)), axis=0)
    return -1j * omega * _midpoint_integral(integrand, grid)
