"""Gauged staggered-lattice cavity engine (internal).

The public solvers wrap this module.  Unknowns live on a staggered (Yee)
lattice over the box: the c-th electric component sits at edge midpoints
(half positions along axis c, node positions along the others) and the
c-th magnetic component at face centers (nodes along c, halves along the
others).  Tangential electric dofs on the walls are "pinned": they carry
boundary data, and the curl-curl equation is imposed only at interior
dofs.  The mimetic identities div(curl curl) = 0 and curl(grad) = 0 hold
to roundoff, which is what makes the boundary pairing below exact.

A constant complex gauge vector ``phi`` shifts every 1-d difference so the
lattice operates on envelopes u with  field = e^{phi.x} u.  This keeps all
exponentially large factors out of the linear algebra; callers that work
with exponential probing fields only multiply by e^{phi.x} at the very end,
where it is harmless.

Direct solver: with constant coefficients the curl-curl system decouples,
after an exact rewrite of the outer-layer divergence correction, into one
gauged Helmholtz problem per component.  Each is diagonalized by complex
Schur decompositions of the two transverse 1-d operators and swept along
anti-diagonals with a batched Bartels-Stewart recursion in the own axis.
One solve costs O(n^4) and needs a few MB at n = 32.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import SolveFailed
from .grids import BoxGrid
from .traces import TangentialTrace, face_axes


def dmats(N: int, h: float, phia: complex):
    """Gauged staggered 1-d differences along one axis.

    Dfw: nodes (N+1) -> halves (N).  Dbw: halves (N) -> nodes (N+1); its end
    rows reference dofs outside the lattice, are kept zero and never used.
    """
    ep = np.exp(phia * h / 2.0)
    em = np.exp(-phia * h / 2.0)
    Dfw = np.zeros((N, N + 1), dtype=complex)
    for i in range(N):
        Dfw[i, i] = -em / h
        Dfw[i, i + 1] = ep / h
    Dbw = np.zeros((N + 1, N), dtype=complex)
    for i in range(1, N):
        Dbw[i, i - 1] = -em / h
        Dbw[i, i] = ep / h
    return Dfw, Dbw


class GaugedCavity:
    """(curl_phi curl_phi - k2) E = B on staggered E dofs, pinned walls."""

    def __init__(self, grid: BoxGrid, phi=(0.0, 0.0, 0.0), k2: complex = 1.0 + 0.0j):
        self.grid = grid
        self.N = [grid.n[a] - 1 for a in range(3)]
        self.h = grid.h
        self.phi = np.asarray(phi, dtype=complex)
        self.k2 = complex(k2)
        self.D = [dmats(self.N[a], self.h[a], self.phi[a]) for a in range(3)]
        self.eshape = [tuple(self.N[a] if a == c else self.N[a] + 1
                             for a in range(3)) for c in range(3)]
        self.hshape = [tuple(self.N[a] + 1 if a == c else self.N[a]
                             for a in range(3)) for c in range(3)]
        self.xn = [grid.origin[a] + self.h[a] * np.arange(self.N[a] + 1)
                   for a in range(3)]
        self.xh = [grid.origin[a] + self.h[a] * (np.arange(self.N[a]) + 0.5)
                   for a in range(3)]

    # -- dof coordinates ------------------------------------------------------
    def coords(self, kind: str, c: int):
        """Broadcastable coordinate arrays for dofs of component c of E or H."""
        if kind == "E":
            ax = [self.xh[a] if a == c else self.xn[a] for a in range(3)]
        else:
            ax = [self.xn[a] if a == c else self.xh[a] for a in range(3)]
        return np.meshgrid(*ax, indexing="ij")

    def zeros_e(self):
        return [np.zeros(self.eshape[c], dtype=complex) for c in range(3)]

    # -- mimetic operators ----------------------------------------------------
    def _ap(self, M, f, axis):
        return np.moveaxis(np.tensordot(M, f, axes=([1], [axis])), 0, axis)

    def curl_E(self, E):
        """Edge dofs (full arrays incl. pinned) -> H-shaped face arrays."""
        Df = [self.D[a][0] for a in range(3)]
        cx = self._ap(Df[1], E[2], 1) - self._ap(Df[2], E[1], 2)
        cy = self._ap(Df[2], E[0], 2) - self._ap(Df[0], E[2], 0)
        cz = self._ap(Df[0], E[1], 0) - self._ap(Df[1], E[0], 1)
        return [cx, cy, cz]

    def curl_H(self, H):
        """Face dofs -> E-shaped arrays; unformable wall rows stay zero."""
        Db = [self.D[a][1] for a in range(3)]
        cx = self._ap(Db[1], H[2], 1) - self._ap(Db[2], H[1], 2)
        cy = self._ap(Db[2], H[0], 2) - self._ap(Db[0], H[2], 0)
        cz = self._ap(Db[0], H[1], 0) - self._ap(Db[1], H[0], 1)
        return [cx, cy, cz]

    def div_E(self, E):
        """Edge dofs -> node array; wall rows zero (unformable)."""
        Db = [self.D[a][1] for a in range(3)]
        return (self._ap(Db[0], E[0], 0) + self._ap(Db[1], E[1], 1)
                + self._ap(Db[2], E[2], 2))

    def grad_n(self, p):
        """Node scalar -> E-shaped gradient arrays."""
        Df = [self.D[a][0] for a in range(3)]
        return [self._ap(Df[0], p, 0), self._ap(Df[1], p, 1), self._ap(Df[2], p, 2)]

    def pinmask(self, c: int):
        m = np.zeros(self.eshape[c], dtype=bool)
        for a in range(3):
            if a != c:
                sl = [slice(None)] * 3
                sl[a] = 0
                m[tuple(sl)] = True
                sl[a] = -1
                m[tuple(sl)] = True
        return m

    def apply_cc(self, E, eps_e=None, invmu_h=None):
        """(curl mu^-1 curl - k2 eps_rel) with identity rows at pinned dofs.

        eps_e / invmu_h are optional per-component staggered coefficient
        arrays relative to the constant coefficients already folded into k2;
        None means 1.
        """
        H = self.curl_E(E)
        if invmu_h is not None:
            H = [invmu_h[c] * H[c] for c in range(3)]
        CC = self.curl_H(H)
        out = []
        for c in range(3):
            ee = 1.0 if eps_e is None else eps_e[c]
            v = CC[c] - self.k2 * ee * E[c]
            out.append(np.where(self.pinmask(c), E[c], v))
        return out

    # -- separable direct solver ----------------------------------------------
    def _own_ops(self, c: int):
        """Own-axis (N x N) operator for component c with the exact end-row
        rewrite that makes the divergence correction separable."""
        N, h = self.N[c], self.h[c]
        Dfw, Dbw = self.D[c]
        T = -(Dfw @ Dbw)
        ep = np.exp(self.phi[c] * h / 2.0)
        em = np.exp(-self.phi[c] * h / 2.0)
        T[0, :] = -(ep / h) * Dbw[1, :]
        T[N - 1, :] = (em / h) * Dbw[N - 1, :]
        return T

    def _tr_ops(self, a: int):
        """Transverse interior (N-1)x(N-1) block of -(Dbw_a Dfw_a)."""
        Dfw, Dbw = self.D[a]
        return -(Dbw @ Dfw)[1:-1, 1:-1]

    def prepare(self):
        self.schur = {a: sla.schur(self._tr_ops(a), output="complex")
                      for a in range(3)}
        self.Town = [self._own_ops(c) for c in range(3)]

    def solve_rhs(self, B):
        """Solve (curl_phi curl_phi - k2) E = B; t(E) = 0 at pinned dofs.

        B: three E-shaped arrays (values at pinned dofs are ignored).
        """
        if not hasattr(self, "Town"):
            self.prepare()
        rho = -self.div_E(B) / self.k2
        rho[0, :, :] = rho[-1, :, :] = 0.0
        rho[:, 0, :] = rho[:, -1, :] = 0.0
        rho[:, :, 0] = rho[:, :, -1] = 0.0
        G3 = self.grad_n(rho)
        E = []
        for c in range(3):
            tr = [a for a in range(3) if a != c]
            R1, Z1 = self.schur[tr[0]]
            R2, Z2 = self.schur[tr[1]]
            sl = [slice(None)] * 3
            for a in tr:
                sl[a] = slice(1, -1)
            G = (B[c] - G3[c])[tuple(sl)].copy()
            Gw = np.moveaxis(G, c, 0)
            Gw = np.einsum("ip,opq->oiq", Z1.conj().T, Gw)
            Gw = np.einsum("iq,opq->opi", Z2.conj().T, Gw)
            U = self._sweep(self.Town[c], R1, R2, Gw, self.k2)
            U = np.einsum("pi,oiq->opq", Z1, U)
            U = np.einsum("qi,opi->opq", Z2, U)
            Ec = np.zeros(self.eshape[c], dtype=complex)
            Ec[tuple(sl)] = np.moveaxis(U, 0, c)
            E.append(Ec)
        return E

    @staticmethod
    def _sweep(L, R1, R2, G, k2):
        """Back-substitution over anti-diagonals of the two triangular
        transverse factors; one batched dense solve per anti-diagonal."""
        nown = L.shape[0]
        m1, m2 = R1.shape[0], R2.shape[0]
        U = np.zeros((nown, m1, m2), dtype=complex)
        I = np.eye(nown, dtype=complex)
        for s in range(m1 + m2 - 2, -1, -1):
            ps = np.arange(max(0, s - m2 + 1), min(m1 - 1, s) + 1)
            qs = s - ps
            B = G[:, ps, qs].copy()
            for i, (p, q) in enumerate(zip(ps, qs)):
                if p + 1 < m1:
                    B[:, i] -= U[:, p + 1:, q] @ R1[p, p + 1:]
                if q + 1 < m2:
                    B[:, i] -= U[:, p, q + 1:] @ R2[q, q + 1:]
            lam = R1[ps, ps] + R2[qs, qs] - k2
            A = L[None, :, :] + lam[:, None, None] * I[None, :, :]
            X = np.linalg.solve(A, B.T[:, :, None])[:, :, 0]
            U[:, ps, qs] = X.T
        return U

    def solve_bvp(self, B, Ebc):
        """Solve with inhomogeneous pinned values.

        Ebc: E-shaped arrays that are zero at interior dofs and carry the
        boundary data at pinned dofs.  Because Ebc vanishes away from the
        walls, lifting only moves the double-curl of Ebc to the right-hand
        side of the first interior rows; the k2 term never appears.
        """
        CC = self.curl_H(self.curl_E(Ebc))
        Beff = [B[c] - np.where(self.pinmask(c), 0.0, CC[c]) for c in range(3)]
        E0 = self.solve_rhs(Beff)
        return [E0[c] + Ebc[c] for c in range(3)]

    def residual(self, E, B, eps_e=None, invmu_h=None):
        """max |(curl curl - k2) E - B| over unknown dofs / max |E|."""
        out = self.apply_cc(E, eps_e=eps_e, invmu_h=invmu_h)
        scale = max(max(np.abs(e).max() for e in E), 1e-300)
        r = 0.0
        for c in range(3):
            v = out[c] - B[c]
            m = ~self.pinmask(c)
            r = max(r, np.abs(v[m]).max())
        return r / scale

    # -- variable-coefficient Krylov solver -------------------------------------
    def solve_rhs_var(self, B, eps_e, invmu_h, tol=1e-11, maxiter=400):
        """BiCGStab on the variable-coefficient system, preconditioned by the
        constant-coefficient direct solve (coefficients folded into k2)."""
        shapes = self.eshape
        sizes = [int(np.prod(s)) for s in shapes]
        offs = np.cumsum([0] + sizes)

        def pack(F):
            return np.concatenate([np.ravel(F[c]) for c in range(3)])

        def unpack(x):
            return [x[offs[c]:offs[c + 1]].reshape(shapes[c]) for c in range(3)]

        pin = [self.pinmask(c) for c in range(3)]

        def matvec(x):
            E = unpack(x)
            out = self.apply_cc(E, eps_e=eps_e, invmu_h=invmu_h)
            out = [np.where(pin[c], E[c], out[c]) for c in range(3)]
            return pack(out)

        def precond(x):
            R = unpack(x)
            R = [np.where(pin[c], 0.0, R[c]) for c in range(3)]
            return pack(self.solve_rhs(R))

        n = offs[-1]
        Aop = spla.LinearOperator((n, n), matvec=matvec, dtype=complex)
        Mop = spla.LinearOperator((n, n), matvec=precond, dtype=complex)
        rhs = pack([np.where(pin[c], 0.0, B[c]) for c in range(3)])
        if not np.any(rhs):
            return self.zeros_e(), 0
        iters = [0]

        def count(_):
            iters[0] += 1

        x, info = spla.bicgstab(Aop, rhs, M=Mop, rtol=tol, atol=0.0,
                                maxiter=maxiter, callback=count)
        if info != 0:
            raise SolveFailed(
                f"variable-coefficient solve did not reach {tol:g} "
                f"within {maxiter} iterations (info={info})")
        E = unpack(x)
        return [np.where(pin[c], 0.0, E[c]) for c in range(3)], iters[0]

    # -- spectrum-based conditioning estimate -----------------------------------
    def spectrum_gap(self):
        """(min, max) of |lam1+lam2+lam3 - k2| over the separated 1-d spectra.

        This is an exact conditioning statement for the decoupled solver and
        a useful resonance proximity estimate for the cavity operator.
        """
        lo, hi = np.inf, 0.0
        for c in range(3):
            tr = [a for a in range(3) if a != c]
            lam_own = np.linalg.eigvals(self.Town[c] if hasattr(self, "Town")
                                        else self._own_ops(c))
            lam1 = np.diag(self.schur[tr[0]][0]) if hasattr(self, "schur") \
                else np.linalg.eigvals(self._tr_ops(tr[0]))
            lam2 = np.diag(self.schur[tr[1]][0]) if hasattr(self, "schur") \
                else np.linalg.eigvals(self._tr_ops(tr[1]))
            s = (lam_own[:, None, None] + lam1[None, :, None]
                 + lam2[None, None, :] - self.k2)
            mags = np.abs(s)
            lo = min(lo, float(mags.min()))
            hi = max(hi, float(mags.max()))
        return lo, hi


# ---------------------------------------------------------------------------
# staggered <-> node adapters (all O(h^2))
# ---------------------------------------------------------------------------

def node_to_edge(arr: np.ndarray, c: int) -> np.ndarray:
    """Average a node-sampled scalar along axis c onto half positions."""
    sl0 = [slice(None)] * 3
    sl1 = [slice(None)] * 3
    sl0[c] = slice(0, -1)
    sl1[c] = slice(1, None)
    return 0.5 * (arr[tuple(sl0)] + arr[tuple(sl1)])


def _halves_to_nodes(arr: np.ndarray, axis: int) -> np.ndarray:
    """Second-order interpolation of half samples to nodes along one axis."""
    N = arr.shape[axis] + 1
    shape = list(arr.shape)
    shape[axis] = N
    out = np.empty(shape, dtype=arr.dtype)
    sl = lambda i: tuple(slice(None) if a != axis else i for a in range(arr.ndim))
    inner0 = tuple(slice(None) if a != axis else slice(0, -1) for a in range(arr.ndim))
    inner1 = tuple(slice(None) if a != axis else slice(1, None) for a in range(arr.ndim))
    mid = tuple(slice(None) if a != axis else slice(1, -1) for a in range(3))
    out[mid] = 0.5 * (arr[inner0] + arr[inner1])
    out[sl(0)] = 1.5 * arr[sl(0)] - 0.5 * arr[sl(1)]
    out[sl(-1)] = 1.5 * arr[sl(-1)] - 0.5 * arr[sl(-2)]
    return out


def edge_to_node(Ec: np.ndarray, c: int) -> np.ndarray:
    return _halves_to_nodes(Ec, c)


def face_to_node(Hc: np.ndarray, c: int) -> np.ndarray:
    out = Hc
    for a in range(3):
        if a != c:
            out = _halves_to_nodes(out, a)
    return out


def edges_to_field(E) -> np.ndarray:
    return np.stack([edge_to_node(E[c], c) for c in range(3)])


def faces_to_field(H) -> np.ndarray:
    return np.stack([face_to_node(H[c], c) for c in range(3)])


def field_to_edges(values: np.ndarray):
    return [node_to_edge(values[c], c) for c in range(3)]


def sample_on_edges(cav: GaugedCavity, fn):
    """Evaluate fn(component, X, Y, Z) exactly at the staggered E positions."""
    out = []
    for c in range(3):
        X = cav.coords("E", c)
        out.append(np.asarray(fn(c, *X), dtype=complex))
    return out


# ---------------------------------------------------------------------------
# boundary data: pinned arrays from traces, physical H wall layers
# ---------------------------------------------------------------------------

def node_to_edge_2d(arr: np.ndarray, axis: int) -> np.ndarray:
    sl0 = [slice(None)] * 2
    sl1 = [slice(None)] * 2
    sl0[axis] = slice(0, -1)
    sl1[axis] = slice(1, None)
    return 0.5 * (arr[tuple(sl0)] + arr[tuple(sl1)])


def trace_to_pinned(cav: GaugedCavity, trace: TangentialTrace):
    """Convert a tangential E trace, t(E) = nu x E on the six faces, into
    E-shaped arrays that carry the tangential E values at the pinned dofs
    (averaged onto edge midpoints) and zeros everywhere else.

    Edge dofs shared by two faces are written by both; consistent traces
    agree there up to the averaging order, and the later face in the fixed
    order wins, which keeps the construction deterministic.
    """
    Ebc = cav.zeros_e()
    for i in range(6):
        a, s, b, c = face_axes(i)
        t = trace.faces[i]
        nu = np.zeros(3)
        nu[a] = float(s)
        for k in (b, c):
            # tangential E on the face: E_tan = -nu x t
            k1, k2 = (k + 1) % 3, (k + 2) % 3
            Ek = -(nu[k1] * t[k2] - nu[k2] * t[k1])
            # face data axes are (b, c) with b < c; component k is staggered
            # along its own axis, so average the face samples along k
            block = node_to_edge_2d(Ek, axis=0 if k == b else 1)
            idx = [slice(None)] * 3
            idx[a] = 0 if s < 0 else -1
            Ebc[k][tuple(idx)] = block
    return Ebc


def layer_positions(grid: BoxGrid, i: int, u: int, projected: bool = True):
    """Coordinates of the H_u dofs on the wall-adjacent layer of face i.

    The dof layer sits half a step inside the wall along the face normal;
    with projected=True that coordinate is replaced by the wall itself,
    which is where the exact discrete flux pairing evaluates the probe.
    Returns three coordinate arrays broadcast to the layer shape.
    """
    a, s, b, c = face_axes(i)
    rem = [d for d in range(3) if d != a]
    vals = []
    for d in rem:
        if d == u:
            vals.append(grid.origin[d] + grid.h[d] * np.arange(grid.n[d]))
        else:
            vals.append(grid.origin[d] + grid.h[d] * (np.arange(grid.n[d] - 1) + 0.5))
    P, Q = np.meshgrid(*vals, indexing="ij")
    if projected:
        xa = grid.origin[a] + (0.0 if s < 0 else grid.extent[a])
    else:
        xa = grid.origin[a] + (grid.h[a] / 2 if s < 0
                               else grid.extent[a] - grid.h[a] / 2)
    pos = [None, None, None]
    pos[rem[0]] = P
    pos[rem[1]] = Q
    pos[a] = np.full_like(P, xa)
    return pos


def stagger_key(grid: BoxGrid):
    return (tuple(grid.n), tuple(float(x) for x in grid.origin),
            tuple(float(x) for x in grid.extent))


def extract_h_layers(grid: BoxGrid, H, gauge=None):
    """Tangential H dof values on the six wall-adjacent half layers.

    H: staggered face-dof arrays.  Per face the pair is ordered (u=b, u=c)
    with (b, c) the in-plane axes in increasing order.  ``gauge`` is an
    optional callable(positions) -> factor used to turn gauged envelope
    values into physical samples at the true (half-inside) dof positions.
    """
    layers = []
    for i in range(6):
        a, s, b, c = face_axes(i)
        side = 0 if s < 0 else -1
        pair = []
        for u in (b, c):
            sl = [slice(None)] * 3
            sl[a] = side
            vals = np.asarray(H[u][tuple(sl)])
            if gauge is not None:
                vals = vals * gauge(layer_positions(grid, i, u, projected=False))
            pair.append(vals)
        layers.append(tuple(pair))
    return tuple(layers)


def h_layers_payload(grid: BoxGrid, H, gauge=None) -> dict:
    return {"kind": "h_layers", "stagger": stagger_key(grid),
            "layers": extract_h_layers(grid, H, gauge=gauge)}


def pairing_flux(grid: BoxGrid, layers, probe_field_conj) -> complex:
    """Exact discrete boundary flux  sum over walls of nu . (H x conj(Et)) dS.

    layers: physical tangential H samples on the wall-adjacent half layers
    (see extract_h_layers).  probe_field_conj(component, positions) returns
    the conjugated probing electric field at wall-projected dof positions.
    For probe fields that solve the lattice equations this quadrature makes
    the discrete integration by parts against the volume exact; the gauge
    factors of a gauged solve collapse into the wall projection, so none
    appear here.
    """
    P = 0.0 + 0.0j
    for i in range(6):
        a, s, b, c = face_axes(i)
        area = grid.h[b] * grid.h[c]
        eps_abc = 1.0 if a != 1 else -1.0  # Levi-Civita of (a, b, c), b < c
        vals_b, vals_c = layers[i]
        tot = 0.0 + 0.0j
        for u, vals, v, sgn_uv in ((b, vals_b, c, eps_abc), (c, vals_c, b, -eps_abc)):
            pos = layer_positions(grid, i, u, projected=True)
            tot += sgn_uv * np.sum(vals * probe_field_conj(v, pos))
        P += float(s) * tot * area
    return P
