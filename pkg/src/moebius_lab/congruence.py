"""Enveloped sphere congruences and the splitting d = D^V + S^V.

Frames are stored as (n+2) x (n+2) matrices whose columns are, in order,
sigma, Y_1..Y_m, Z, xi_1..xi_k.  The Gram matrix of these columns is the
constant GF of `gcr.frame_gram`.  With dF = F omega the connection forms are
omega_j = GF^{-1} F^t G d_j F, and every fundamental form is a block of them:

    omega_j[xi_a, Y_i] = II^a(d_j, e_i)      (second fundamental form)
    omega_j[xi_a, xi_b] = beta_j^{ab}        (normal connection)
    omega_j[sigma, Y_i] = P(d_j, e_i)        (Moebius block)
    omega_j[sigma, xi_a] = A^a(d_j)          (conormal acceleration)

with II^a_ij = <d_i d_j sigma, xi_a> in coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import minkowski as mk
from .chart import GridField, integrate, merge_margins, partial, residual_norm
from .errors import DegenerateCongruence, InvalidArgument, NonFlatNormalBundle
from .gcr import ConnectionField, frame_gram
from .immersion import LightConeLift, jets, metric_from_first


def sym_inv_sqrt(g: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(g)
    return np.einsum("...ij,...j,...kj->...ik", v, w ** -0.5, v)


def sym_sqrt(g: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(g)
    return np.einsum("...ij,...j,...kj->...ik", v, np.sqrt(w), v)


def lorentz_cross(cols: np.ndarray) -> np.ndarray:
    """Unit vector G-orthogonal to the N-1 columns of cols (shape ..., N, N-1)."""
    N = cols.shape[-2]
    w = np.empty(cols.shape[:-2] + (N,))
    for j in range(N):
        minor = np.delete(cols, j, axis=-2)
        w[..., j] = (-1) ** j * np.linalg.det(minor)
    xi = mk.lower(w)
    nrm = np.sqrt(mk.inner(xi, xi))
    return xi / nrm[..., None]


@dataclass(frozen=True)
class SphereCongruence:
    lift: LightConeLift
    frame: GridField          # (n+2) x (m+2): sigma, Y, Z
    normal_frame: GridField   # (n+2) x k
    order: int = 2

    @property
    def m(self) -> int:
        return self.lift.m

    @property
    def k(self) -> int:
        return self.lift.n - self.lift.m

    @property
    def chart(self):
        return self.lift.chart

    def full_frame(self) -> GridField:
        vals = np.concatenate([self.frame.values, self.normal_frame.values], axis=-1)
        return GridField(self.chart, vals, merge_margins(self.frame, self.normal_frame))

    def gram_defect(self) -> float:
        F = self.full_frame()
        G = self.lift.space.G
        GF = frame_gram(self.m, self.k)
        D = np.swapaxes(F.values, -1, -2) @ G @ F.values - GF
        return float(np.max(np.abs(D)))

    def projector(self) -> GridField:
        """G-orthogonal projector onto V, as ambient matrices."""
        m = self.m
        Fv = self.frame.values
        Gv = frame_gram(m, 0)
        P = Fv @ np.linalg.inv(Gv) @ np.swapaxes(Fv, -1, -2) @ self.lift.space.G
        return GridField(self.chart, P, self.frame.margins)

    def transformed(self, T) -> "SphereCongruence":
        M = T.matrix if hasattr(T, "matrix") else np.asarray(T)
        return SphereCongruence(
            self.lift.transformed(T),
            self.frame.with_values(np.einsum("ij,...jk->...ik", M, self.frame.values)),
            self.normal_frame.with_values(np.einsum("ij,...jk->...ik", M, self.normal_frame.values)),
            self.order,
        )


def _normal_frame(V: np.ndarray, k: int, chart, margins) -> np.ndarray:
    """Orthonormal basis of the G-orthogonal complement of the columns of V."""
    N = V.shape[-2]
    if k == 0:
        return np.zeros(V.shape[:-1] + (0,))
    if k == 1:
        return lorentz_cross(V)[..., None]
    # reference projection: take the complement at the centre node and project
    # it onto every other complement, then orthonormalize symmetrically
    centre = tuple(s // 2 for s in chart.shape)
    Vc = V[centre]
    u, s, vt = np.linalg.svd(Vc.T @ np.diag([-1.0] + [1.0] * (N - 1)))
    ref = vt[-k:].T  # euclidean null space of V^t G, i.e. G-complement
    G = np.diag([-1.0] + [1.0] * (N - 1))
    # G-orthonormal reference: a Moebius transform then changes the whole
    # normal frame by one constant rotation, which finite differences commute with
    ref = ref @ sym_inv_sqrt(ref.T @ G @ ref)
    GV = np.linalg.inv(frame_gram(V.shape[-1] - 2, 0))
    # projection onto complement: E - V GV^{-1} V^t G E
    VtG = np.swapaxes(V, -1, -2) @ G
    proj = ref - V @ GV @ (VtG @ ref)
    gram = np.swapaxes(proj, -1, -2) @ G @ proj
    ev = np.linalg.eigvalsh(gram)
    if np.min(ev) < 1e-6:
        raise DegenerateCongruence("normal reference frame degenerates; split the chart", nodes=None)
    return proj @ sym_inv_sqrt(gram)


def central_sphere_congruence(lift: LightConeLift, order: int = 2) -> SphereCongruence:
    """Central sphere congruence via Lorentz Gram-Schmidt.

    sigma first, tangent directions next (made orthogonal to sigma and
    orthonormalized symmetrically), Z last as the null vector with
    <sigma, Z> = -1 orthogonal to the Y_j inside span{sigma, d sigma, W}, where
    W = g^{ij} d_i d_j sigma differs from the Laplacian only by tangent terms.
    """
    m = lift.m
    if m not in (1, 2, 3):
        raise InvalidArgument("central congruence needs m in {1, 2, 3}")
    J = jets(lift, order)
    g = metric_from_first(J.first)
    ginv = np.linalg.inv(g.values)
    s = lift.sigma.values
    W = np.zeros_like(s)
    for i in range(m):
        for j in range(m):
            W += ginv[..., i, j, None] * J.d2(i, j).values
    ws = mk.inner(W, s)
    if np.any(np.abs(ws) < 1e-12 * np.linalg.norm(W, axis=-1) * np.linalg.norm(s, axis=-1)):
        bad = np.argwhere(np.abs(ws) < 1e-12 * np.linalg.norm(W, axis=-1) * np.linalg.norm(s, axis=-1))
        raise DegenerateCongruence("trace of the hessian is orthogonal to sigma", nodes=bad[:10].tolist())
    Z0 = -W / ws[..., None]
    T = np.stack([d.values for d in J.first], axis=-1)  # (..., N, m)
    Ts = mk.inner(np.swapaxes(T, -1, -2), s[..., None, :])  # (..., m)
    T = T + Z0[..., :, None] * Ts[..., None, :]
    gT = np.einsum("...ai,...aj->...ij", mk.lower(np.swapaxes(T, -1, -2)).swapaxes(-1, -2), T)
    Y = T @ sym_inv_sqrt(gT)
    ZY = np.einsum("...a,...ai->...i", mk.lower(Z0), Y)
    Z1 = Z0 - np.einsum("...ai,...i->...a", Y, ZY)
    Z = Z1 + 0.5 * mk.inner(Z1, Z1)[..., None] * s
    frame = np.concatenate([s[..., None], Y, Z[..., None]], axis=-1)
    margins = merge_margins(*J.second.values())
    k = lift.n - m
    nf = _normal_frame(frame, k, lift.chart, margins)
    return SphereCongruence(lift, GridField(lift.chart, frame, margins),
                            GridField(lift.chart, nf, margins), order)


def enveloped_congruence(central: SphereCongruence, H) -> SphereCongruence:
    """Shift the congruence by the normal vector field H (components on xi)."""
    Hv = H.values if isinstance(H, GridField) else np.asarray(H, dtype=float)
    Hv = np.broadcast_to(Hv, central.chart.shape + (central.k,))
    fr = central.frame.values.copy()
    xi = central.normal_frame.values
    s = fr[..., 0]
    hvec = np.einsum("...ab,...b->...a", xi, Hv)
    h2 = np.sum(Hv * Hv, axis=-1)
    fr[..., -1] = fr[..., -1] - hvec + 0.5 * h2[..., None] * s
    nf = xi - s[..., :, None] * Hv[..., None, :]
    mg = central.frame.margins if not isinstance(H, GridField) else merge_margins(central.frame, H)
    return SphereCongruence(central.lift, GridField(central.chart, fr, mg),
                            GridField(central.chart, nf, mg), central.order)


def connection_of_frame(F: GridField, m: int, k: int, order: int = 2) -> ConnectionField:
    """omega_j = GF^{-1} F^t G d_j F."""
    N = F.values.shape[-1]
    G = mk.gram(N - 2)
    GF = frame_gram(m, k)
    GFinv = np.linalg.inv(GF)
    omegas = []
    Ft = np.swapaxes(F.values, -1, -2)
    for j in range(m):
        dF = partial(F, j, order)
        om = GFinv @ Ft @ G @ dF.values
        omegas.append(GridField(F.chart, om, dF.margins))
    return ConnectionField(F.chart, omegas, GF, m, k)


@dataclass(frozen=True)
class FundamentalForms:
    II: GridField      # frame components II^a(e_i, e_j): shape m x m x k
    H: GridField       # k-vector
    II0: GridField     # tracefree part
    beta: GridField    # coordinate 1-forms: shape m x k x k, beta[j][a][b]
    A: GridField       # coordinate components A^a(d_j): shape m x k
    P: GridField       # frame components of the Moebius block
    g: GridField       # coordinate metric of the lift
    E: GridField       # g^{-1/2}: frame vectors e_i = E[j, i] d_j
    omega: ConnectionField
    order: int = 2

    @property
    def Sh(self) -> GridField:
        return self.II.with_values(np.swapaxes(self.II.values, -3, -2))

    @property
    def m(self) -> int:
        return self.II.values.shape[-3]

    @property
    def k(self) -> int:
        return self.II.values.shape[-1]


def split_connection(V: SphereCongruence) -> FundamentalForms:
    m, k, order = V.m, V.k, V.order
    F = V.full_frame()
    conn = connection_of_frame(F, m, k, order)
    J = jets(V.lift, order)
    g = metric_from_first(J.first)
    E = sym_inv_sqrt(g.values)
    om = np.stack([w.values for w in conn.omega], axis=-3)  # (..., m_coord, N, N)
    mg = merge_margins(*conn.omega)
    xi = slice(m + 2, m + 2 + k)
    ys = slice(1, m + 1)
    # II^a(d_j, e_i) -> frame-frame via e_l = E[j, l] d_j
    IIc = np.swapaxes(om[..., xi, ys], -1, -2)            # (..., j, i, a)
    II = np.einsum("...jl,...jia->...lia", E, IIc)
    II = 0.5 * (II + np.swapaxes(II, -3, -2))
    H = np.trace(II, axis1=-3, axis2=-2) / m
    II0 = II - np.eye(m)[..., None] * H[..., None, None, :]
    beta = om[..., xi, xi]                                # (..., j, a, b)
    A = om[..., 0, xi]                                    # (..., j, a)
    Pc = om[..., 0, ys]                                   # (..., j, i)
    P = np.einsum("...jl,...ji->...li", E, Pc)
    P = 0.5 * (P + np.swapaxes(P, -1, -2))
    ch = V.chart
    return FundamentalForms(GridField(ch, II, mg), GridField(ch, H, mg), GridField(ch, II0, mg),
                            GridField(ch, beta, mg), GridField(ch, A, mg), GridField(ch, P, mg),
                            g, GridField(ch, E, g.margins), conn, order)


def curvature_spheres(forms: FundamentalForms, gap_rtol: float = 1e-8, comm_factor: float = 100.0):
    """Simultaneous eigendecomposition of the normal components of II.

    Returns (eigenvalues (..., m, k), eigenframe (..., m, m), umbilic mask).
    """
    II = forms.II.values
    m, k = forms.m, forms.k
    h = max(forms.II.chart.spacing)
    hp = h ** forms.order
    mats = np.moveaxis(II, -1, -3)  # (..., k, m, m)
    comm = 0.0
    for a in range(k):
        for b in range(a + 1, k):
            C = mats[..., a, :, :] @ mats[..., b, :, :] - mats[..., b, :, :] @ mats[..., a, :, :]
            comm = max(comm, float(np.max(np.abs(C[forms.II.valid_slices()]))))
    n0 = float(np.max(np.abs(forms.II0.valid()))) if forms.II0.valid().size else 0.0
    if comm > comm_factor * hp * max(n0, 1e-300) ** 2 and comm > 1e-12:
        raise NonFlatNormalBundle(f"shape operator components do not commute ({comm:.3e})")
    weights = 1.0 / (1.0 + np.arange(k)) + 1e-3 * np.arange(k)
    comb = np.einsum("...aij,a->...ij", mats, weights)
    _, vecs = np.linalg.eigh(comb)
    vals = np.einsum("...il,...aij,...jl->...la", vecs, mats, vecs)  # (..., m, k)
    order_idx = np.argsort(-vals[..., 0], axis=-1, kind="stable")
    vals = np.take_along_axis(vals, order_idx[..., None], axis=-2)
    vecs = np.take_along_axis(vecs, order_idx[..., None, :], axis=-1)
    # sign convention: first nonzero entry of each eigenvector positive
    first = np.argmax(np.abs(vecs) > 1e-12, axis=-2)
    sgn = np.sign(np.take_along_axis(vecs, first[..., None, :], axis=-2))
    sgn[sgn == 0] = 1.0
    vecs = vecs * sgn
    node_scale = np.max(np.abs(II.reshape(II.shape[:-3] + (-1,))), axis=-1)
    gaps = np.min(np.linalg.norm(np.diff(vals, axis=-2), axis=-1), axis=-1) if m > 1 else np.zeros(II.shape[:-3])
    thresh = gap_rtol * np.max(node_scale) + 10.0 * hp
    umbilic = gaps < thresh
    ch = forms.II.chart
    mg = forms.II.margins
    return GridField(ch, vals, mg), GridField(ch, vecs, mg), GridField(ch, umbilic, mg)


def willmore_energy(forms: FundamentalForms):
    """W = integral of |II0|^2 dA; returns (W, density field)."""
    if forms.m != 2:
        raise InvalidArgument("Willmore energy needs m = 2")
    II0 = forms.II0.values
    dens = np.sum(II0 * II0, axis=(-3, -2, -1)) * np.sqrt(np.linalg.det(forms.g.values))
    D = GridField(forms.II0.chart, dens, merge_margins(forms.II0, forms.g))
    return float(integrate(D)), D


def harmonicity_residual(V: SphereCongruence) -> GridField:
    """Norm of d^{D}(*S) = d_x S_x + d_y S_y with S_X = (I - 2 Pi) d_X Pi."""
    if V.m != 2:
        raise InvalidArgument("harmonicity residual needs m = 2")
    Pi = V.projector()
    Nn = Pi.values.shape[-1]
    I = np.eye(Nn)
    total = None
    for j in range(2):
        dP = partial(Pi, j, V.order)
        S = dP.with_values((I - 2.0 * Pi.values) @ dP.values)
        dS = partial(S, j, V.order)
        total = dS if total is None else total + dS
    nrm = np.linalg.norm(total.values, axis=(-2, -1))
    return GridField(V.chart, nrm, total.margins)


def enveloping_residual(V: SphereCongruence) -> float:
    J = jets(V.lift, V.order)
    xi = V.normal_frame.values
    r = 0.0
    for d in J.first:
        pr = np.einsum("...a,...ab->...b", mk.lower(d.values), xi)
        r = max(r, residual_norm(GridField(V.chart, pr, d.margins)))
    return r
