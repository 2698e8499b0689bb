"""GCR data, the flat connection they define, and the residual checks.

Abstract frame order: sigma, Y_1..Y_m, Z, xi_1..xi_k with Gram matrix GF
(<sigma, Z> = -1, Y and xi orthonormal).  A frame field F satisfies
d_j F = F omega_j, so curvature is R_ij = d_i w_j - d_j w_i + [w_i, w_j].

For m = 2 the data live in conformal coordinates z = x + iy:
    sigma_zz + qM sigma = kappa  (normal part),
    ns = <Z, Delta sigma> - 4|kappa|^2  (zero for genuine data).
The Moebius block of the connection is P = 2c I + P0 with
c = -ns/4 - |kappa|^2 and P0 = [[-2 Re q, 2 Im q], [2 Im q, 2 Re q]].
Data may carry a conformal factor u: kappa and H are then taken in the gauge
e^u sigma, and the reconstructed lift has induced metric e^{2u}|dz|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .chart import (Chart, GridField, box_intersection, convergence_order, d_z, d_zbar, merge_margins, partial,
                    residual_norm, valid_box)
from .errors import InvalidArgument


def frame_gram(m: int, k: int) -> np.ndarray:
    N = m + 2 + k
    GF = np.eye(N)
    GF[0, 0] = 0.0
    GF[m + 1, m + 1] = 0.0
    GF[0, m + 1] = -1.0
    GF[m + 1, 0] = -1.0
    return GF


@dataclass(frozen=True)
class ConnectionField:
    chart: Chart
    omega: list
    gram: np.ndarray
    m: int
    k: int

    @property
    def margins(self) -> tuple:
        return merge_margins(*self.omega)

    def skew_defect(self) -> float:
        d = 0.0
        for w in self.omega:
            M = self.gram @ w.values
            d = max(d, float(np.max(np.abs(M + np.swapaxes(M, -1, -2)))))
        return d

    def stacked(self) -> np.ndarray:
        return np.stack([w.values for w in self.omega], axis=-3)


@dataclass(frozen=True)
class GCRData:
    m: int
    n: int
    chart: Chart
    beta: GridField                  # (..., m, k, k): beta[j][a][b] = <d_j xi_b, xi_a>
    u: GridField | None = None       # m = 2 conformal factor
    metric: GridField | None = None  # m = 3 metric
    qM: GridField | None = None      # m = 2
    ns: GridField | None = None      # m = 1, 2
    schouten: GridField | None = None  # m = 3
    kappa: GridField | None = None   # m = 2, (..., k) complex
    II0: GridField | None = None     # m = 3, (..., m, m, k) coordinate components
    A: GridField | None = None       # m = 1, (..., k)
    H: GridField | None = None       # (..., k)
    q20: GridField | None = None     # m = 2 quadratic differential
    order: int = 2

    def __post_init__(self):
        if self.m not in (1, 2, 3):
            raise InvalidArgument("GCR data need m in {1, 2, 3}")
        if self.chart.m != self.m:
            raise InvalidArgument("chart dimension does not match m")
        b = self.beta.values
        if b.shape[-3:] != (self.m, self.k, self.k):
            raise InvalidArgument(f"beta has shape {b.shape[-3:]}, expected {(self.m, self.k, self.k)}")
        if not np.array_equal(b, -np.swapaxes(b, -1, -2)):
            raise InvalidArgument("beta must be antisymmetric in its normal indices")
        need = {1: ("ns", "A"), 2: ("qM", "ns", "kappa"), 3: ("metric", "schouten", "II0")}[self.m]
        for name in need:
            if getattr(self, name) is None:
                raise InvalidArgument(f"m = {self.m} data need field {name!r}")

    @property
    def k(self) -> int:
        return self.n - self.m

    def replace(self, **kw) -> "GCRData":
        return replace(self, **kw)

    def unwrapped(self) -> "GCRData":
        """The same samples on a chart without periodic axes (deformations need not close up)."""
        ch = Chart(self.chart.shape, self.chart.spacing, (False,) * self.m, self.chart.origin)
        kw = {}
        for name in ("beta", "u", "metric", "qM", "ns", "schouten", "kappa", "II0", "A", "H", "q20"):
            f = getattr(self, name)
            if f is not None:
                kw[name] = GridField(ch, f.values, f.margins)
        return replace(self, chart=ch, **kw)

    def window(self, lo, hi) -> "GCRData":
        """Restriction to the index box lo <= i < hi on a chart without periodic axes."""
        ch0 = self.unwrapped().chart
        lo, hi = tuple(int(x) for x in lo), tuple(int(x) for x in hi)
        sl = tuple(slice(a, b) for a, b in zip(lo, hi))
        origin = tuple(o + a * h for o, a, h in zip(ch0.origin, lo, ch0.spacing))
        ch = Chart(tuple(b - a for a, b in zip(lo, hi)), ch0.spacing, (False,) * self.m, origin)
        kw = {}
        for name in ("beta", "u", "metric", "qM", "ns", "schouten", "kappa", "II0", "A", "H", "q20"):
            f = getattr(self, name)
            if f is not None:
                mg = tuple(0 if p else max(0, m - min(a, n - b))
                           for p, m, a, b, n in zip(self.chart.periodic, f.margins, lo, hi, ch0.shape))
                kw[name] = GridField(ch, f.values[sl], mg)
        return replace(self, chart=ch, **kw)

    def u_values(self) -> np.ndarray:
        return np.zeros(self.chart.shape) if self.u is None else self.u.values

    def kappa0(self) -> GridField:
        """kappa in the flat coordinate gauge."""
        return self.kappa.with_values(self.kappa.values * np.exp(-self.u_values())[..., None])

    def H0(self) -> np.ndarray:
        if self.H is None:
            return np.zeros(self.chart.shape + (self.k,))
        if self.m == 2:
            return self.H.values * np.exp(self.u_values())[..., None]
        return self.H.values

    def fields(self) -> list:
        return [f for f in (self.beta, self.u, self.metric, self.qM, self.ns, self.schouten,
                            self.kappa, self.II0, self.A, self.H, self.q20) if f is not None]

    @property
    def margins(self) -> tuple:
        return merge_margins(*self.fields())


def antisymmetrize(b: np.ndarray) -> np.ndarray:
    return 0.5 * (b - np.swapaxes(b, -1, -2))


# ---------------------------------------------------------------------------
# geometry helpers (coordinate tensors for m = 3, trivial for m = 2)

def christoffel(g: GridField, order: int) -> GridField:
    """Gamma[..., p, j, q] = Gamma^p_{jq}."""
    m = g.chart.m
    dg = [partial(g, i, order) for i in range(m)]
    D = np.stack([d.values for d in dg], axis=-3)  # D[..., i, r, q] = d_i g_rq
    ginv = np.linalg.inv(g.values)
    # Gamma_{r j q} = 1/2 (d_j g_rq + d_q g_rj - d_r g_jq)
    low = 0.5 * (np.einsum("...jrq->...rjq", D) + np.einsum("...qrj->...rjq", D) - D)
    Gam = np.einsum("...pr,...rjq->...pjq", ginv, low)
    return GridField(g.chart, Gam, merge_margins(*dg))


def schouten_of_metric(g: GridField, order: int) -> GridField:
    """Schouten tensor (Ric - scal g / (2(m-1))) / (m-2) for m >= 3."""
    m = g.chart.m
    if m < 3:
        raise InvalidArgument("Schouten tensor of a metric needs m >= 3")
    Gam = christoffel(g, order)
    dG = [partial(Gam, i, order) for i in range(m)]
    dGam = np.stack([d.values for d in dG], axis=-4)  # [..., i, p, j, q] = d_i Gamma^p_jq
    G = Gam.values
    # R^p_{jiq}... Ricci_jq = d_p Gamma^p_jq - d_j Gamma^p_pq + Gamma^p_pr Gamma^r_jq - Gamma^p_jr Gamma^r_pq
    ric = (np.einsum("...ppjq->...jq", dGam) - np.einsum("...jppq->...jq", dGam)
           + np.einsum("...ppr,...rjq->...jq", G, G) - np.einsum("...pjr,...rpq->...jq", G, G))
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    ginv = np.linalg.inv(g.values)
    scal = np.einsum("...jq,...jq->...", ginv, ric)
    S = (ric - scal[..., None, None] * g.values / (2.0 * (m - 1))) / (m - 2)
    return GridField(g.chart, S, merge_margins(*dG))


def q_tensor_coords(II: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Q for m >= 3 from coordinate components II[..., j, k, a] and metric g."""
    m = g.shape[-1]
    ginv = np.linalg.inv(g)
    sq = np.einsum("...jpa,...pq,...qka->...jk", II, ginv, II)
    norm2 = np.einsum("...jk,...jk->...", ginv, sq)
    if m == 2:
        return 0.25 * norm2[..., None, None] * g
    return (sq - norm2[..., None, None] * g / (2.0 * (m - 1))) / (m - 2)


def covariant_II(II: GridField, Gam: GridField, beta: GridField, order: int) -> np.ndarray:
    """(nabla_l II)^a_{jk}, returned with shape (..., l, j, k, a)."""
    m = II.chart.m
    dII = np.stack([partial(II, l, order).values for l in range(m)], axis=-4)
    G = Gam.values
    v = II.values
    out = (dII - np.einsum("...plj,...pka->...ljka", G, v) - np.einsum("...plk,...jpa->...ljka", G, v)
           + np.einsum("...lab,...jkb->...ljka", beta.values, v))
    return out


def conormal_from_II(II: GridField, g: GridField, beta: GridField, order: int) -> GridField:
    """(m-1) A_l = g^{jk} (nabla_j II)_{kl} - m d_l H for the II convention <d d sigma, xi>."""
    m = II.chart.m
    Gam = christoffel(g, order)
    nII = covariant_II(II, Gam, beta, order)
    ginv = np.linalg.inv(g.values)
    div = np.einsum("...jk,...jkla->...la", ginv, nII)
    trII = GridField(II.chart, np.einsum("...jk,...jka->...a", ginv, II.values), II.margins)
    dtr = np.stack([partial(trII, l, order).values for l in range(m)], axis=-2)
    A = (div - dtr) / (m - 1)
    mg = merge_margins(II, Gam, beta)
    mg = tuple(x + order // 2 for x in mg)
    return GridField(II.chart, A, mg)


# ---------------------------------------------------------------------------
# assembly

def _block_matrix(m, k, Fco, LC, Pf, IIf, A, beta):
    """omega_j = GF M_j with M_j assembled from its independent blocks.

    Fco[..., j, i]: coframe (d_j = Fco[j, i] e_i); LC[..., j, l, i]; Pf, IIf in
    frame components; A[..., j, a] and beta[..., j, a, b] coordinate 1-forms.
    """
    shp = Fco.shape[:-2]
    N = m + 2 + k
    Z = m + 1
    ys = slice(1, m + 1)
    xs = slice(m + 2, N)
    M = np.zeros(shp + (m, N, N))
    # Y_i coefficient of d_j sigma
    M[..., ys, 0] = Fco
    M[..., 0, ys] = -Fco
    # tangent connection
    M[..., ys, ys] = LC
    # Z row: M[Z, Y_i] = -omega[sigma, Y_i] = -(Fco P)_{ji}
    FP = np.einsum("...jl,...li->...ji", Fco, Pf)
    M[..., Z, ys] = -FP
    M[..., ys, Z] = FP
    # normal-tangent block
    FII = np.einsum("...jl,...lia->...jai", Fco, IIf)
    M[..., xs, ys] = FII
    M[..., ys, xs] = -np.swapaxes(FII, -1, -2)
    # conormal acceleration: omega[sigma, xi_a] = A  ->  M[Z, xi_a] = -A
    M[..., Z, xs] = -A
    M[..., xs, Z] = A
    M[..., xs, xs] = beta
    GF = frame_gram(m, k)
    return np.einsum("ab,...jbc->...jac", GF, M)


def gauge_matrix(H: np.ndarray, m: int, k: int) -> np.ndarray:
    """Abstract frame change to the congruence enveloped with mean curvature H."""
    N = m + 2 + k
    shp = H.shape[:-1]
    P = np.broadcast_to(np.eye(N), shp + (N, N)).copy()
    xs = slice(m + 2, N)
    P[..., 0, m + 1] = 0.5 * np.sum(H * H, axis=-1)
    P[..., xs, m + 1] = -H
    P[..., 0, xs] = -H
    return P


def _conformal_blocks(data: GCRData, order: int):
    """Frame blocks for m = 2 in the flat coordinate gauge."""
    k = data.k
    kap = data.kappa0().values
    q = data.qM.values
    ns = data.ns.values
    shp = data.chart.shape
    c = -0.25 * ns - np.sum(np.abs(kap) ** 2, axis=-1)
    P = np.zeros(shp + (2, 2))
    P[..., 0, 0] = 2 * c - 2 * q.real
    P[..., 1, 1] = 2 * c + 2 * q.real
    P[..., 0, 1] = P[..., 1, 0] = 2 * q.imag
    II = np.zeros(shp + (2, 2, k))
    II[..., 0, 0, :] = 2 * kap.real
    II[..., 1, 1, :] = -2 * kap.real
    II[..., 0, 1, :] = II[..., 1, 0, :] = -2 * kap.imag
    g = GridField(data.chart, np.broadcast_to(np.eye(2), shp + (2, 2)).copy())
    IIf = GridField(data.chart, II, merge_margins(data.kappa, data.u) if data.u is not None else data.kappa.margins)
    A = conormal_from_II(IIf, g, data.beta, order)
    Fco = np.broadcast_to(np.eye(2), shp + (2, 2))
    LC = np.zeros(shp + (2, 2, 2))
    mg = merge_margins(A, data.qM, data.ns, data.beta)
    return Fco, LC, P, II, A.values, mg


def lc_forms(g: GridField, order: int):
    """Levi-Civita forms in the frame e_i = E[p, i] d_p with E = g^{-1/2}: LC[..., j, l, i]."""
    from .congruence import sym_inv_sqrt

    m = g.chart.m
    E = GridField(g.chart, sym_inv_sqrt(g.values), g.margins)
    Gam = christoffel(g, order)
    dE = np.stack([partial(E, j, order).values for j in range(m)], axis=-3)  # [..., j, p, i]
    nab = dE + np.einsum("...pjq,...qi->...jpi", Gam.values, E.values)
    LC = np.einsum("...rl,...rp,...jpi->...jli", E.values, g.values, nab)
    LC = 0.5 * (LC - np.swapaxes(LC, -1, -2))
    return E, LC, merge_margins(Gam, E)


def _metric_blocks(data: GCRData, order: int):
    from .congruence import sym_sqrt

    m = data.m
    g = data.metric
    E, LC, mgLC = lc_forms(g, order)
    Ev = E.values
    Fco = sym_sqrt(g.values)
    II = data.II0.values
    Q = q_tensor_coords(II, g.values)
    Pc = -(data.schouten.values + Q)
    Pf = np.einsum("...pl,...pq,...qi->...li", Ev, Pc, Ev)
    IIf = np.einsum("...pl,...pqa,...qi->...lia", Ev, II, Ev)
    A = conormal_from_II(data.II0, g, data.beta, order)
    mg = merge_margins(A, data.schouten, data.beta, mgLC)
    return Fco, LC, Pf, IIf, A.values, mg


def assemble_connection(data: GCRData, order: int | None = None) -> ConnectionField:
    order = data.order if order is None else order
    m, k = data.m, data.k
    shp = data.chart.shape
    if m == 1:
        Fco = np.ones(shp + (1, 1))
        LC = np.zeros(shp + (1, 1, 1))
        Pf = -data.ns.values[..., None, None]
        IIf = np.zeros(shp + (1, 1, k))
        A = data.A.values[..., None, :]
        mg = merge_margins(data.ns, data.A, data.beta)
    elif m == 2:
        Fco, LC, Pf, IIf, A, mg = _conformal_blocks(data, order)
    else:
        Fco, LC, Pf, IIf, A, mg = _metric_blocks(data, order)
    om = _block_matrix(m, k, Fco, LC, Pf, IIf, A, data.beta.values)
    H = data.H0()
    if data.H is not None and np.any(H != 0):
        Hf = GridField(data.chart, H, data.H.margins)
        Pg = GridField(data.chart, gauge_matrix(H, m, k), Hf.margins)
        Pinv = np.linalg.inv(Pg.values)
        new = []
        for j in range(m):
            dP = partial(Pg, j, order)
            new.append(Pinv @ om[..., j, :, :] @ Pg.values + Pinv @ dP.values)
            mg = merge_margins(mg, dP)
        om = np.stack(new, axis=-3)
    omega = [GridField(data.chart, om[..., j, :, :], mg) for j in range(m)]
    return ConnectionField(data.chart, omega, frame_gram(m, k), m, k)


def curvature(conn: ConnectionField, order: int = 2) -> dict:
    """R_ij = d_i w_j - d_j w_i + [w_i, w_j] for i < j."""
    out = {}
    m = conn.m
    for i in range(m):
        for j in range(i + 1, m):
            wi, wj = conn.omega[i], conn.omega[j]
            a = partial(wj, i, order)
            b = partial(wi, j, order)
            R = a.values - b.values + wi.values @ wj.values - wj.values @ wi.values
            out[(i, j)] = GridField(conn.chart, R, merge_margins(a, b))
    return out


def curvature_norm(conn: ConnectionField, order: int = 2) -> float:
    R = curvature(conn, order)
    if not R:
        return 0.0
    return max(residual_norm(r) for r in R.values())


# ---------------------------------------------------------------------------
# residuals

@dataclass
class ResidualReport:
    fields: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)

    def add(self, name: str, f: GridField):
        self.fields[name] = f
        self.norms[name] = residual_norm(f)

    def max(self) -> float:
        return max(self.norms.values()) if self.norms else 0.0

    def failing(self, tol: float) -> list:
        return [k for k, v in self.norms.items() if not v <= tol]

    def as_dict(self) -> dict:
        return {"norms": {k: float(v) for k, v in self.norms.items()},
                "orders": {k: float(v) for k, v in self.orders.items()}}


def residual_sweep(reports, hs, floor: float = 1e-8) -> dict:
    """Residual norms and measured orders over a sequence of grids (coarse to fine).

    Norms are taken on the intersection of the valid boxes. Residuals whose
    norms all stay below `floor` are exact (order reported as inf).
    """
    out = {}
    for name in reports[0].fields:
        fs = [r.fields[name] for r in reports]
        box = box_intersection(*[valid_box(f) for f in fs])
        pairs = [(h, residual_norm(f, box)) for h, f in zip(hs, fs)]
        if max(p[1] for p in pairs) < floor:
            order = float("inf")
        else:
            order = convergence_order(pairs)
        out[name] = {"norms": [p[1] for p in pairs], "order": order}
    return out


def _zbar_split(b: GridField):
    bz = 0.5 * (b.values[..., 0, :, :] - 1j * b.values[..., 1, :, :])
    bzb = 0.5 * (b.values[..., 0, :, :] + 1j * b.values[..., 1, :, :])
    return bz, bzb


def conformal_system(data: GCRData, order: int | None = None) -> ResidualReport:
    """The m = 2 GCR equations in a conformal coordinate."""
    order = data.order if order is None else order
    ch = data.chart
    kap = data.kappa0()
    kv = kap.values
    Bz, Bzb = _zbar_split(data.beta)
    mgb = data.beta.margins
    dz_k = d_z(kap, order)
    dzb_k = d_zbar(kap, order)
    nab_z_k = dz_k.values + np.einsum("...ab,...b->...a", Bz, kv)
    nab_z_kb = np.conj(dzb_k.values) + np.einsum("...ab,...b->...a", Bz, np.conj(kv))
    nab_zb_k = GridField(ch, dzb_k.values + np.einsum("...ab,...b->...a", Bzb, kv), merge_margins(dzb_k, data.beta))
    dzb_q = d_zbar(data.qM, order)
    eq1 = dzb_q.values - 3 * np.sum(kv * nab_z_kb, axis=-1) - np.sum(np.conj(kv) * nab_z_k, axis=-1)
    rep = ResidualReport()
    rep.add("hG2", GridField(ch, eq1, merge_margins(dzb_q, dz_k, data.beta)))
    d2 = d_zbar(nab_zb_k, order)
    nn = d2.values + np.einsum("...ab,...b->...a", Bzb, nab_zb_k.values)
    eq2 = np.imag(nn + np.conj(data.qM.values)[..., None] * kv)
    rep.add("hC2", GridField(ch, eq2, merge_margins(d2, data.qM)))
    bzf = GridField(ch, Bz, mgb)
    bzbf = GridField(ch, Bzb, mgb)
    R = d_z(bzbf, order).values - d_zbar(bzf, order).values + Bz @ Bzb - Bzb @ Bz
    rhs = 2.0 * (np.einsum("...a,...b->...ba", np.conj(kv), kv) - np.einsum("...a,...b->...ba", kv, np.conj(kv)))
    mgR = tuple(x + order // 2 for x in merge_margins(data.beta, kap))
    rep.add("hR", GridField(ch, R - rhs, mgR))
    rep.add("trace", data.ns)
    return rep


def metric_system(data: GCRData, order: int | None = None) -> ResidualReport:
    """The m = 3 GCR equations (conformal Codazzi, Cotton-York, Ricci) in coordinates."""
    order = data.order if order is None else order
    ch = data.chart
    g = data.metric
    m = 3
    Gam = christoffel(g, order)
    II = data.II0
    nII = covariant_II(II, Gam, data.beta, order)
    A = conormal_from_II(II, g, data.beta, order)
    gv = g.values
    Av = A.values
    hC1 = (nII - np.swapaxes(nII, -4, -3)
           + np.einsum("...jk,...la->...ljka", gv, Av) - np.einsum("...lk,...ja->...ljka", gv, Av))
    rep = ResidualReport()
    mgC = merge_margins(A, Gam, II)
    mgC = tuple(x + order // 2 for x in mgC)
    rep.add("hC1", GridField(ch, hC1, mgC))
    Q = q_tensor_coords(II.values, gv)
    # connection block P = -<d d sigma, Z> = -(schouten + Q)
    P = GridField(ch, -(data.schouten.values + Q), merge_margins(data.schouten, II, g))
    dP = np.stack([partial(P, l, order).values for l in range(m)], axis=-3)  # [l, j, k]
    G = Gam.values
    nP = dP - np.einsum("...plj,...pk->...ljk", G, P.values) - np.einsum("...plk,...jp->...ljk", G, P.values)
    IIv = II.values
    hG2 = (nP - np.swapaxes(nP, -3, -2)
           + np.einsum("...jka,...la->...ljk", IIv, Av) - np.einsum("...lka,...ja->...ljk", IIv, Av))
    rep.add("hG2", GridField(ch, hG2, merge_margins(A, P, Gam, GridField(ch, P.values, tuple(x + order // 2 for x in P.margins)))))
    # Ricci equation
    b = data.beta
    ginv = np.linalg.inv(gv)
    R = []
    for j in range(m):
        for l in range(j + 1, m):
            bj = GridField(ch, b.values[..., j, :, :], b.margins)
            bl = GridField(ch, b.values[..., l, :, :], b.margins)
            curv = partial(bl, j, order).values - partial(bj, l, order).values + bj.values @ bl.values - bl.values @ bj.values
            quad = (np.einsum("...pb,...pq,...qa->...ba", IIv[..., j, :, :], ginv, IIv[..., l, :, :])
                    - np.einsum("...pb,...pq,...qa->...ba", IIv[..., l, :, :], ginv, IIv[..., j, :, :]))
            R.append(curv - quad)
    mgR = tuple(x + order // 2 for x in merge_margins(b, II))
    rep.add("hR", GridField(ch, np.stack(R, axis=-3), mgR))
    S = schouten_of_metric(g, order)
    rep.add("schouten", GridField(ch, data.schouten.values - S.values, merge_margins(S, data.schouten)))
    return rep


def gcr_residuals(data: GCRData, order: int | None = None) -> ResidualReport:
    if data.m == 1:
        return ResidualReport()
    if data.m == 2:
        return conformal_system(data, order)
    return metric_system(data, order)


def hg1_pointwise(nu) -> float:
    """Weyl-flatness predicate for m >= 4: max |<nu_i - nu_j, nu_k - nu_l>| over distinct indices."""
    nu = np.atleast_2d(np.asarray(nu, dtype=float))
    m = nu.shape[0]
    worst = 0.0
    for i in range(m):
        for j in range(m):
            for a in range(m):
                for b in range(m):
                    if len({i, j, a, b}) == 4:
                        worst = max(worst, abs(float(np.dot(nu[i] - nu[j], nu[a] - nu[b]))))
    return worst


# ---------------------------------------------------------------------------
# extraction

def gcr_data_from_lift(lift, order: int = 2, normalize: bool = True) -> GCRData:
    """GCR data of a sampled lift through its central sphere congruence."""
    from . import immersion as im
    from .congruence import central_sphere_congruence, split_connection
    from .mobius_structure import mobius_structure_from_congruence

    m = lift.m
    if m == 2 and normalize:
        lift = im.normalize_gauge(lift, "isothermal", order)
    elif m == 1 and normalize:
        lift = im.normalize_gauge(lift, "arclength", order)
    V = central_sphere_congruence(lift, order)
    forms = split_connection(V)
    ch = lift.chart
    bv = antisymmetrize(forms.beta.values)
    # k <= 1: beta is identically zero, valid everywhere
    beta = GridField(ch, bv, forms.beta.margins if bv.shape[-1] > 1 else (0,) * lift.m)
    if m == 2:
        ms = mobius_structure_from_congruence(V)
        return GCRData(2, lift.n, ch, beta, u=GridField(ch, np.zeros(ch.shape)), qM=ms.qM, ns=ms.ns,
                       kappa=ms.kappa, order=order)
    if m == 1:
        ms = mobius_structure_from_congruence(V)
        A = forms.A.with_values(forms.A.values[..., 0, :])
        return GCRData(1, lift.n, ch, beta, ns=ms.ns, A=A, order=order)
    J = im.jets(lift, order)
    g = im.metric_from_first(J.first)
    xi = V.normal_frame.values
    Z = V.frame.values[..., -1]
    II = np.empty(ch.shape + (3, 3, lift.n - 3))
    Pc = np.empty(ch.shape + (3, 3))
    from .minkowski import lower

    for i in range(3):
        for j in range(i, 3):
            d2 = J.d2(i, j).values
            v = np.einsum("...a,...ab->...b", lower(d2), xi)
            II[..., i, j, :] = II[..., j, i, :] = v
            p = -np.sum(lower(d2) * Z, axis=-1)
            Pc[..., i, j] = Pc[..., j, i] = p
    ginv = np.linalg.inv(g.values)
    H = np.einsum("...jk,...jka->...a", ginv, II) / 3.0
    II0 = II - g.values[..., None] * H[..., None, None, :]
    mg = merge_margins(V.frame, *J.second.values())
    schouten = -Pc - q_tensor_coords(II0, g.values)
    return GCRData(3, lift.n, ch, beta, metric=g, schouten=GridField(ch, schouten, mg),
                   II0=GridField(ch, II0, mg), order=order)
