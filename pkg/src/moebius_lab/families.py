"""Spectral deformations of GCR data, their flat pencils, and isothermic detection.

Quadratic differentials are stored as their (2,0) coefficient q20 in the flat
coordinate gauge, q = q20 dz^2 + conj.  J acts on (2,0) parts as multiplication
by i (J d_x = d_y), so e^{tJ} kappa = e^{it} kappa.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from . import minkowski as mk
from .chart import GridField, d_z, d_zbar, merge_margins, partial, residual_norm
from .errors import InvalidArgument
from .gcr import ConnectionField, GCRData, ResidualReport, _zbar_split, assemble_connection, curvature

NILPOTENT_TOL = 1e-12


def _need_q(data: GCRData) -> GridField:
    if data.q20 is None:
        raise InvalidArgument("data carry no quadratic differential q")
    return data.q20


def t_transform(data: GCRData, r: float) -> GCRData:
    """Isothermic T-transform: qM -> qM + r q20."""
    if data.m != 2:
        raise InvalidArgument("t_transform needs m = 2")
    q = _need_q(data)
    qM = GridField(data.chart, data.qM.values + r * q.values, merge_margins(data.qM, q))
    return data.replace(qM=qM)


def willmore_family(data: GCRData, t: float) -> GCRData:
    """kappa -> e^{it} kappa, qM -> qM + (e^{2it} - 1) q20 / 2 (q20 = 0 if absent)."""
    if data.m != 2:
        raise InvalidArgument("willmore_family needs m = 2")
    kap = data.kappa.with_values(np.exp(1j * t) * data.kappa.values)
    if data.q20 is None:
        return data.replace(kappa=kap)
    dq = 0.5 * (np.exp(2j * t) - 1.0) * data.q20.values
    qM = GridField(data.chart, data.qM.values + dq, merge_margins(data.qM, data.q20))
    return data.replace(kappa=kap, qM=qM)


def mobius_flat_family(data: GCRData, t: float) -> GCRData:
    """II0 -> t II0 and Ms -> Ms + (t^2 - 1) q; for m = 3 the differential q must vanish."""
    if data.m == 2:
        kap = data.kappa.with_values(t * data.kappa.values)
        if data.q20 is None:
            return data.replace(kappa=kap)
        qM = GridField(data.chart, data.qM.values + (t * t - 1.0) * data.q20.values,
                       merge_margins(data.qM, data.q20))
        return data.replace(kappa=kap, qM=qM)
    if data.m == 3:
        if data.q20 is not None and np.any(data.q20.values != 0):
            raise InvalidArgument("the m = 3 Moebius-flat family needs q = 0")
        return data.replace(II0=data.II0.with_values(t * data.II0.values))
    raise InvalidArgument("mobius_flat_family needs m in {2, 3}")


# ---------------------------------------------------------------------------
# pencils in the frame trivialization

def q_components(q20: np.ndarray) -> np.ndarray:
    """Coordinate components q(d_j, d_i) of q20 dz^2 + conj."""
    Q = np.zeros(q20.shape + (2, 2))
    Q[..., 0, 0] = 2 * q20.real
    Q[..., 1, 1] = -2 * q20.real
    Q[..., 0, 1] = Q[..., 1, 0] = -2 * q20.imag
    return Q


def eta_frame(q20: GridField, k: int, trace=None) -> list:
    """Frame matrices of eta with eta_X sigma = 0, eta_X Y = -q(X, Y) sigma, eta_X Z = -q(X, .)^#.

    Frame order (sigma, Y1, Y2, Z, xi_1..xi_k) in the flat gauge; `trace` adds trace * g to q.
    """
    Q = q_components(q20.values)
    if trace is not None:
        Q = Q + np.asarray(trace)[..., None, None] * np.eye(2)
    N = 4 + k
    out = []
    for j in range(2):
        w = np.zeros(q20.chart.shape + (N, N))
        w[..., 0, 1:3] = -Q[..., j, :]
        w[..., 1:3, 3] = -Q[..., j, :]
        out.append(GridField(q20.chart, w, q20.margins))
    return out


def split_S(conn: ConnectionField) -> tuple:
    """omega = D + S with S the blocks pairing V = span(sigma, Y, Z) with its complement."""
    m = conn.m
    N = conn.gram.shape[0]
    inV = np.zeros(N, dtype=bool)
    inV[: m + 2] = True
    mask = inV[:, None] ^ inV[None, :]
    S = [w.with_values(np.where(mask, w.values, 0.0)) for w in conn.omega]
    D = [w.with_values(np.where(mask, 0.0, w.values)) for w in conn.omega]
    return D, S


@dataclass
class PencilSpec:
    kind: str
    params: list
    base: ConnectionField
    forms: dict = field(default_factory=dict)   # "S", "D", "eta"

    def __post_init__(self):
        if self.kind not in ("isothermic", "willmore", "mobius_flat"):
            raise InvalidArgument(f"unknown pencil kind {self.kind!r}")
        eta = self.forms.get("eta")
        if eta is not None:
            check_nilpotent(eta, self.base.m)

    def connection(self, p: float) -> ConnectionField:
        D, S = self.forms["D"], self.forms["S"]
        eta = self.forms.get("eta")
        m = self.base.m
        ch = self.base.chart
        om = []
        for j in range(m):
            if self.kind == "isothermic":
                w = self.base.omega[j].values + (p * eta[j].values if eta is not None else 0.0)
            elif self.kind == "willmore":
                jj = 1 - j
                sgn = 1.0 if j == 0 else -1.0   # (J a)(d_x) = a(d_y), (J a)(d_y) = -a(d_x)
                w = D[j].values + np.cos(p) * S[j].values + sgn * np.sin(p) * S[jj].values
                if eta is not None:
                    w = w + 0.5 * ((np.cos(2 * p) - 1.0) * eta[j].values + sgn * np.sin(2 * p) * eta[jj].values)
            else:
                w = D[j].values + p * S[j].values
                if eta is not None:
                    w = w + (p * p - 1.0) * eta[j].values
            mg = self.base.omega[j].margins if eta is None else merge_margins(self.base.omega[j], eta[j])
            om.append(GridField(ch, w, mg))
        return ConnectionField(ch, om, self.base.gram, m, self.base.k)


def check_nilpotent(eta: list, m: int, tol: float = NILPOTENT_TOL) -> None:
    """eta_j kills sigma, maps V^perp to 0, and its (sigma, Y) block is symmetric."""
    for w in eta:
        v = w.values
        scale = max(1.0, float(np.max(np.abs(v))))
        if np.max(np.abs(v[..., :, 0])) > tol * scale:
            raise InvalidArgument("pencil form does not annihilate sigma")
        if np.max(np.abs(v[..., :, m + 2:])) > tol * scale:
            raise InvalidArgument("pencil form does not vanish on the normal bundle")
        if np.max(np.abs(v[..., 0, 1:m + 1] - v[..., 1:m + 1, m + 1])) > tol * scale:
            raise InvalidArgument("pencil form is not of symmetric nilpotent type")


def make_pencil(kind: str, data: GCRData, params, order: int | None = None, q20: GridField | None = None) -> PencilSpec:
    conn = assemble_connection(data, order)
    D, S = split_S(conn)
    q = data.q20 if q20 is None else q20
    forms = {"D": D, "S": S}
    if q is not None:
        if data.m != 2:
            raise InvalidArgument("pencils with a quadratic differential need m = 2")
        # the Moebius-flat pencil also moves the trace part Q = |II0|^2 g / 4 of the Schouten block
        tr = 2.0 * np.sum(np.abs(data.kappa0().values) ** 2, axis=-1) if kind == "mobius_flat" else None
        forms["eta"] = eta_frame(q, data.k, tr)
    return PencilSpec(kind, list(params), conn, forms)


def pencil_residual(spec: PencilSpec, order: int = 2) -> ResidualReport:
    """Max curvature of the pencil connection at each parameter value."""
    rep = ResidualReport()
    for p in spec.params:
        R = curvature(spec.connection(p), order)
        for (i, j), f in R.items():
            suffix = "" if spec.base.m == 2 else f"_{i}{j}"
            rep.add(f"{spec.kind}[{p:g}]{suffix}", f)
    return rep


def ambient_pencil_residual(eta: list, r_values, order: int = 2) -> dict:
    """Curvature r d eta + r^2 [eta_0, eta_1] of d + r eta in the ambient trivialization."""
    if len(eta) != 2:
        raise InvalidArgument("ambient pencils are implemented on surfaces")
    a = partial(eta[1], 0, order)
    b = partial(eta[0], 1, order)
    deta = a.values - b.values
    comm = eta[0].values @ eta[1].values - eta[1].values @ eta[0].values
    mg = merge_margins(a, b)
    out = {}
    for r in r_values:
        out[float(r)] = residual_norm(GridField(eta[0].chart, r * deta + r * r * comm, mg))
    return out


def build_eta(lift, q20, order: int = 2) -> list:
    """eta_j = sum_i q(d_j, e_i) sigma ^ e_i in the flat gauge (ambient matrices)."""
    from .congruence import sym_inv_sqrt
    from .immersion import induced_metric, normalize_gauge

    if lift.m != 2:
        raise InvalidArgument("build_eta needs a surface")
    fl = normalize_gauge(lift, "isothermal", order)
    d = [partial(fl.sigma, i, order) for i in range(2)]
    g = induced_metric(fl, order).g
    E = sym_inv_sqrt(g.values)
    e = np.einsum("...pi,...pa->...ia", E, np.stack([x.values for x in d], axis=-2))
    qv = q20.values if isinstance(q20, GridField) else np.broadcast_to(np.asarray(q20, dtype=complex), lift.chart.shape)
    Q = q_components(np.asarray(qv))
    s = fl.sigma.values
    mg = merge_margins(g, *d)
    out = []
    for j in range(2):
        w = sum(Q[..., j, i, None, None] * mk.wedge_action(s, e[..., i, :]) for i in range(2))
        out.append(GridField(lift.chart, w, mg))
    return out


# ---------------------------------------------------------------------------
# detection and constrained Willmore

@dataclass
class IsothermicResult:
    residual: GridField        # Laplacian of arg(kappa) / 4, umbilics masked to 0
    mask: np.ndarray           # True off umbilics
    inconclusive: bool
    q20: GridField | None
    is_isothermic: bool


def isothermic_detect(data: GCRData, tol: float | None = None, umbilic_rtol: float = 1e-6,
                      order: int | None = None) -> IsothermicResult:
    """Ribaucour test for the central congruence: arg(kappa) harmonic off umbilics.

    If it is, q20 = e^L kappa with dL = -2 Re(d_zbar log kappa dzbar) integrated from the base node.
    """
    if data.m != 2 or data.k != 1:
        raise InvalidArgument("isothermic_detect needs m = 2, k = 1")
    order = data.order if order is None else order
    ch = data.chart
    kap = data.kappa0()
    kv = kap.values[..., 0]
    ak = np.abs(kv)
    vmax = float(np.max(ak[kap.valid_slices()])) if ak.size else 0.0
    mask = ak > umbilic_rtol * max(vmax, 1e-300)
    if vmax == 0.0 or not np.any(mask[kap.valid_slices()]):
        zero = GridField(ch, np.zeros(ch.shape), kap.margins)
        return IsothermicResult(zero, mask, True, None, False)
    safe = np.where(mask, kv, 1.0)
    kf = GridField(ch, safe, kap.margins)
    kz = d_z(kf, order)
    kzb = d_zbar(kf, order)
    kzzb = d_z(kzb, order)
    # Im d_z d_zbar log kappa = Im(kappa_zzb / kappa - kappa_z kappa_zb / kappa^2)
    res = np.imag(kzzb.values / safe - kz.values * kzb.values / safe**2)
    res = np.where(mask, res, 0.0)
    R = GridField(ch, res, merge_margins(kzzb, kz))
    h = max(ch.spacing)
    tol = 1e-6 + h**order if tol is None else tol
    # umbilic-dominated if fewer than half the valid nodes survive the mask
    frac = float(np.mean(mask[R.valid_slices()]))
    inconclusive = frac < 0.5
    iso = (not inconclusive) and residual_norm(R) <= tol
    q = None
    if iso:
        Phi = kzb.values / safe
        Lx = -2.0 * Phi.real
        Ly = -2.0 * Phi.imag
        sl = kzb.valid_slices()
        L = np.zeros(ch.shape)
        sub = np.zeros(tuple(s.stop - s.start for s in sl))
        lx = Lx[sl]
        ly = Ly[sl]
        sub[:, 0] = cumulative_simpson(lx[:, 0], dx=ch.spacing[0], initial=0.0)
        sub[:, 1:] = sub[:, :1] + cumulative_simpson(ly, dx=ch.spacing[1], axis=1, initial=0.0)[:, 1:]
        L[sl] = sub
        q = GridField(ch, np.exp(L) * kv, kzb.margins)
    return IsothermicResult(R, mask, inconclusive, q, iso)


def willmore_residual(data: GCRData, q20=None, order: int | None = None) -> GridField:
    """Re(nabla_zbar nabla_zbar kappa + (conj qM - conj q20) kappa): the constrained Willmore equation."""
    if data.m != 2:
        raise InvalidArgument("willmore_residual needs m = 2")
    order = data.order if order is None else order
    ch = data.chart
    kap = data.kappa0()
    kv = kap.values
    _, Bzb = _zbar_split(data.beta)
    dzb = d_zbar(kap, order)
    nab = GridField(ch, dzb.values + np.einsum("...ab,...b->...a", Bzb, kv), merge_margins(dzb, data.beta))
    d2 = d_zbar(nab, order)
    nn = d2.values + np.einsum("...ab,...b->...a", Bzb, nab.values)
    if q20 is None:
        q20 = data.q20
    qv = 0.0 if q20 is None else (q20.values if isinstance(q20, GridField) else np.asarray(q20))
    mult = np.conj(data.qM.values - qv)
    return GridField(ch, np.real(nn + mult[..., None] * kv), merge_margins(d2, data.qM))
