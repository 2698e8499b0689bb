"""Moebius structures in dimensions 1 and 2.

For surfaces in a conformal coordinate z and the flat gauge |d sigma|^2 = |dz|^2:
    qM = <sigma_zz, Z>,  kappa^a = <sigma_zz, xi_a>,
    ns = <Z, sigma_xx + sigma_yy> - 4 |kappa|^2,
the last one being the trace equation (it vanishes for a genuine lift).
For curves in the arclength gauge ns = <sigma'', Z> (= kappa^2 / 2 in R^n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import minkowski as mk
from .chart import GridField, d_z, merge_margins, partial, partial2
from .errors import CriticalPoint, GaugeError, InvalidArgument

VERTEX_RTOL = 1e-6


@dataclass(frozen=True)
class MobiusStructureField:
    m: int
    ns: GridField | None = None
    qM: GridField | None = None
    schouten: GridField | None = None
    kappa: GridField | None = None


@dataclass(frozen=True)
class QuadraticDifferential:
    q20: GridField


@dataclass(frozen=True)
class ConormalAcceleration:
    A: GridField


def _check_flat_gauge(g: GridField, tol: float) -> None:
    gv = g.valid()
    m = gv.shape[-1]
    dev = float(np.max(np.abs(gv - np.eye(m))))
    if dev > tol:
        raise GaugeError(f"lift is not in the flat coordinate gauge (max |g - I| = {dev:.3e})")


def mobius_structure_from_congruence(V, tol: float | None = None) -> MobiusStructureField:
    from .immersion import conformality_tolerance, jets, metric_from_first

    lift = V.lift
    m = lift.m
    J = jets(lift, V.order)
    g = metric_from_first(J.first)
    tol = conformality_tolerance(lift.chart, V.order) if tol is None else tol
    _check_flat_gauge(g, tol)
    Z = V.frame.values[..., -1]
    xi = V.normal_frame.values
    mg = merge_margins(V.frame, *J.second.values())
    if m == 1:
        s2 = J.d2(0, 0).values
        ns = mk.inner(Z, s2)
        return MobiusStructureField(1, ns=GridField(lift.chart, ns, mg))
    if m != 2:
        raise InvalidArgument("mobius_structure_from_congruence needs m in {1, 2}")
    sxx, syy, sxy = J.d2(0, 0).values, J.d2(1, 1).values, J.d2(0, 1).values
    szz = 0.25 * (sxx - syy - 2j * sxy)
    Zl = mk.lower(Z)
    q = np.sum(Zl * szz, axis=-1)
    kap = np.einsum("...a,...ab->...b", mk.lower(szz.real), xi) + 1j * np.einsum(
        "...a,...ab->...b", mk.lower(szz.imag), xi)
    ns = np.sum(Zl * (sxx + syy), axis=-1) - 4.0 * np.sum(np.abs(kap) ** 2, axis=-1)
    ch = lift.chart
    return MobiusStructureField(2, ns=GridField(ch, ns, mg), qM=GridField(ch, q, mg),
                                kappa=GridField(ch, kap, mg))


def _deriv(f: GridField, order: int) -> GridField:
    return partial(f, 0, order) if f.chart.m == 1 else d_z(f, order)


def schwarzian(w: GridField, order: int = 2) -> GridField:
    """S(w) = (w''/w')' - (w''/w')^2 / 2 along the chart coordinate (z for m = 2)."""
    if w.chart.m not in (1, 2):
        raise InvalidArgument("schwarzian needs m in {1, 2}")
    w1 = _deriv(w, order)
    a = np.abs(w1.valid())
    if np.any(a < 1e-12 * max(float(np.max(a)), 1e-300)):
        raise CriticalPoint("w' vanishes on the valid region")
    w2 = _deriv(w1, order)
    r = w2.with_values(w2.values / w1.values)
    r1 = _deriv(r, order)
    return GridField(w.chart, r1.values - 0.5 * r.values**2, r1.margins)


def hill_apply(ns: GridField, f: GridField, order: int = 2) -> GridField:
    """Hill operator f'' + ns f / 2 on a 1-dimensional chart."""
    if f.chart.m != 1:
        raise InvalidArgument("Hill operator needs m = 1")
    f2 = partial2(f, 0, order)
    return GridField(f.chart, f2.values + 0.5 * ns.values * f.values, merge_margins(f2, ns))


def mq_of_gauge(ns: GridField, f: GridField, order: int = 2) -> GridField:
    """Mq(f^2) = -4 f^3 (Hill f)."""
    h = hill_apply(ns, f, order)
    return h.with_values(-4.0 * f.values**3 * h.values)


def mq_direct(ns: GridField, ell: GridField, order: int = 2) -> GridField:
    """Mq(l) = (l')^2 - 2 l l'' - 2 ns l^2, evaluated without the square root."""
    d1 = partial(ell, 0, order)
    d2 = partial2(ell, 0, order)
    v = d1.values**2 - 2.0 * ell.values * d2.values - 2.0 * ns.values * ell.values**2
    return GridField(ell.chart, v, merge_margins(d1, d2, ns))


def developing_map(c: float, x):
    """Developing map of the constant-ns projective structure; poles map to inf."""
    x = np.asarray(x, dtype=float)
    if c > 0:
        s = np.sqrt(c)
        cs = np.cos(s * x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(np.abs(cs) < 1e-15, np.inf, np.sin(s * x) / (s * cs))
        return out if out.ndim else float(out)
    if c == 0:
        return x if x.ndim else float(x)
    s = np.sqrt(-c)
    out = np.tanh(s * x) / s
    return out if out.ndim else float(out)


def q_tensor(II0, m: int | None = None) -> np.ndarray:
    """Q from frame components II0[..., i, j, a] (normalized gauge, g = I)."""
    II0 = np.asarray(II0)
    m = II0.shape[-2] if m is None else m
    if m == 1:
        return np.zeros(II0.shape[:-3] + (1, 1))
    sq = np.einsum("...ipa,...pja->...ij", II0, II0)
    n2 = np.trace(sq, axis1=-2, axis2=-1)
    eye = np.eye(m)
    if m == 2:
        return 0.25 * n2[..., None, None] * eye
    return (sq - n2[..., None, None] * eye / (2.0 * (m - 1))) / (m - 2)


def conormal_acceleration(V, forms) -> ConormalAcceleration:
    """A in frame components from the divergence of II (m >= 2)."""
    from .congruence import sym_sqrt
    from .gcr import conormal_from_II

    m = forms.m
    if m < 2:
        raise InvalidArgument("conormal acceleration from II needs m >= 2; use curve_invariants")
    F = sym_sqrt(forms.g.values)
    IIc = np.einsum("...jl,...ki,...lia->...jka", F, F, forms.II.values)
    IIf = GridField(forms.II.chart, IIc, forms.II.margins)
    A = conormal_from_II(IIf, forms.g, forms.beta, forms.order)
    Af = np.einsum("...ji,...ja->...ia", forms.E.values, A.values)
    return ConormalAcceleration(A.with_values(Af))


@dataclass(frozen=True)
class CurveInvariants:
    ns: GridField
    A: GridField               # normal-frame components in the arclength gauge
    arclength_density: GridField
    vertex_mask: GridField
    kappa: GridField | None = None   # Frenet curvature of the projected curve
    tau: GridField | None = None
    A_frenet: GridField | None = None  # |kappa'|^2 + kappa^2 tau^2, square-rooted

    @property
    def conformal_arclength(self) -> float:
        from .chart import integrate

        return float(integrate(self.arclength_density))


def curve_invariants(lift, order: int = 2, frenet: bool = True) -> CurveInvariants:
    from . import immersion as im
    from .congruence import central_sphere_congruence, split_connection

    if lift.m != 1:
        raise InvalidArgument("curve invariants need m = 1")
    al = im.normalize_gauge(lift, "arclength", order)
    V = central_sphere_congruence(al, order)
    ms = mobius_structure_from_congruence(V)
    forms = split_connection(V)
    A = forms.A.with_values(forms.A.values[..., 0, :])
    normA = np.linalg.norm(A.values, axis=-1)
    dens = A.with_values(np.sqrt(normA))
    vmax = float(np.max(normA[A.valid_slices()])) if normA.size else 0.0
    mask = A.with_values(normA <= VERTEX_RTOL * vmax)
    kap = tau = Af = None
    if frenet and lift.n >= 2:
        x = mk.stereo_project(lift.sigma.values)
        X = GridField(lift.chart, x)
        d1 = partial(X, 0, order)
        d2 = partial(d1, 0, order)
        d3 = partial(d2, 0, order)
        v1, v2, v3 = d1.values, d2.values, d3.values
        sp = np.linalg.norm(v1, axis=-1)
        # kappa = |x' ^ x''| / |x'|^3 via the Gram determinant
        g11 = np.sum(v1 * v1, -1)
        g12 = np.sum(v1 * v2, -1)
        g22 = np.sum(v2 * v2, -1)
        cross2 = np.maximum(g11 * g22 - g12**2, 0.0)
        kv = np.sqrt(cross2) / sp**3
        if x.shape[-1] == 3:
            c = np.cross(v1, v2)
            with np.errstate(divide="ignore", invalid="ignore"):
                tv = np.where(cross2 > 1e-20, np.sum(c * v3, -1) / cross2, 0.0)
        else:
            tv = np.zeros_like(kv)
        K = GridField(lift.chart, kv, d2.margins)
        dk = partial(K, 0, order)
        kap = K
        tau = GridField(lift.chart, tv, d3.margins)
        Af = GridField(lift.chart, np.sqrt((dk.values / sp) ** 2 + (kv * tv) ** 2), merge_margins(dk, d3))
    return CurveInvariants(ms.ns, A, dens, mask, kap, tau, Af)
