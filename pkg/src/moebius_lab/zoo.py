"""Closed-form test surfaces and curves with known conformal invariants.

Every surface generator returns a Fixture holding the sampled lift and, where
a closed form is available, the GCR data in the canonical flat gauge.  Patch
fixtures (non-periodic axes) use spacing L/N with N + 1 nodes per axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import fixed_quad
from scipy.linalg import expm

from . import minkowski as mk
from .chart import Chart, GridField, partial, residual_norm
from .errors import DomainError, InvalidArgument, NotImmersed
from .gcr import GCRData
from .immersion import LightConeLift, lift_from_values


@dataclass
class Fixture:
    name: str
    lift: LightConeLift | None
    data: GCRData | None = None
    extras: dict = field(default_factory=dict)


def _axis(n_nodes_periodic: int, length: float, periodic: bool, origin: float = 0.0):
    if periodic:
        return n_nodes_periodic, length / n_nodes_periodic, origin
    return n_nodes_periodic + 1, length / n_nodes_periodic, origin


def patch_chart(N, lengths, periodic, origin) -> Chart:
    """Chart with spacing L/N per axis (N nodes if periodic, N + 1 otherwise)."""
    m = len(lengths)
    Ns = [N] * m if np.isscalar(N) else list(N)
    shape, spacing, orig = [], [], []
    for n, L, p, o in zip(Ns, lengths, periodic, origin):
        s, h, o = _axis(n, L, p, o)
        shape.append(s)
        spacing.append(h)
        orig.append(o)
    return Chart(tuple(shape), tuple(spacing), tuple(periodic), tuple(orig))


def _zero_beta(chart, m, k):
    return GridField(chart, np.zeros(chart.shape + (m, k, k)))


def _const(chart, v, dtype=float, shape=()):
    return GridField(chart, np.full(chart.shape + shape, v, dtype=dtype))


def flat_data(chart, n=3, kappa=0.0, qM=0.0, q20=None) -> GCRData:
    k = n - 2
    kap = np.zeros(chart.shape + (k,), dtype=complex)
    kap[..., 0] = kappa
    return GCRData(2, n, chart, _zero_beta(chart, 2, k), u=_const(chart, 0.0), qM=_const(chart, qM, complex),
                   ns=_const(chart, 0.0), kappa=GridField(chart, kap),
                   q20=None if q20 is None else _const(chart, q20, complex))


# ---------------------------------------------------------------------------
# surfaces in S^3 (n = 3)

def plane(N=32, L=2.0) -> Fixture:
    ch = patch_chart(N, (L, L), (False, False), (-L / 2, -L / 2))
    x, y = ch.mesh()
    X = np.stack([x, y, np.zeros_like(x)], axis=-1)
    lift = lift_from_values(mk.stereo_lift(X), ch)
    return Fixture("plane", lift, flat_data(ch))


def plane_reparam(N=32) -> Fixture:
    """The plane through w = z^2 on a chart away from the critical point."""
    ch = patch_chart(N, (1.0, 1.0), (False, False), (1.0, -0.5))
    x, y = ch.mesh()
    z = x + 1j * y
    w = z**2
    X = np.stack([w.real, w.imag, np.zeros_like(x)], axis=-1)
    lift = lift_from_values(mk.stereo_lift(X), ch)
    return Fixture("plane_z2", lift, extras={"z": z, "qM": -0.75 / z**2, "w": w})


def sphere(N=32) -> Fixture:
    """Round sphere in Mercator coordinates, sigma = e_0 + x."""
    ch = patch_chart(N, (2 * np.pi, 2 * np.pi), (False, True), (-np.pi, 0.0))
    u, v = ch.mesh()
    s = np.zeros(ch.shape + (5,))
    s[..., 0] = 1.0
    s[..., 1] = np.cos(v) / np.cosh(u)
    s[..., 2] = np.sin(v) / np.cosh(u)
    s[..., 3] = np.tanh(u)
    return Fixture("sphere", lift_from_values(s, ch), flat_data(ch, qM=-0.25))


def cylinder(r=1.0, N=32, L=2 * np.pi) -> Fixture:
    """(r cos(x/r), r sin(x/r), y): kappa = 1/(4r), qM = 1/(8r^2), isothermic with q20 = kappa."""
    ch = patch_chart(N, (2 * np.pi * r, L), (True, False), (0.0, -L / 2))
    x, y = ch.mesh()
    X = np.stack([r * np.cos(x / r), r * np.sin(x / r), y], axis=-1)
    lift = lift_from_values(mk.stereo_lift(X), ch)
    k0 = 1.0 / (4 * r)
    return Fixture("cylinder", lift, flat_data(ch, kappa=k0, qM=1.0 / (8 * r * r), q20=k0),
                   extras={"r": r, "H": 1.0 / (2 * r)})


def clifford_torus(N=32) -> Fixture:
    ch = patch_chart(N, (2 * np.pi, 2 * np.pi), (True, True), (0.0, 0.0))
    a, b = ch.mesh()
    s = np.stack([np.full_like(a, np.sqrt(2.0)), np.cos(a), np.sin(a), np.cos(b), np.sin(b)], axis=-1)
    return Fixture("clifford", lift_from_values(s, ch), extras={"willmore": 4 * np.pi**2})


def catenoid(N=32, U=1.0) -> Fixture:
    """(cosh u cos v, cosh u sin v, u), u in [-U, U]; minimal, so Willmore with q = 0."""
    ch = patch_chart(N, (2 * U, 2 * np.pi), (False, True), (-U, 0.0))
    u, v = ch.mesh()
    X = np.stack([np.cosh(u) * np.cos(v), np.cosh(u) * np.sin(v), u], axis=-1)
    return Fixture("catenoid", lift_from_values(mk.stereo_lift(X), ch), extras={"H": 0.0})


def cone(N=32, alpha=0.6, U=1.0) -> Fixture:
    """Cone of revolution in the conformal chart rho = exp(u sin alpha): not CMC."""
    ch = patch_chart(N, (2 * U, 2 * np.pi), (False, True), (-U, 0.0))
    u, v = ch.mesh()
    rho = np.exp(u * np.sin(alpha))
    X = np.stack([rho * np.sin(alpha) * np.cos(v), rho * np.sin(alpha) * np.sin(v), rho * np.cos(alpha)], axis=-1)
    return Fixture("cone", lift_from_values(mk.stereo_lift(X), ch))


def holomorphic_graph(N=32, L=1.0, c=0.4) -> Fixture:
    """(z, c z^2) in R^4 = C^2: a minimal surface with k = 2."""
    ch = patch_chart(N, (L, L), (False, False), (-L / 2, -L / 2))
    x, y = ch.mesh()
    z = x + 1j * y
    f = c * z**2 + 0.2 * z**3
    X = np.stack([x, y, f.real, f.imag], axis=-1)
    return Fixture("holomorphic_graph", lift_from_values(mk.stereo_lift(X), ch))


def _gl_integral(f, t0, t1, n=80):
    """Gauss-Legendre integral of an analytic integrand, accurate to roundoff for smooth f."""
    return fixed_quad(f, t0, t1, n=n)[0]


def _arc_inverse(speed, t0, s_nodes, t_guess=None):
    """Parameters t with int_{t0}^t speed = s, by Newton on the Gauss-Legendre integral.

    Accurate to a few ulps, so finite differences of the sampled fixture see no solver noise.
    """
    out = np.empty_like(np.asarray(s_nodes, dtype=float))
    t = t0
    for i, s in enumerate(s_nodes):
        if t_guess is not None:
            t = t_guess[i]
        for _ in range(60):
            step = (_gl_integral(speed, t0, t) - s) / speed(t)
            t -= step
            if abs(step) <= 4e-16 * max(1.0, abs(t)):
                break
        out[i] = t
    return out


def hopf_torus(N=32, L=2.0, eps=0.3, theta0=1.2, lobes=1) -> Fixture:
    """Hopf cylinder over theta(psi) = theta0 + eps sin(lobes psi) on S^2.

    Flat, conformal in (s, phi); neither isothermic nor Moebius-flat for eps != 0.
    """
    ch = patch_chart(N, (L, 2 * np.pi), (False, True), (0.0, 0.0))
    th = lambda p: theta0 + eps * np.sin(lobes * p)
    dth = lambda p: eps * lobes * np.cos(lobes * p)
    speed = lambda p: 0.5 * np.sqrt(dth(p) ** 2 + np.sin(th(p)) ** 2)
    svals = ch.axis_coords(0)
    psi = _arc_inverse(speed, 0.0, svals)
    alpha = np.array([-_gl_integral(lambda p: np.sin(th(p) / 2) ** 2, 0.0, ps) for ps in psi])
    t = th(psi)
    H = np.stack([np.exp(1j * alpha) * np.cos(t / 2), np.exp(1j * (alpha + psi)) * np.sin(t / 2)], axis=-1)
    phi = ch.axis_coords(1)
    X = np.exp(1j * phi)[None, :, None] * H[:, None, :]
    s = np.stack([np.ones(ch.shape), X[..., 0].real, X[..., 0].imag, X[..., 1].real, X[..., 1].imag], axis=-1)
    return Fixture("hopf_torus", lift_from_values(s, ch))


# ---------------------------------------------------------------------------
# quadrics and confocal coordinates

QUADRIC_A = (0.0, 1.0, 2.0, 3.0, 4.0)


def _fprime(a):
    a = np.asarray(a, dtype=float)
    return np.array([np.prod([ai - aj for aj in a if aj != ai]) for ai in a])


def quadric_point(u, a=QUADRIC_A, c=-1.0):
    """Null vector with coordinates x_i^2 = +-c prod_j (u_j - a_i)/f'(a_i)."""
    a = np.asarray(a, dtype=float)
    if len(set(a.tolist())) != 5:
        raise DomainError("quadric eigenvalues must be distinct")
    u = np.asarray(u, dtype=float)
    fp = _fprime(a)
    x2 = np.stack([c * np.prod(u - ai, axis=-1) / fpi for ai, fpi in zip(a, fp)], axis=-1)
    x2[..., 0] *= -1.0
    if np.any(x2 < 0):
        raise DomainError("sign-infeasible parameter region (negative x_i^2)")
    return np.sqrt(x2)


def quadric_f(t, a=QUADRIC_A):
    return np.prod([t - ai for ai in a], axis=0)


def s3_metric(u, a=QUADRIC_A):
    """Diagonal coefficients of the confocal representative metric."""
    u = np.asarray(u, dtype=float)
    out = []
    for i in range(3):
        j, k = [x for x in range(3) if x != i]
        out.append((u[..., j] - u[..., i]) * (u[..., k] - u[..., i]) / quadric_f(u[..., i], a))
    return np.stack(out, axis=-1)


def _interval_of(u, a):
    srt = sorted(a)
    for lo, hi in zip(srt[:-1], srt[1:]):
        if lo < u < hi:
            return lo, hi
    raise DomainError("parameter outside the bounded intervals between eigenvalues")


def _curvature_line_coordinate(u3, lo, hi, th_range, N, a):
    """u = mid - w cos(theta) with ds/dtheta analytic across the roots of f.

    Returns (u at the N + 1 nodes of s, total length).
    """
    mid, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
    others = [x for x in a if x not in (lo, hi)]

    def dsdth(th):
        u = mid - w * np.cos(th)
        R = np.prod([u - x for x in others], axis=0)
        return np.sqrt(np.abs((u3 - u) / (4.0 * R)))

    t0, t1 = th_range
    L = _gl_integral(dsdth, t0, t1)
    th = _arc_inverse(dsdth, t0, np.linspace(0.0, L, N + 1))
    return mid - w * np.cos(th), L


def quadric(N=32, u3=3.5, th1=(0.1 * np.pi, 0.6 * np.pi), th2=(0.4 * np.pi, 0.9 * np.pi),
            a=QUADRIC_A, c=-1.0, u1_interval=(1.0, 2.0), u2_interval=(2.0, 3.0)) -> Fixture:
    """Quadric u3 = const in conformal curvature-line coordinates (s1, s2).

    ds_i^2 = |(u3 - u_i)/(4 f(u_i))| du_i^2, so the induced metric is -c (u2 - u1)(ds1^2 + ds2^2);
    the chart coordinates are lam * s_i with one dilation lam for both axes.
    Each u_i = mid - w cos(theta_i) runs inside its interval between consecutive eigenvalues.
    """
    a = tuple(float(x) for x in a)
    if len(set(a)) != 5:
        raise DomainError("quadric eigenvalues must be distinct")
    _interval_of(u3, a)
    for iv in (u1_interval, u2_interval):
        if iv[0] not in a or iv[1] not in a or [x for x in a if iv[0] < x < iv[1]]:
            raise DomainError("u intervals must lie between consecutive eigenvalues")
    if not (u1_interval[1] <= u2_interval[0] and u2_interval[1] <= u3):
        raise DomainError("u1 < u2 < u3 must lie in disjoint intervals")
    u1, L1 = _curvature_line_coordinate(u3, *u1_interval, th1, N, a)
    u2, L2 = _curvature_line_coordinate(u3, *u2_interval, th2, N, a)
    # a common dilation of both coordinates keeps them conformal; longest side 2 pi
    lam = 2 * np.pi / max(L1, L2)
    ch = patch_chart(N, (lam * L1, lam * L2), (False, False), (0.0, 0.0))
    U1, U2 = np.meshgrid(u1, u2, indexing="ij")
    U = np.stack([U1, U2, np.full_like(U1, u3)], axis=-1)
    s = quadric_point(U, a, c)
    lift = lift_from_values(s, ch)
    return Fixture("quadric", lift, extras={"u": U, "a": a, "c": c, "q20": 0.5,
                                            "conformal_factor": -c * (U2 - U1) / lam**2, "dilation": lam})


def confocal_chart(N=16, box=((1.3, 1.7), (2.3, 2.7), (3.3, 3.7)), a=QUADRIC_A, c=-1.0) -> Fixture:
    """The m = 3 chart (u1, u2, u3) of S^3 by confocal quadrics."""
    lengths = [b[1] - b[0] for b in box]
    ch = patch_chart(N, lengths, (False,) * 3, [b[0] for b in box])
    U = np.stack(ch.mesh(), axis=-1)
    s = quadric_point(U, a, c)
    return Fixture("confocal", lift_from_values(s, ch), extras={"u": U, "a": a, "c": c})


def cartesian_chart(N=12, L=1.0) -> Fixture:
    ch = patch_chart(N, (L, L, L), (False,) * 3, (-L / 2,) * 3)
    X = np.stack(ch.mesh(), axis=-1)
    return Fixture("cartesian", lift_from_values(mk.stereo_lift(X), ch))


def sheared_chart(N=12, L=1.0, shear=0.3) -> Fixture:
    ch = patch_chart(N, (L, L, L), (False,) * 3, (-L / 2,) * 3)
    x, y, z = ch.mesh()
    X = np.stack([x + shear * y, y, z], axis=-1)
    return Fixture("sheared", lift_from_values(mk.stereo_lift(X), ch))


def dupin_orthogonal_check(lift: LightConeLift, order: int = 2, ortho_tol: float | None = None) -> float:
    """max over distinct i, j, k of |<d_j d_k sigma, d_i sigma>| / (|d_i sigma| |d_j sigma| |d_k sigma|)."""
    from .chart import hessian

    if lift.m != 3:
        raise InvalidArgument("needs an m = 3 chart")
    d = [partial(lift.sigma, i, order) for i in range(3)]
    nrm = [np.sqrt(mk.inner(x.values, x.values)) for x in d]
    h = max(lift.chart.spacing)
    tol = 1e-6 + 50 * h**order if ortho_tol is None else ortho_tol
    for i in range(3):
        for j in range(i + 1, 3):
            c = GridField(lift.chart, mk.inner(d[i].values, d[j].values) / (nrm[i] * nrm[j]),
                          tuple(max(a, b) for a, b in zip(d[i].margins, d[j].margins)))
            if residual_norm(c) > tol:
                raise InvalidArgument(f"coordinate fields {i}, {j} are not orthogonal ({residual_norm(c):.3e})")
    worst = 0.0
    for i in range(3):
        j, k = [x for x in range(3) if x != i]
        djk = hessian(lift.sigma, j, k, order)
        r = mk.inner(djk.values, d[i].values) / (nrm[i] * nrm[j] * nrm[k])
        mg = tuple(max(a, b) for a, b in zip(djk.margins, d[i].margins))
        worst = max(worst, residual_norm(GridField(lift.chart, r, mg)))
    return worst


# ---------------------------------------------------------------------------
# products of curves

def product_of_curves(g1, g2, chart: Chart, tol: float = 1e-6) -> Fixture:
    """sigma = gamma_1 + gamma_2 with gamma_1 in R^{k,1} (<,> = -1) and gamma_2 in a unit sphere.

    g1: array (N1, k+2) sampled on axis 0; g2: array (N2, n-k+1) sampled on axis 1.
    Returns the lift and eta = sigma ^ (d gamma_1 - d gamma_2) (matrices per axis).
    """
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    n1, n2 = g1.shape[-1], g2.shape[-1]
    N = n1 + n2
    G1 = GridField(Chart((chart.shape[0],), (chart.spacing[0],), (chart.periodic[0],), (chart.origin[0],)), g1)
    G2 = GridField(Chart((chart.shape[1],), (chart.spacing[1],), (chart.periodic[1],), (chart.origin[1],)), g2)
    d1 = partial(G1, 0, 4)
    d2 = partial(G2, 0, 4)
    sp1 = -d1.values[..., 0] ** 2 + np.sum(d1.values[..., 1:] ** 2, -1)
    sp2 = np.sum(d2.values**2, -1)
    if np.max(np.abs(sp2[d2.valid_slices()])) < 1e-10 or np.max(np.abs(sp1[d1.valid_slices()])) < 1e-10:
        raise NotImmersed("a factor curve is constant")
    h = max(chart.spacing)
    if max(np.max(np.abs(sp1[d1.valid_slices()] - 1)), np.max(np.abs(sp2[d2.valid_slices()] - 1))) > tol + 50 * h**4:
        raise InvalidArgument("factor curves must be unit speed")
    s = np.zeros(chart.shape + (N,))
    s[..., :n1] = g1[:, None, :]
    s[..., n1:] = g2[None, :, :]
    lift = lift_from_values(s, chart)
    return Fixture("product", lift, extras={"gamma1": g1, "gamma2": g2, "n1": n1})


def product_eta(fx: Fixture, dgamma=None) -> list:
    """eta_a = sigma ^ gamma_1', eta_b = -sigma ^ gamma_2' from analytic derivatives."""
    s = fx.lift.sigma.values
    N = s.shape[-1]
    n1 = fx.extras["n1"]
    dg1, dg2 = dgamma
    v1 = np.zeros(s.shape)
    v2 = np.zeros(s.shape)
    v1[..., :n1] = dg1[:, None, :]
    v2[..., n1:] = dg2[None, :, :]
    ch = fx.lift.chart
    return [GridField(ch, mk.wedge_action(s, v1)), GridField(ch, -mk.wedge_action(s, v2))]


def clifford_product(N=32) -> tuple:
    """Two unit circles: a circle in H^2 of cosh-radius sqrt2 times a unit circle."""
    ch = patch_chart(N, (2 * np.pi, 2 * np.pi), (True, True), (0.0, 0.0))
    a = ch.axis_coords(0)
    b = ch.axis_coords(1)
    g1 = np.stack([np.full_like(a, np.sqrt(2.0)), np.cos(a), np.sin(a)], axis=-1)
    g2 = np.stack([np.cos(b), np.sin(b)], axis=-1)
    dg1 = np.stack([np.zeros_like(a), -np.sin(a), np.cos(a)], axis=-1)
    dg2 = np.stack([-np.sin(b), np.cos(b)], axis=-1)
    fx = product_of_curves(g1, g2, ch)
    fx.extras["dgamma"] = (dg1, dg2)
    fx.extras["q20"] = 0.5
    return fx


def geodesic_product(N=32, A=1.0) -> Fixture:
    """Hyperbolic geodesic times a unit circle: a cone-type isothermic surface."""
    ch = patch_chart(N, (2 * A, 2 * np.pi), (False, True), (-A, 0.0))
    a = ch.axis_coords(0)
    b = ch.axis_coords(1)
    g1 = np.stack([np.cosh(a), np.sinh(a), np.zeros_like(a)], axis=-1)
    g2 = np.stack([np.cos(b), np.sin(b)], axis=-1)
    dg1 = np.stack([np.sinh(a), np.cosh(a), np.zeros_like(a)], axis=-1)
    dg2 = np.stack([-np.sin(b), np.cos(b)], axis=-1)
    fx = product_of_curves(g1, g2, ch)
    fx.extras["dgamma"] = (dg1, dg2)
    fx.extras["q20"] = 0.5
    return fx


# ---------------------------------------------------------------------------
# curves (m = 1)

def _curve_chart(N, L, periodic):
    return patch_chart(N, (L,), (periodic,), (0.0,))


def circle_curve(r=1.0, N=64, n=3) -> Fixture:
    ch = _curve_chart(N, 2 * np.pi * r, True)
    s = ch.axis_coords(0)
    X = np.zeros(ch.shape + (n,))
    X[..., 0] = r * np.cos(s / r)
    X[..., 1] = r * np.sin(s / r)
    return Fixture("circle", lift_from_values(mk.stereo_lift(X), ch), extras={"kappa": 1 / r, "tau": 0.0})


def helix(a=1.0, b=0.5, N=64, L=2 * np.pi) -> Fixture:
    c = np.hypot(a, b)
    ch = _curve_chart(N, L, False)
    s = ch.axis_coords(0)
    X = np.stack([a * np.cos(s / c), a * np.sin(s / c), b * s / c], axis=-1)
    return Fixture("helix", lift_from_values(mk.stereo_lift(X), ch),
                   extras={"kappa": a / c**2, "tau": b / c**2, "A": a * b / c**4})


def log_spiral(b=0.3, N=64, s0=1.0, L=2.0) -> Fixture:
    """Arclength-parametrized logarithmic spiral: kappa = 1/(b s), tau = 0."""
    ch = _curve_chart(N, L, False)
    ch = Chart(ch.shape, ch.spacing, ch.periodic, (s0,))
    s = ch.axis_coords(0)
    r = b * s / np.sqrt(1 + b * b)
    th = np.log(r) / b
    X = np.stack([r * np.cos(th), r * np.sin(th), np.zeros_like(r)], axis=-1)
    return Fixture("log_spiral", lift_from_values(mk.stereo_lift(X), ch),
                   extras={"kappa": 1 / (b * s), "dkappa": -1 / (b * s * s)})


# ---------------------------------------------------------------------------
# GCR-data fixtures

def dupin_cyclide(t=0.5, N=32, L=2.0, order=2) -> Fixture:
    """Strictly Moebius-flat data: kappa = 1/2, qM = t/4, beta = 0, q = 0 (t = 2: cylinder of radius 1/2)."""
    from .bonnet import standard_frame
    from .gcr import assemble_connection

    ch = patch_chart(N, (L, L), (False, False), (0.0, 0.0))
    data = flat_data(ch, kappa=0.5, qM=t / 4.0, q20=0.0)
    # constant forms from a tiny chart: exact for constant data
    small = patch_chart(4, (1.0, 1.0), (False, False), (0.0, 0.0))
    conn = assemble_connection(flat_data(small, kappa=0.5, qM=t / 4.0), order)
    wx = conn.omega[0].values[2, 2]
    wy = conn.omega[1].values[2, 2]
    F0 = standard_frame(3, 2)
    x, y = ch.mesh()
    gen = x[..., None, None] * wx + y[..., None, None] * wy
    F = F0 @ expm_stack(gen)
    s = F[..., :, 0]
    lift = lift_from_values(s, ch)
    th = dupin_theta_planes(t)
    return Fixture("dupin_cyclide", lift, data, extras={"t": t, "omega": (wx, wy), "F": F, "theta": th})


def expm_stack(A: np.ndarray) -> np.ndarray:
    out = np.empty_like(A)
    flat = A.reshape(-1, A.shape[-2], A.shape[-1])
    of = out.reshape(flat.shape)
    for i in range(flat.shape[0]):
        of[i] = expm(flat[i])
    return out


def dupin_theta_planes(t: float):
    """Planes (abstract frame coordinates) spanned by the two decomposable symmetry generators."""
    # frame order sigma, Y1, Y2, Z, xi
    th1 = np.array([[-1.0, 0, 0, (t + 1) / 2, 1.0], [0, 1.0, 0, 0, 0]]).T
    th2 = np.array([[1.0, 0, 0, (t - 1) / 2, 1.0], [0, 0, 1.0, 0, 0]]).T
    return th1, th2


def guichard_lame(chart, kind="hyperbolic"):
    """Lame functions l with l1^2 + l2^2 = l3^2 (real form of sum lambda^{-2} = 0)."""
    x1 = chart.mesh()[0]
    if kind == "hyperbolic":
        return np.stack([np.ones_like(x1), np.sinh(x1), np.cosh(x1)], axis=-1)
    if kind == "constant":
        p = 0.7
        return np.stack([np.full_like(x1, np.cos(p)), np.full_like(x1, np.sin(p)), np.ones_like(x1)], axis=-1)
    raise InvalidArgument(f"unknown Lame family {kind!r}")


def guichard_nu(l: np.ndarray) -> np.ndarray:
    l1, l2, l3 = l[..., 0], l[..., 1], l[..., 2]
    n1 = (l3 / (l1 * l2) + l2 / (l1 * l3)) / 3
    n2 = -(l1 / (l2 * l3) + l3 / (l1 * l2)) / 3
    n3 = (l1 / (l2 * l3) - l2 / (l1 * l3)) / 3
    return np.stack([n1, n2, n3], axis=-1)


def guichard_net(N=16, kind="hyperbolic", box=((0.5, 1.5), (0.0, 1.0), (0.0, 1.0)), lame=None, tol=1e-8) -> Fixture:
    """m = 3 data: g = sum l_i^2 dx_i^2, II0 = sum nu_i (l_i dx_i)^2, schouten of g (k = 1)."""
    lengths = [b[1] - b[0] for b in box]
    ch = patch_chart(N, lengths, (False,) * 3, [b[0] for b in box])
    l = guichard_lame(ch, kind) if lame is None else np.asarray(lame, dtype=float)
    viol = np.abs(l[..., 0] ** 2 + l[..., 1] ** 2 - l[..., 2] ** 2) / np.max(l**2)
    if np.max(viol) > tol:
        raise InvalidArgument(f"Guichard condition violated ({np.max(viol):.3e})")
    nu = guichard_nu(l)
    g = np.zeros(ch.shape + (3, 3))
    II0 = np.zeros(ch.shape + (3, 3, 1))
    for i in range(3):
        g[..., i, i] = l[..., i] ** 2
        II0[..., i, i, 0] = nu[..., i] * l[..., i] ** 2
    if kind == "hyperbolic" and lame is None:
        S = -0.5 * g      # constant curvature -1
    elif kind == "constant" and lame is None:
        S = np.zeros_like(g)
    else:
        from .gcr import schouten_of_metric

        S = schouten_of_metric(GridField(ch, g), 4).values
    data = GCRData(3, 4, ch, _zero_beta(ch, 3, 1), metric=GridField(ch, g),
                   schouten=GridField(ch, S), II0=GridField(ch, II0))
    return Fixture("guichard", None, data, extras={"lame": l, "nu": nu})


def mobius_flat_forms(data: GCRData, order: int | None = None):
    """Conformal fundamental 1-forms alpha_i and the closedness residual max |d alpha_i|.

    Imaginary branches are handled through |lambda_i^2| (closedness of i alpha equals that of alpha).
    """
    order = data.order if order is None else order
    ch = data.chart
    m = data.m
    if m == 2:
        kap = data.kappa0().values
        if data.k != 1:
            raise InvalidArgument("the m = 2 forms are implemented for k = 1")
        II = np.zeros(ch.shape + (2, 2))
        II[..., 0, 0] = 2 * kap[..., 0].real
        II[..., 1, 1] = -2 * kap[..., 0].real
        II[..., 0, 1] = II[..., 1, 0] = -2 * kap[..., 0].imag
        E = np.broadcast_to(np.eye(2), ch.shape + (2, 2))
        g = E
    elif m == 3:
        from .congruence import sym_inv_sqrt

        g = data.metric.values
        E = sym_inv_sqrt(g)
        II = data.II0.values[..., 0]
        if data.k != 1:
            raise InvalidArgument("the m = 3 forms are implemented for k = 1")
    else:
        raise InvalidArgument("mobius_flat_forms needs m in {2, 3}")
    If = np.einsum("...pi,...pq,...qj->...ij", E, II, E)
    w, v = np.linalg.eigh(If)
    # consistent eigenvector signs against the centre node
    c = tuple(s // 2 for s in ch.shape)
    ref = v[c]
    sgn = np.sign(np.einsum("...ij,ij->...j", v, ref))
    sgn[sgn == 0] = 1.0
    v = v * sgn[..., None, :]
    evec = np.einsum("...pi,...ij->...pj", E, v)       # coordinate components of e_i
    coframe = np.einsum("...pq,...qj->...jp", g, evec)  # eps_i(d_p)
    if m == 2:
        nu2 = w[..., 1] ** 2
        mu2 = np.zeros(ch.shape)
        if data.q20 is not None:
            q = data.q20.values
            Q = np.zeros(ch.shape + (2, 2))
            Q[..., 0, 0] = 2 * q.real
            Q[..., 1, 1] = -2 * q.real
            Q[..., 0, 1] = Q[..., 1, 0] = -2 * q.imag
            mu2 = np.einsum("...p,...pq,...q->...", v[..., :, 1], Q, v[..., :, 1])
        lam2 = np.stack([nu2 - mu2, nu2 + mu2], axis=-1)  # ascending eigenvalue order: -nu then +nu
    else:
        nu = w
        lam2 = np.stack([(nu[..., 1] - nu[..., 0]) * (nu[..., 2] - nu[..., 0]),
                         (nu[..., 2] - nu[..., 1]) * (nu[..., 0] - nu[..., 1]),
                         (nu[..., 0] - nu[..., 2]) * (nu[..., 1] - nu[..., 2])], axis=-1)
    alpha = np.sqrt(np.abs(lam2))[..., None] * coframe
    A = GridField(ch, alpha, data.margins)
    worst = 0.0
    for j in range(m):
        for l in range(j + 1, m):
            dj = partial(GridField(ch, alpha[..., :, l], data.margins), j, order)
            dl = partial(GridField(ch, alpha[..., :, j], data.margins), l, order)
            worst = max(worst, residual_norm(dj - dl))
    return A, worst


def cmc_and_generalized_H(lift: LightConeLift, v_inf=None, r_values=(-1.0, 1.0), order: int = 2,
                          parallel_tol: float | None = None):
    """eta = sigma ^ d xi in the spaceform gauge, with xi the mean curvature sphere.

    Returns (eta list, d eta residual, conserved-quantity residuals per r).
    """
    from .congruence import central_sphere_congruence, split_connection

    if lift.m != 2:
        raise InvalidArgument("needs a surface")
    vinf = lift.space.v_inf if v_inf is None else np.asarray(v_inf, dtype=float)
    se = lift.sigma.with_values(mk.normalize_to(lift.sigma.values, vinf))
    l2 = LightConeLift(lift.space, lift.chart, se)
    V = central_sphere_congruence(l2, order)
    if V.k != 1:
        forms = split_connection(V)
        tol = 1e-6 + 50 * max(lift.chart.spacing) ** order if parallel_tol is None else parallel_tol
        if residual_norm(forms.beta) > tol:
            raise InvalidArgument("normal section is not parallel")
    xi = GridField(lift.chart, V.normal_frame.values[..., 0], V.normal_frame.margins)
    dxi = [partial(xi, j, order) for j in range(2)]
    s = se.values
    eta = [GridField(lift.chart, mk.wedge_action(s, d.values), d.margins) for d in dxi]
    ds = [partial(se, j, order) for j in range(2)]
    deta = mk.wedge_action(ds[0].values, dxi[1].values) - mk.wedge_action(ds[1].values, dxi[0].values)
    mg = tuple(max(a, b) for a, b in zip(dxi[0].margins, ds[0].margins))
    dres = residual_norm(GridField(lift.chart, deta, mg))
    cons = {}
    for r in r_values:
        worst = 0.0
        for j in range(2):
            val = r * dxi[j].values + r * np.einsum("...ab,b->...a", eta[j].values, vinf) \
                + r * r * np.einsum("...ab,...b->...a", eta[j].values, xi.values)
            worst = max(worst, residual_norm(GridField(lift.chart, val, dxi[j].margins)))
        cons[float(r)] = worst
    return eta, dres, cons


# ---------------------------------------------------------------------------
# generators by name (CLI)

GENERATORS = {
    "plane": plane,
    "plane_z2": plane_reparam,
    "sphere": sphere,
    "cylinder": cylinder,
    "clifford": clifford_torus,
    "catenoid": catenoid,
    "cone": cone,
    "holomorphic_graph": holomorphic_graph,
    "hopf_torus": hopf_torus,
    "quadric": quadric,
    "dupin_cyclide": dupin_cyclide,
    "clifford_product": clifford_product,
    "geodesic_product": geodesic_product,
    "guichard": guichard_net,
    "confocal": confocal_chart,
    "circle": circle_curve,
    "helix": helix,
    "log_spiral": log_spiral,
}


def generate(name: str, **params) -> Fixture:
    """Call a generator by name; unknown names or parameters raise InvalidArgument."""
    import inspect

    if name not in GENERATORS:
        raise InvalidArgument(f"unknown generator {name!r}; known: {', '.join(sorted(GENERATORS))}")
    fn = GENERATORS[name]
    sig = inspect.signature(fn)
    bad = [k for k in params if k not in sig.parameters]
    if bad:
        raise InvalidArgument(f"generator {name!r} takes no parameter(s) {bad}")
    return fn(**params)
