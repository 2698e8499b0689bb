"""Integrating flat connections back to immersions.

Edges are transported with classical RK4 on dF/ds = F omega(s), omega at the
edge midpoint coming from cubic interpolation of the nodal values.  Because the
equation is linear, one RK4 step is F -> F U with a propagator U that depends
only on the edge, so transport and holonomy share the same edge matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import minkowski as mk
from .chart import GridField, merge_margins, valid_slices
from .errors import DegenerateCongruence, IntegrabilityRefused, InvalidArgument
from .gcr import ConnectionField, curvature, frame_gram
from .immersion import LightConeLift

_MID_IN = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0
_MID_LO = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0
_MID_HI = _MID_LO[::-1]


@dataclass(frozen=True)
class FrameField:
    F: GridField
    base: tuple
    F0: np.ndarray
    m: int
    k: int

    def lorentz_defect(self) -> float:
        G = mk.gram(self.F.values.shape[-1] - 2)
        GF = frame_gram(self.m, self.k)
        D = np.swapaxes(self.F.values, -1, -2) @ G @ self.F.values - GF
        return float(np.max(np.abs(D)))


def standard_frame(n: int, m: int) -> np.ndarray:
    """sigma = v_0, Y_i = e_i, Z = v_inf, xi_a = e_{m+a}, oriented like the Lorentz cross product."""
    sp = mk.MinkowskiSpace(n)
    cols = [sp.v_0] + [sp.e(i) for i in range(1, m + 1)] + [sp.v_inf] + [sp.e(m + a) for a in range(1, n - m + 1)]
    F = np.stack(cols, axis=-1)
    k = n - m
    if k >= 1 and np.sign(np.linalg.det(F)) != (-1) ** (n + 1):
        F[:, -1] *= -1.0
    return F


def _midpoints(w: np.ndarray, axis: int) -> np.ndarray:
    """Cubic midpoint values on the L-1 edges along `axis` (axis counted in w)."""
    L = w.shape[axis]
    if L < 4:
        raise InvalidArgument("need at least 4 nodes per axis for cubic midpoints")

    def sl(a, b):
        s = [slice(None)] * w.ndim
        s[axis] = slice(a, b)
        return w[tuple(s)]

    inner = sum(c * sl(k, L - 3 + k) for k, c in enumerate(_MID_IN))  # edges 1..L-3
    lo = sum(c * sl(k, k + 1) for k, c in enumerate(_MID_LO))          # edge 0
    hi = sum(c * sl(L - 4 + k, L - 3 + k) for k, c in enumerate(_MID_HI))  # edge L-2
    return np.concatenate([lo, inner, hi], axis=axis)


def edge_propagators(omega: np.ndarray, axis: int, h: float, margin: int = 0) -> np.ndarray:
    """RK4 propagators U_p with F(p+1) = F(p) U_p along `axis` (chart axis).

    Midpoints of edges inside the valid range use only valid nodes (one-sided at its ends).
    """
    w = omega
    L = w.shape[axis]
    mid = _midpoints(w, axis)
    if margin > 0 and L - 2 * margin >= 4:
        s = [slice(None)] * w.ndim
        s[axis] = slice(margin, L - margin)
        t = [slice(None)] * w.ndim
        t[axis] = slice(margin, L - margin - 1)
        mid[tuple(t)] = _midpoints(w[tuple(s)], axis)
    s0 = [slice(None)] * w.ndim
    s1 = [slice(None)] * w.ndim
    s0[axis] = slice(0, L - 1)
    s1[axis] = slice(1, L)
    w0, w1 = w[tuple(s0)], w[tuple(s1)]
    I = np.eye(w.shape[-1])
    k1 = w0
    k2 = (I + 0.5 * h * k1) @ mid
    k3 = (I + 0.5 * h * k2) @ mid
    k4 = (I + h * k3) @ w1
    return I + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _reproject(F, G, GF):
    return mk.lorentz_project(F, G, GF)


def integrate_frame(conn: ConnectionField, F0=None, base=None, threshold: float | None = 1e-4,
                    order: int = 2, reproject: bool = True) -> FrameField:
    """Transport F0 from the base node: axis 0 first, then each later axis line by line."""
    ch = conn.chart
    m, k = conn.m, conn.k
    N = m + 2 + k
    n = N - 2
    if threshold is not None:
        R = curvature(conn, order)
        worst = max((float(np.max(np.abs(r.valid()))) for r in R.values()), default=0.0)
        if worst > threshold:
            raise IntegrabilityRefused(
                f"curvature residual {worst:.3e} exceeds {threshold:.1e}; data are not integrable",
                report={"curvature": worst, "threshold": threshold})
    F0 = standard_frame(n, m) if F0 is None else np.asarray(F0, dtype=float)
    G = mk.gram(n)
    GF = frame_gram(m, k)
    mg = conn.margins
    if base is None:
        base = tuple(0 if ch.periodic[i] else int(mg[i]) for i in range(m))
    base = tuple(int(b) for b in base)
    om = [w.values for w in conn.omega]
    F = np.empty(ch.shape + (N, N))
    # propagators along each axis over the whole chart
    U = [edge_propagators(om[a], a, ch.spacing[a], mg[a]) for a in range(m)]
    # axis-0 line through the base node
    first = np.empty((ch.shape[0], N, N))
    first[base[0]] = F0
    U0 = U[0][(slice(None),) + tuple(base[1:])]
    _sweep(first, U0, base[0], G, GF, reproject)
    F[(slice(None),) + tuple(base[1:])] = first
    for a in range(1, m):
        # every line along axis a through nodes already filled (index base[a] on axis a)
        start = F[(slice(None),) * a + (base[a],) + tuple(base[a + 1:])]      # (..., N, N) over axes < a
        Ua = U[a][(slice(None),) * (a + 1) + tuple(base[a + 1:])]             # (..., L-1, N, N)
        lines = np.empty(start.shape[:-2] + (ch.shape[a], N, N))
        lines[..., base[a], :, :] = start
        _sweep(lines, Ua, base[a], G, GF, reproject, axis=a)
        F[(slice(None),) * (a + 1) + tuple(base[a + 1:])] = lines
    return FrameField(GridField(ch, F, mg), base, F0, m, k)


def _sweep(lines, U, b, G, GF, reproject, axis=0):
    """Fill lines[..., p, :, :] from p = b outwards using the edge propagators."""
    L = lines.shape[-3]
    ax = lines.ndim - 3
    take = lambda arr, p: arr[(slice(None),) * ax + (p,)]
    for p in range(b, L - 1):
        Fn = take(lines, p) @ take(U, p)
        lines[(slice(None),) * ax + (p + 1,)] = _reproject(Fn, G, GF) if reproject else Fn
    for p in range(b, 0, -1):
        Fn = take(lines, p) @ np.linalg.inv(take(U, p - 1))
        lines[(slice(None),) * ax + (p - 1,)] = _reproject(Fn, G, GF) if reproject else Fn


def extract_immersion(frame: FrameField, data=None) -> LightConeLift:
    """sigma = F e_sigma, rescaled by e^u when the data carry a conformal factor."""
    s = frame.F.values[..., :, 0].copy()
    mg = frame.F.margins
    if data is not None and getattr(data, "u", None) is not None:
        s = s * np.exp(data.u.values)[..., None]
        mg = merge_margins(mg, data.u)
    space = mk.MinkowskiSpace(s.shape[-1] - 2)
    return LightConeLift(space, frame.F.chart, GridField(frame.F.chart, s, mg))


def holonomy_residual(conn: ConnectionField, valid_only: bool = True) -> float:
    """max over cells of |U_i(p) U_j(p+e_i) U_i(p+e_j)^{-1} U_j(p)^{-1} - I|."""
    ch = conn.chart
    m = conn.m
    if m < 2:
        return 0.0
    U = [edge_propagators(conn.omega[a].values, a, ch.spacing[a], conn.margins[a]) for a in range(m)]
    worst = 0.0
    sl = valid_slices(ch, conn.margins) if valid_only else tuple(slice(None) for _ in range(m))
    for i in range(m):
        for j in range(i + 1, m):
            Ui, Uj = U[i], U[j]
            # restrict to cells: index p with p+e_i, p+e_j in range
            def cut(arr, drop):
                s = [slice(None)] * m
                for d in drop:
                    s[d] = slice(0, -1)
                return arr[tuple(s)]

            def shift(arr, ax):
                s = [slice(None)] * m
                s[ax] = slice(1, None)
                return arr[tuple(s)]

            A = cut(Ui, [j])                 # U_i(p)
            B = cut(shift(Uj, i), [])        # U_j(p + e_i)
            C = cut(shift(Ui, j), [])        # U_i(p + e_j)
            D = cut(Uj, [i])                 # U_j(p)
            P = A @ B @ np.linalg.inv(C) @ np.linalg.inv(D)
            dev = np.max(np.abs(P - np.eye(P.shape[-1])), axis=(-2, -1))
            cs = []
            for ax in range(m):
                s = sl[ax]
                if ax in (i, j):
                    stop = s.stop - 1 if s.stop is not None else None
                    cs.append(slice(s.start, stop))
                else:
                    cs.append(s)
            worst = max(worst, float(np.max(dev[tuple(cs)])))
    return worst


def canonical_gauge(lift: LightConeLift, order: int = 2) -> LightConeLift:
    """sigma det(g)^{-1/(2m)}: a gauge fixed by the chart alone (flat/arclength for m = 2/1)."""
    from .immersion import induced_metric

    g = induced_metric(lift, order).g
    f = np.linalg.det(g.values) ** (-1.0 / (2 * lift.m))
    return lift.rescaled(GridField(lift.chart, f, g.margins))


def align_mobius(lift1: LightConeLift, lift2: LightConeLift, frames=None, order: int = 2,
                 base=None, normalize: bool = True, frame2=None, metric2=None):
    """Moebius transform T with T lift1 ~ lift2 from adapted frames at one node.

    frames: a pair of full frame fields, used as they are (T = F2 F1^{-1}).
    frame2: the integrated frame of a reconstruction (a FrameField), used in place of the
    finite-difference central frame of lift2. Its sigma column is in the gauge of the data;
    metric2 is that gauge's metric (identity, i.e. the canonical gauge, when omitted) and
    lift1 is rescaled to match it.
    Returns (T, max projective distance over the common valid region).
    """
    from .congruence import central_sphere_congruence

    if lift1.chart.shape != lift2.chart.shape:
        raise InvalidArgument("lifts live on different charts")
    ch = lift1.chart
    m = lift1.m
    if frames is not None:
        F1, F2 = (f.values if isinstance(f, GridField) else np.asarray(f) for f in frames)
        p0 = tuple(s // 2 for s in ch.shape) if base is None else tuple(base)
        T = F2[p0] @ np.linalg.inv(F1[p0])
    else:
        l1 = canonical_gauge(lift1, order) if normalize else lift1
        if frame2 is not None and metric2 is not None:
            from .immersion import induced_metric

            g1 = induced_metric(lift1, order).g
            f = (np.linalg.det(metric2.values) / np.linalg.det(g1.values)) ** (1.0 / (2 * m))
            l1 = lift1.rescaled(GridField(ch, f, merge_margins(g1, metric2)))
        l2 = canonical_gauge(lift2, order) if normalize else lift2
        V1 = central_sphere_congruence(l1, order)
        if frame2 is None:
            V2 = central_sphere_congruence(l2, order)
            fr2 = GridField(ch, np.concatenate([V2.frame.values, V2.normal_frame.values], axis=-1),
                            merge_margins(V2.frame, V2.normal_frame))
            s2all = l2.sigma.values
        else:
            fr2 = frame2.F if isinstance(frame2, FrameField) else frame2
            s2all = fr2.values[..., :, 0]
        mg = merge_margins(V1.frame, fr2)
        sl = valid_slices(ch, mg)
        if base is None and isinstance(frame2, FrameField):
            p0 = tuple(frame2.base)
        elif base is None:
            p0 = tuple((s.start + s.stop) // 2 for s in sl)
        else:
            p0 = tuple(base)
        A1 = V1.frame.values[p0]
        A2 = fr2.values[p0][:, :m + 2]
        G = lift1.space.G
        GV = np.linalg.inv(frame_gram(m, 0))
        # V-block map: sends the V-frame of lift1 to that of lift2, kills V^perp
        TV = A2 @ GV @ A1.T @ G
        k = lift1.n - m
        T = TV
        if k > 0:
            xi1 = V1.normal_frame.values[p0]
            xi2 = fr2.values[p0][:, m + 2:]
            s1 = l1.sigma.values[sl].reshape(-1, G.shape[0])
            s2 = s2all[sl].reshape(-1, G.shape[0])
            c = s1 @ G @ xi1                            # (P, k)
            e = (s2 - s1 @ TV.T) @ G @ xi2             # (P, k)
            M = e.T @ c
            if np.linalg.norm(M) < 1e-14 * max(1.0, np.linalg.norm(e)):
                R = np.eye(k)
            else:
                u, _, vt = np.linalg.svd(M)
                R = u @ vt
            T = TV + xi2 @ R @ xi1.T @ G
        T = mk.lorentz_project(T, G)
    if not np.all(np.isfinite(T)):
        raise DegenerateCongruence("degenerate adapted frame at the base node")
    Tm = mk.MobiusTransform(T) if T[0, 0] > 0 else None
    if Tm is None:
        raise DegenerateCongruence("frame matching produced a time-reversing map")
    mg = merge_margins(lift1.sigma, lift2.sigma)
    sl = valid_slices(ch, mg)
    d = mk.projective_distance(Tm.apply(lift1.sigma.values[sl]), lift2.sigma.values[sl])
    return Tm, float(np.max(d))
