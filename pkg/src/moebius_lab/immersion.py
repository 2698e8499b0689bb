"""Sampled light-cone lifts and their first-order induced data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import minkowski as mk
from .chart import Chart, GridField, hessian, merge_margins, partial
from .errors import InvalidArgument, NotImmersed, NotIsothermal

NULL_RTOL = 1e-10


@dataclass(frozen=True)
class LightConeLift:
    space: mk.MinkowskiSpace
    chart: Chart
    sigma: GridField

    def __post_init__(self):
        s = self.sigma.values
        if s.shape != self.chart.shape + (self.space.dim,):
            raise InvalidArgument(f"lift values have shape {s.shape}, expected {self.chart.shape + (self.space.dim,)}")

    @property
    def m(self) -> int:
        return self.chart.m

    @property
    def n(self) -> int:
        return self.space.n

    def check(self) -> None:
        """Raise InvalidArgument if the null or positive-cone invariant fails."""
        s = self.sigma.values
        q = mk.inner(s, s)
        scale = np.sum(s * s, axis=-1)
        bad = np.abs(q) > NULL_RTOL * scale
        if np.any(bad):
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise InvalidArgument(f"lift is not null at node {node}: <s,s> = {q[node]:.3e}")
        if np.any(s[..., 0] <= 0):
            node = tuple(int(i) for i in np.argwhere(s[..., 0] <= 0)[0])
            raise InvalidArgument(f"lift leaves the positive cone at node {node}")

    def transformed(self, T) -> "LightConeLift":
        M = T.matrix if hasattr(T, "matrix") else np.asarray(T)
        vals = np.einsum("ij,...j->...i", M, self.sigma.values)
        return LightConeLift(self.space, self.chart, self.sigma.with_values(vals))

    def rescaled(self, factor) -> "LightConeLift":
        f = factor.values if isinstance(factor, GridField) else np.asarray(factor)
        mg = self.sigma.margins if not isinstance(factor, GridField) else merge_margins(self.sigma, factor)
        return LightConeLift(self.space, self.chart, GridField(self.chart, self.sigma.values * f[..., None], mg))


def lift_from_values(values, chart: Chart) -> LightConeLift:
    values = np.asarray(values, dtype=float)
    space = mk.MinkowskiSpace(values.shape[-1] - 2)
    return LightConeLift(space, chart, GridField(chart, values))


@dataclass(frozen=True)
class InducedMetric:
    g: GridField
    gauge_note: str = "as supplied"


@dataclass(frozen=True)
class Jets:
    first: list
    second: dict

    def d2(self, i, j):
        return self.second[(min(i, j), max(i, j))]


def jets(lift: LightConeLift, order: int = 2) -> Jets:
    first = [partial(lift.sigma, i, order) for i in range(lift.m)]
    second = {}
    for i in range(lift.m):
        for j in range(i, lift.m):
            second[(i, j)] = hessian(lift.sigma, i, j, order)
    return Jets(first, second)


def metric_from_first(first) -> GridField:
    m = len(first)
    chart = first[0].chart
    g = np.empty(chart.shape + (m, m))
    for i in range(m):
        for j in range(i, m):
            gij = mk.inner(first[i].values, first[j].values)
            g[..., i, j] = gij
            g[..., j, i] = gij
    return GridField(chart, g, merge_margins(*first))


def check_immersed(g: GridField) -> None:
    vals = g.valid()
    ev = np.linalg.eigvalsh(vals)
    tr = np.trace(vals, axis1=-2, axis2=-1)
    bad = ev[..., 0] <= 1e-8 * np.abs(tr)
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        sl = g.valid_slices()
        node = tuple(n + s.start for n, s in zip(node, sl))
        raise NotImmersed(f"degenerate induced metric at node {node}", node=node)


def induced_metric(lift: LightConeLift, order: int = 2) -> InducedMetric:
    first = [partial(lift.sigma, i, order) for i in range(lift.m)]
    g = metric_from_first(first)
    check_immersed(g)
    return InducedMetric(g)


def conformality_tolerance(chart: Chart, order: int) -> float:
    """Allowed relative deviation from a conformal metric.

    The literal 1e-6 is only reachable for exact metrics, finite differences
    leave an O(h^order) defect, so the tolerance scales with the grid.
    """
    h = max(chart.spacing)
    return 1e-6 + 50.0 * h**order


def normalize_gauge(lift: LightConeLift, mode: str = "isothermal", order: int = 2,
                    v_inf=None, tol: float | None = None) -> LightConeLift:
    """Rescale the lift to the requested gauge."""
    if mode == "spaceform":
        if v_inf is None:
            v_inf = lift.space.v_inf
        vals = mk.normalize_to(lift.sigma.values, np.asarray(v_inf, dtype=float))
        return LightConeLift(lift.space, lift.chart, lift.sigma.with_values(vals))
    g = induced_metric(lift, order).g
    if mode == "isothermal":
        if lift.m != 2:
            raise InvalidArgument("isothermal mode needs m = 2")
        gv = g.valid()
        scale = np.abs(gv[..., 0, 0])
        dev = max(np.max(np.abs(gv[..., 0, 0] - gv[..., 1, 1]) / scale),
                  np.max(np.abs(gv[..., 0, 1]) / scale))
        tol = conformality_tolerance(lift.chart, order) if tol is None else tol
        if dev > tol:
            raise NotIsothermal(f"chart is not conformal: relative deviation {dev:.3e}", deviation=dev)
        det = np.linalg.det(g.values)
        factor = GridField(lift.chart, det ** (-0.25), g.margins)
        return lift.rescaled(factor)
    if mode == "arclength":
        if lift.m != 1:
            raise InvalidArgument("arclength mode needs m = 1")
        factor = GridField(lift.chart, g.values[..., 0, 0] ** (-0.5), g.margins)
        return lift.rescaled(factor)
    raise InvalidArgument(f"unknown gauge mode {mode!r}")
