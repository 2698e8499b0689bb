"""Structured grids and finite differences.

Non-periodic boundaries are handled by margin exclusion: a derivative along a
non-periodic axis marks order/2 more nodes at each end of that axis invalid.
Values in the invalid band are still finite (filled from one-sided
differences) so that nodewise linear algebra never sees NaNs, but no reported
residual ever reads them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class Chart:
    shape: tuple
    spacing: tuple
    periodic: tuple
    origin: tuple

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        m = len(shape)
        spacing = tuple(float(h) for h in self.spacing)
        periodic = tuple(bool(p) for p in self.periodic)
        origin = tuple(float(o) for o in self.origin)
        if m not in (1, 2, 3):
            raise InvalidArgument(f"chart dimension must be 1, 2 or 3, got {m}")
        if not (len(spacing) == len(periodic) == len(origin) == m):
            raise InvalidArgument("chart fields have inconsistent lengths")
        for s, h, p in zip(shape, spacing, periodic):
            if h <= 0:
                raise InvalidArgument("spacing must be positive")
            if s < (4 if p else 5):
                raise InvalidArgument(f"axis with {s} samples is too short for the stencils")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "origin", origin)

    @property
    def m(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def mesh(self) -> list:
        return np.meshgrid(*[self.axis_coords(i) for i in range(self.m)], indexing="ij")

    def crop(self, margins) -> "Chart":
        """Sub-chart with `margins[i]` nodes removed at both ends of non-periodic axes."""
        shape, origin = [], []
        for i in range(self.m):
            c = 0 if self.periodic[i] else int(margins[i])
            shape.append(self.shape[i] - 2 * c)
            origin.append(self.origin[i] + c * self.spacing[i])
        return Chart(tuple(shape), self.spacing, self.periodic, tuple(origin))

    @staticmethod
    def uniform(m, n, length, periodic=False, origin=0.0) -> "Chart":
        """Chart with n nodes per axis covering `length` (periodic axes exclude the endpoint)."""
        per = tuple([periodic] * m) if isinstance(periodic, bool) else tuple(periodic)
        lengths = [length] * m if np.isscalar(length) else list(length)
        ns = [n] * m if np.isscalar(n) else list(n)
        orig = [origin] * m if np.isscalar(origin) else list(origin)
        spacing = tuple(L / N if p else L / (N - 1) for L, N, p in zip(lengths, ns, per))
        return Chart(tuple(ns), spacing, per, tuple(orig))


def _as_margins(margin, m):
    if np.isscalar(margin):
        return tuple([int(margin)] * m)
    return tuple(int(x) for x in margin)


@dataclass(frozen=True)
class GridField:
    """Values on the nodes of a chart; values.shape = chart.shape + value shape."""

    chart: Chart
    values: np.ndarray
    margins: tuple = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape[: self.chart.m] != self.chart.shape:
            raise InvalidArgument(f"values shape {v.shape} does not match chart {self.chart.shape}")
        object.__setattr__(self, "values", v)
        mg = (0,) * self.chart.m if self.margins is None else _as_margins(self.margins, self.chart.m)
        mg = tuple(0 if p else x for x, p in zip(mg, self.chart.periodic))
        object.__setattr__(self, "margins", mg)

    @property
    def valid_margin(self) -> int:
        return max(self.margins) if self.margins else 0

    @property
    def value_shape(self) -> tuple:
        return self.values.shape[self.chart.m:]

    def with_values(self, values, margins=None) -> "GridField":
        return GridField(self.chart, values, self.margins if margins is None else margins)

    def valid_slices(self) -> tuple:
        return valid_slices(self.chart, self.margins)

    def valid(self) -> np.ndarray:
        return self.values[self.valid_slices()]

    # arithmetic keeps the larger margin
    def _binary(self, other, op):
        if isinstance(other, GridField):
            mg = tuple(max(a, b) for a, b in zip(self.margins, other.margins))
            return GridField(self.chart, op(self.values, other.values), mg)
        return GridField(self.chart, op(self.values, other), self.margins)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridField(self.chart, -self.values, self.margins)


def merge_margins(*items) -> tuple:
    out = None
    for it in items:
        mg = it.margins if isinstance(it, GridField) else tuple(it)
        out = mg if out is None else tuple(max(a, b) for a, b in zip(out, mg))
    return out


def valid_slices(chart: Chart, margins) -> tuple:
    sl = []
    for i in range(chart.m):
        c = 0 if chart.periodic[i] else int(margins[i])
        if 2 * c >= chart.shape[i]:
            raise InvalidArgument("empty valid region")
        sl.append(slice(c, chart.shape[i] - c))
    return tuple(sl)


_D1 = {2: (np.array([-1.0, 0.0, 1.0]) / 2.0), 4: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0)}
_D2 = {2: np.array([1.0, -2.0, 1.0]), 4: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0)}


def _stencil_apply(v: np.ndarray, axis: int, weights: np.ndarray, periodic: bool) -> np.ndarray:
    r = len(weights) // 2
    if periodic:
        out = np.zeros_like(v, dtype=np.result_type(v, float))
        for k, w in enumerate(weights):
            if w != 0.0:
                out += w * np.roll(v, r - k, axis=axis)
        return out
    n = v.shape[axis]
    out = np.zeros_like(v, dtype=np.result_type(v, float))
    inner = [slice(None)] * v.ndim
    inner[axis] = slice(r, n - r)
    acc = 0
    for k, w in enumerate(weights):
        if w != 0.0:
            src = [slice(None)] * v.ndim
            src[axis] = slice(k, n - 2 * r + k)
            acc = acc + w * v[tuple(src)]
    out[tuple(inner)] = acc
    return out, r


def _fill_band(out, fallback, axis, r):
    n = out.shape[axis]
    for idx in list(range(r)) + list(range(n - r, n)):
        sl = [slice(None)] * out.ndim
        sl[axis] = idx
        out[tuple(sl)] = fallback[tuple(sl)]
    return out


def partial(f: GridField, axis: int, order: int = 2) -> GridField:
    """First derivative along `axis` by central differences."""
    ch = f.chart
    if not 0 <= axis < ch.m:
        raise InvalidArgument(f"axis {axis} out of range for m = {ch.m}")
    if order not in _D1:
        raise InvalidArgument("order must be 2 or 4")
    h = ch.spacing[axis]
    v = f.values
    if ch.periodic[axis]:
        return GridField(ch, _stencil_apply(v, axis, _D1[order], True) / h, f.margins)
    out, r = _stencil_apply(v, axis, _D1[order], False)
    n = out.shape[axis]
    sl = [slice(None)] * out.ndim
    sl[axis] = slice(r, n - r)
    out[tuple(sl)] /= h
    out = _fill_band(out, np.gradient(v, h, axis=axis, edge_order=2), axis, r)
    mg = list(f.margins)
    mg[axis] += order // 2
    return GridField(ch, out, mg)


def partial2(f: GridField, axis: int, order: int = 2) -> GridField:
    """Second derivative along one axis with the direct central stencil."""
    ch = f.chart
    if not 0 <= axis < ch.m:
        raise InvalidArgument(f"axis {axis} out of range for m = {ch.m}")
    if order not in _D2:
        raise InvalidArgument("order must be 2 or 4")
    h = ch.spacing[axis]
    v = f.values
    if ch.periodic[axis]:
        return GridField(ch, _stencil_apply(v, axis, _D2[order], True) / h**2, f.margins)
    out, r = _stencil_apply(v, axis, _D2[order], False)
    g1 = np.gradient(v, h, axis=axis, edge_order=2)
    fallback = np.gradient(g1, h, axis=axis, edge_order=2)
    n = out.shape[axis]
    sl = [slice(None)] * out.ndim
    sl[axis] = slice(r, n - r)
    out[tuple(sl)] /= h**2
    out = _fill_band(out, fallback, axis, r)
    mg = list(f.margins)
    mg[axis] += order // 2
    return GridField(ch, out, mg)


def hessian(f: GridField, i: int, j: int, order: int = 2) -> GridField:
    if i == j:
        return partial2(f, i, order)
    return partial(partial(f, i, order), j, order)


def d_z(f: GridField, order: int = 2) -> GridField:
    """Complex derivative 1/2 (d_x - i d_y) on an m = 2 chart."""
    fx = partial(f, 0, order)
    fy = partial(f, 1, order)
    return GridField(f.chart, 0.5 * (fx.values - 1j * fy.values), merge_margins(fx, fy))


def d_zbar(f: GridField, order: int = 2) -> GridField:
    fx = partial(f, 0, order)
    fy = partial(f, 1, order)
    return GridField(f.chart, 0.5 * (fx.values + 1j * fy.values), merge_margins(fx, fy))


def valid_box(f: GridField) -> list:
    """Physical extent [(lo, hi), ...] of the valid region (None on periodic axes)."""
    ch = f.chart
    out = []
    for i, sl in enumerate(f.valid_slices()):
        if ch.periodic[i]:
            out.append(None)
        else:
            x = ch.axis_coords(i)[sl]
            out.append((float(x[0]), float(x[-1])))
    return out


def box_intersection(*boxes) -> list:
    out = list(boxes[0])
    for b in boxes[1:]:
        out = [None if a is None else (max(a[0], c[0]), min(a[1], c[1])) for a, c in zip(out, b)]
    return out


def residual_norm(f: GridField, box=None) -> float:
    """Max-norm over the valid region, optionally restricted to a physical box.

    Convergence sweeps pass the coarsest grid's valid box so that every h is
    measured on the same set of points; otherwise the valid region creeps
    towards the boundary as h shrinks.
    """
    v = f.valid()
    if box is not None:
        ch = f.chart
        idx = []
        for i, sl in enumerate(f.valid_slices()):
            x = ch.axis_coords(i)[sl]
            if box[i] is None:
                idx.append(np.arange(x.size))
            else:
                tol = 1e-9 * ch.spacing[i]
                idx.append(np.nonzero((x >= box[i][0] - tol) & (x <= box[i][1] + tol))[0])
        v = v[np.ix_(*idx)]
    if any(n == 0 for n in v.shape[:f.chart.m]):
        raise InvalidArgument("empty valid region")
    if v.size == 0:
        return 0.0   # no components (e.g. codimension 0)
    return float(np.max(np.abs(v)))


def convergence_order(pairs) -> float:
    """Least-squares slope of log r against log h."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise InvalidArgument("need at least two (h, r) pairs")
    hs = np.array([p[0] for p in pairs], dtype=float)
    rs = np.array([p[1] for p in pairs], dtype=float)
    if np.any(np.diff(hs) >= 0):
        raise InvalidArgument("h must be strictly decreasing")
    if np.any(rs == 0):
        return float("inf")
    slope = np.polyfit(np.log(hs), np.log(rs), 1)[0]
    return float(slope)


def integrate(f: GridField) -> float:
    """Trapezoid / periodic rule over the valid region."""
    v = f.valid()
    ch = f.chart
    out = v
    for ax in range(ch.m - 1, -1, -1):
        h = ch.spacing[ax]
        if ch.periodic[ax]:
            out = h * np.sum(out, axis=ax)
        else:
            out = np.trapezoid(out, dx=h, axis=ax)
    return out
