import numpy as np
import pytest

from moebius_lab.chart import (Chart, GridField, convergence_order, integrate, partial, partial2, residual_norm,
                               valid_box)
from moebius_lab.errors import InvalidArgument


def periodic_line(N):
    return Chart((N,), (2 * np.pi / N,), (True,), (0.0,))


def test_chart_validation():
    with pytest.raises(InvalidArgument):
        Chart((4,), (0.1,), (False,), (0.0,))
    with pytest.raises(InvalidArgument):
        Chart((3,), (0.1,), (True,), (0.0,))
    with pytest.raises(InvalidArgument):
        GridField(Chart((8,), (0.1,), (True,), (0.0,)), np.zeros(7))


def test_constant_has_zero_derivative():
    ch = Chart((9, 9), (0.1, 0.1), (False, False), (0.0, 0.0))
    f = GridField(ch, np.full(ch.shape, 3.0))
    assert residual_norm(partial(f, 0)) == 0.0
    assert residual_norm(partial(f, 1, 4)) == 0.0


def test_sine_derivative_order2():
    ch = periodic_line(64)
    x = ch.axis_coords(0)
    d = partial(GridField(ch, np.sin(x)), 0, 2)
    h = ch.spacing[0]
    assert np.max(np.abs(d.values - np.cos(x))) < 10 * h**2
    pairs = []
    for N in (64, 128):
        ch = periodic_line(N)
        x = ch.axis_coords(0)
        pairs.append((ch.spacing[0], np.max(np.abs(partial(GridField(ch, np.sin(x)), 0).values - np.cos(x)))))
    assert 1.9 <= convergence_order(pairs) <= 2.1


def test_order4_stencils():
    pairs1, pairs2 = [], []
    for N in (32, 64):
        ch = periodic_line(N)
        x = ch.axis_coords(0)
        f = GridField(ch, np.sin(x))
        pairs1.append((ch.spacing[0], residual_norm(partial(f, 0, 4) - np.cos(x))))
        pairs2.append((ch.spacing[0], residual_norm(partial2(f, 0, 4) + np.sin(x))))
    assert 3.8 < convergence_order(pairs1) < 4.2
    assert 3.8 < convergence_order(pairs2) < 4.2


def test_residual_norm_basics():
    ch = Chart((10, 10), (0.1, 0.1), (False, False), (0.0, 0.0))
    assert residual_norm(GridField(ch, np.zeros(ch.shape))) == 0.0
    assert residual_norm(GridField(ch, np.ones(ch.shape))) == 1.0


def test_boundary_corruption_is_excluded():
    ch = Chart((12, 12), (0.1, 0.1), (False, False), (0.0, 0.0))
    x, y = ch.mesh()
    f = partial(GridField(ch, x * y), 0)
    base = residual_norm(f)
    v = f.values.copy()
    v[0, :] = 1e6
    v[-1, :] = -1e6
    assert residual_norm(f.with_values(v)) == base


def test_box_restriction():
    ch = Chart((11,), (0.1,), (False,), (0.0,))
    x = ch.axis_coords(0)
    f = GridField(ch, x, (2,))
    assert valid_box(f) == [(0.2, 0.8)]
    assert residual_norm(f, [(0.2, 0.5)]) == pytest.approx(0.5)


def test_convergence_order_slopes(rng):
    C, h = 3.0, 0.1
    assert convergence_order([(h, C * h**2), (h / 2, C * h**2 / 4)]) == pytest.approx(2.0)
    hs = [h, h / 2, h / 4]
    assert convergence_order([(x, C * x**4) for x in hs]) == pytest.approx(4.0)
    hs = h / 2 ** np.arange(6)
    noisy = [(x, C * x**2 * np.exp(rng.normal(scale=0.05))) for x in hs]
    assert abs(convergence_order(noisy) - 2.0) < 0.2
    with pytest.raises(InvalidArgument):
        convergence_order([(h, 1.0)])


def test_integrate_periodic_and_patch():
    ch = Chart((64, 64), (2 * np.pi / 64,) * 2, (True, True), (0.0, 0.0))
    x, y = ch.mesh()
    assert integrate(GridField(ch, 1 + np.cos(x) * np.sin(y))) == pytest.approx(4 * np.pi**2)
    ch = Chart((33,), (1 / 32,), (False,), (0.0,))
    assert integrate(GridField(ch, ch.axis_coords(0))) == pytest.approx(0.5)
