import numpy as np
import pytest

from moebius_lab import minkowski as mk
from moebius_lab import zoo
from moebius_lab.chart import Chart, GridField, residual_norm
from moebius_lab.errors import InvalidArgument, NotImmersed, NotIsothermal
from moebius_lab.immersion import induced_metric, jets, lift_from_values, normalize_gauge


def plane_lift(N=16, sx=1.0):
    ch = zoo.patch_chart(N, (1.0, 1.0), (False, False), (-0.5, -0.5))
    x, y = ch.mesh()
    X = np.stack([sx * x, y, np.zeros_like(x)], axis=-1)
    return lift_from_values(mk.stereo_lift(X), ch)


def test_plane_metric_is_identity():
    g = induced_metric(plane_lift()).g
    assert residual_norm(g - np.eye(2)) < 1e-12


def test_rescaling_multiplies_metric():
    for N in (16, 32):
        lift = plane_lift(N)
        x = lift.chart.mesh()[0]
        g = induced_metric(lift.rescaled(np.exp(x))).g
        assert residual_norm(g - np.exp(2 * x)[..., None, None] * np.eye(2)) < 10 * lift.chart.spacing[0] ** 2


def test_unit_circle_metric():
    fx = zoo.circle_curve(1.0, N=64)
    g = induced_metric(fx.lift).g
    assert residual_norm(g - 1.0) < 5 * fx.lift.chart.spacing[0] ** 2


def test_lift_invariants():
    lift = plane_lift()
    lift.check()
    bad = lift.sigma.values.copy()
    bad[3, 3, 1] += 0.5
    with pytest.raises(InvalidArgument):
        lift_from_values(bad, lift.chart).check()
    with pytest.raises(InvalidArgument):
        lift_from_values(-lift.sigma.values, lift.chart).check()


def test_normalize_gauge_idempotent_and_errors():
    lift = plane_lift()
    a = normalize_gauge(lift, "isothermal")
    b = normalize_gauge(a, "isothermal")
    sl = a.sigma.valid_slices()
    assert np.allclose(a.sigma.values[sl], b.sigma.values[sl], atol=1e-12)
    with pytest.raises(NotIsothermal):
        normalize_gauge(plane_lift(sx=2.0), "isothermal")


def test_arclength_circle_radius_r():
    r = 2.0
    ch = Chart((64,), (2 * np.pi / 64,), (True,), (0.0,))
    t = ch.axis_coords(0)
    X = np.stack([r * np.cos(t), r * np.sin(t), 0 * t], axis=-1)
    lift = normalize_gauge(lift_from_values(mk.stereo_lift(X), ch), "arclength")
    assert residual_norm(induced_metric(lift).g - 1.0) < 10 * ch.spacing[0] ** 2


def test_jets_identities():
    fx = zoo.catenoid(N=32)
    J = jets(fx.lift)
    s = fx.lift.sigma.values
    h2 = max(fx.lift.chart.spacing) ** 2
    g = induced_metric(fx.lift).g
    for i in range(2):
        f = J.first[i]
        assert residual_norm(f.with_values(mk.inner(s, f.values))) < 10 * h2
        for j in range(2):
            d = J.d2(i, j)
            r = GridField(d.chart, mk.inner(s, d.values) + g.values[..., i, j], d.margins)
            assert residual_norm(r) < 10 * h2


def test_constant_lift_not_immersed():
    ch = Chart((8, 8), (0.1, 0.1), (True, True), (0.0, 0.0))
    s = np.broadcast_to(mk.MinkowskiSpace(3).v_0, ch.shape + (5,)).copy()
    J = jets(lift_from_values(s, ch))
    assert np.all(J.d2(0, 1).values == 0)
    with pytest.raises(NotImmersed):
        induced_metric(lift_from_values(s, ch))
