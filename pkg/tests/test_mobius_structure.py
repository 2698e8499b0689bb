import numpy as np
import pytest

from moebius_lab import zoo
from moebius_lab.chart import Chart, GridField, convergence_order, residual_norm
from moebius_lab.congruence import central_sphere_congruence, split_connection
from moebius_lab.errors import CriticalPoint, GaugeError
from moebius_lab.immersion import normalize_gauge
from moebius_lab.mobius_structure import (conormal_acceleration, curve_invariants, developing_map, hill_apply,
                                          mobius_structure_from_congruence, mq_direct, mq_of_gauge, q_tensor,
                                          schwarzian)


def structure(lift):
    return mobius_structure_from_congruence(central_sphere_congruence(normalize_gauge(lift)))


def line_chart(N, L=2.0, x0=-1.0):
    return Chart((N + 1,), (L / N,), (False,), (x0,))


def square(N, origin=(-0.5, -0.5)):
    return zoo.patch_chart(N, (1.0, 1.0), (False, False), origin)


def test_plane_is_flat():
    ms = structure(zoo.plane(N=32).lift)
    assert residual_norm(ms.qM) < 1e-10
    assert residual_norm(ms.ns) < 1e-10


def test_reparametrized_plane():
    pairs = []
    for N in (32, 64):
        fx = zoo.plane_reparam(N=N)
        ms = structure(fx.lift)
        pairs.append((fx.lift.chart.spacing[0], residual_norm(ms.qM.with_values(ms.qM.values - fx.extras["qM"]))))
    assert pairs[-1][1] < 10 * pairs[-1][0] ** 2
    assert convergence_order(pairs) > 1.7


def test_unit_circle_ns():
    fx = zoo.circle_curve(1.0, N=64)
    ms = mobius_structure_from_congruence(central_sphere_congruence(normalize_gauge(fx.lift, "arclength")))
    assert ms.m == 1
    assert residual_norm(ms.ns.with_values(ms.ns.values - 0.5)) < 5 * fx.lift.chart.spacing[0] ** 2


def test_flat_gauge_required():
    lift = zoo.plane(N=64).lift
    x = lift.chart.mesh()[0]
    with pytest.raises(GaugeError):
        mobius_structure_from_congruence(central_sphere_congruence(lift.rescaled(np.exp(0.3 * x))))


def test_schwarzian_of_mobius_map_vanishes(rng):
    ch = square(64)
    x, y = ch.mesh()
    z = x + 1j * y
    h = ch.spacing[0]
    for _ in range(5):
        a, b, c, d = rng.normal(size=4) + 1j * rng.normal(size=4)
        c *= 0.2
        w = (a * z + b) / (c * z + d)
        assert residual_norm(schwarzian(GridField(ch, w))) < 10 * h**2


def test_schwarzian_closed_forms():
    ch = square(64, (1.0, -0.5))
    x, y = ch.mesh()
    z = x + 1j * y
    h = ch.spacing[0]
    S = schwarzian(GridField(ch, z**2))
    assert residual_norm(S.with_values(S.values + 1.5 / z**2)) < 10 * h**2
    S = schwarzian(GridField(ch, np.exp(z)))
    assert residual_norm(S.with_values(S.values + 0.5)) < 10 * h**2


def test_schwarzian_critical_point():
    ch = square(16)
    x, y = ch.mesh()
    with pytest.raises(CriticalPoint):
        schwarzian(GridField(ch, (x + 1j * y) ** 2))


def test_schwarzian_one_dimensional():
    ch = line_chart(128, 1.0, 0.0)
    x = ch.axis_coords(0)
    S = schwarzian(GridField(ch, np.exp(x)))
    assert residual_norm(S.with_values(S.values + 0.5)) < 10 * ch.spacing[0] ** 2


def test_hill_operator():
    ch = line_chart(64)
    x = ch.axis_coords(0)
    zero = GridField(ch, np.zeros_like(x))
    assert residual_norm(hill_apply(zero, GridField(ch, x))) < 1e-12
    assert residual_norm(mq_of_gauge(zero, GridField(ch, x))) < 1e-12
    c = 0.8
    f = GridField(ch, np.cos(np.sqrt(c / 2) * x))
    assert residual_norm(hill_apply(GridField(ch, np.full_like(x, c)), f)) < ch.spacing[0] ** 2


def test_mq_consistency(rng):
    pairs = []
    a = rng.normal(size=3)
    for N in (64, 128):
        ch = line_chart(N)
        x = ch.axis_coords(0)
        f = GridField(ch, 1.5 + a[0] * np.sin(x) + a[1] * np.cos(2 * x) * 0.2)
        ns = GridField(ch, np.full_like(x, a[2]))
        d = mq_of_gauge(ns, f).values - mq_direct(ns, f.with_values(f.values**2)).values
        pairs.append((ch.spacing[0], residual_norm(GridField(ch, d, (2,)))))
    assert convergence_order(pairs) > 1.7


def test_developing_map():
    assert developing_map(0.0, 0.3) == 0.3
    assert abs(developing_map(1.0, np.pi / 4) - 1.0) < 1e-15
    assert developing_map(-1.0, 0.0) == 0.0
    eps = 1e-6
    assert abs((developing_map(-1.0, eps) - developing_map(-1.0, -eps)) / (2 * eps) - 1.0) < 1e-9
    assert np.isinf(developing_map(1.0, np.pi / 2))


def test_developing_map_schwarzian():
    # the developing map of the constant structure c has S_x = 2c
    for c in (1.0, -1.0):
        pairs = []
        for N in (128, 256):
            ch = line_chart(N, 1.0, 0.0)
            S = schwarzian(GridField(ch, developing_map(c, ch.axis_coords(0))))
            pairs.append((ch.spacing[0], residual_norm(S.with_values(S.values - 2 * c))))
        assert convergence_order(pairs) > 1.7


def test_q_tensor():
    assert np.all(q_tensor(np.zeros((2, 2, 1))) == 0)
    r = 2.0
    II0 = np.zeros((2, 2, 1))
    II0[0, 0, 0], II0[1, 1, 0] = 0.5 / r, -0.5 / r
    assert np.allclose(q_tensor(II0), 0.25 * 0.5 / r**2 * np.eye(2))
    nu = zoo.guichard_nu(np.array([1.0, np.sinh(0.8), np.cosh(0.8)]))
    Q = q_tensor(np.diag(nu)[..., None])
    assert np.allclose(np.diag(Q), nu**2 - 0.25 * np.sum(nu**2))


def conormal(lift):
    V = central_sphere_congruence(lift)
    return conormal_acceleration(V, split_connection(V)).A


def test_conormal_acceleration():
    # spaceform gauges: Euclidean for the stereo lifts, round for the sphere
    for name in ("catenoid", "cylinder", "sphere"):
        pairs = []
        for N in (32, 64):
            lift = zoo.generate(name, N=N).lift
            pairs.append((max(lift.chart.spacing), residual_norm(conormal(lift))))
        assert pairs[-1][1] < 10 * pairs[-1][0] ** 2, name


def test_circle_invariants():
    ci = curve_invariants(zoo.circle_curve(2.0, N=64).lift)
    h = 4 * np.pi / 64
    assert residual_norm(ci.ns.with_values(ci.ns.values - 0.5 / 4)) < 10 * h**2
    assert residual_norm(ci.A) < 10 * h**2
    assert residual_norm(ci.kappa.with_values(ci.kappa.values - 0.5)) < 10 * h**2


def test_helix_invariants():
    pairs = []
    for N in (64, 128):
        fx = zoo.helix(N=N)
        ci = curve_invariants(fx.lift)
        nA = np.linalg.norm(ci.A.values, axis=-1)
        pairs.append((fx.lift.chart.spacing[0], residual_norm(ci.A.with_values(nA - fx.extras["A"]))))
        assert residual_norm(ci.tau.with_values(ci.tau.values - fx.extras["tau"])) < 0.05
    assert convergence_order(pairs) > 1.7


def test_plane_curve_acceleration_is_normal():
    fx = zoo.log_spiral(N=128)
    ci = curve_invariants(fx.lift)
    nA = np.linalg.norm(ci.A.values, axis=-1)
    # tau = 0: |A| = |kappa'| in the arclength gauge
    ref = np.abs(fx.extras["dkappa"])
    assert residual_norm(ci.A.with_values(nA - ref)) < 1e-2 * np.max(ref)
    assert residual_norm(ci.tau) < 1e-8
