import math

import numpy as np
import pytest

from pestov_lab.bundle import Frame, frame_flow, sample_frames
from pestov_lab.flows import geodesic_step, integrate, modified_gram_schmidt, transport_with_endpoint
from pestov_lab.manifolds import ChartExitError, Point, get_manifold


def _ambient_point(m, y):
    chart, x = m.from_ambient(np.atleast_2d(np.asarray(y, float)))
    return Point(chart, x)


def _ambient(m, p, w):
    return m.ambient_vectors(p.chart, p.coords, w[:, :, None])[:, :, 0]


def test_great_circle_reaches_antipode():
    m = get_manifold("sphere:2")
    p = _ambient_point(m, [1.0, 0.0, 0.0])
    v = m.pull_vectors(p.chart, p.coords, np.array([[0.0, 0.0, 1.0]])[:, :, None])[:, :, 0]
    q, _ = geodesic_step(m, p, v, math.pi, ode_step=1e-3)
    assert np.allclose(m.embed(q.chart, q.coords), [[-1.0, 0.0, 0.0]], atol=1e-9)


def test_octant_triangle_holonomy_is_its_area():
    # geodesic triangle N -> e1 -> e2 -> N encloses 1/8 of the sphere, area pi/2
    m = get_manifold("sphere:2")
    vertices = np.eye(3)[[2, 0, 1, 2]]
    p = _ambient_point(m, vertices[0])
    w0 = m.pull_vectors(p.chart, p.coords, np.array([[1.0, 0.0, 0.0]])[:, :, None])[:, :, 0]
    w = w0
    for a, b in zip(vertices[:-1], vertices[1:]):
        # leaving a towards b, the unit tangent is b itself (a and b are orthogonal)
        v = m.pull_vectors(p.chart, p.coords, b[None, :, None])[:, :, 0]
        p, w, _ = transport_with_endpoint(m, (p, v, math.pi / 2), w, ode_step=1e-3)
    assert np.allclose(m.embed(p.chart, p.coords), [vertices[-1]], atol=1e-9)
    start, end = np.array([1.0, 0.0, 0.0]), _ambient(m, p, w)[0]
    angle = math.atan2(np.cross(start, end) @ vertices[-1], start @ end)
    assert abs(abs(angle) - math.pi / 2) < 1e-4


@pytest.mark.parametrize("name", ["sphere:3", "torus:3", "product:S2xT1"])
def test_transport_preserves_inner_products(name):
    m = get_manifold(name)
    f = sample_frames(m, m.dim, 8, np.random.default_rng(0))
    g0 = f.gram(m)
    out = frame_flow(m, f, 0, 2.0, ode_step=1e-2)
    assert np.abs(out.gram(m) - g0).max() < 1e-8 * 2.0


def test_geodesic_speed_is_conserved():
    m = get_manifold("hyperbolic:2")
    p = Point.at([[0.0, 1.0], [0.5, 2.0]])
    v = np.array([[0.3, 0.4], [-1.0, 0.7]])
    speed = m.inner(p.chart, p.coords, v, v)
    q, w = geodesic_step(m, p, v, 1.5, ode_step=1e-3)
    assert np.allclose(m.inner(q.chart, q.coords, w, w), speed, rtol=1e-10)


def test_hyperbolic_vertical_geodesic():
    # x = 0, y = exp(t) is a unit-speed geodesic
    m = get_manifold("hyperbolic:2")
    q, _ = geodesic_step(m, Point.at([[0.0, 1.0]]), [[0.0, 1.0]], 1.0)
    assert np.allclose(q.coords, [[0.0, math.e]], atol=1e-10)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_hyperbolic_exit_raises():
    m = get_manifold("hyperbolic:2")
    with pytest.raises(ChartExitError):
        integrate(m, np.zeros(1, int), [[0.0, 1e-3]], np.array([[[0.0], [-1.0]]]), 10.0, ode_step=1e-2)


def test_torus_flow_wraps():
    m = get_manifold("torus:2")
    q, v = geodesic_step(m, Point.at([[0.9, 0.1]]), [[0.25, 0.0]], 1.0)
    assert np.allclose(q.coords, [[0.15, 0.1]])
    assert np.allclose(v, [[0.25, 0.0]])


def test_sphere_switches_chart_near_projection_pole():
    m = get_manifold("sphere:2")
    p = _ambient_point(m, [0.0, 0.0, -1.0])
    v = m.pull_vectors(p.chart, p.coords, np.array([[1.0, 0.0, 0.0]])[:, :, None])[:, :, 0]
    q, _ = geodesic_step(m, p, v, math.pi, ode_step=1e-3)
    assert np.abs(q.coords).max() <= 1.0 + 1e-9
    assert np.allclose(m.embed(q.chart, q.coords), [[0.0, 0.0, 1.0]], atol=1e-9)


def test_frame_flow_keeps_orthonormal_frames():
    m = get_manifold("sphere:2")
    f = sample_frames(m, 2, 5, np.random.default_rng(4))
    out = frame_flow(m, f, 1, 3.0)
    assert out.is_orthonormal(m, 1e-9)
    # v_i is the geodesic velocity so it is carried along as the tangent
    back = frame_flow(m, out, 1, -3.0)
    assert np.allclose(m.embed(back.chart, back.x), m.embed(f.chart, f.x), atol=1e-9)


def test_frame_flow_index_checked():
    m = get_manifold("torus:2")
    f = Frame.make([[0.1, 0.2]], np.eye(2)[None, :, :1])
    with pytest.raises(IndexError):
        frame_flow(m, f, 1, 1.0)


def test_modified_gram_schmidt_identity_metric():
    W = np.array([[[2.0, 1.0], [0.0, 1.0]]])
    assert np.allclose(modified_gram_schmidt(np.eye(2)[None], W), np.eye(2)[None])


def test_frame_returns_after_closed_great_circle():
    m = get_manifold("sphere:2")
    f = Frame.make([0.0, 0.0], m.orthonormal_basis(np.zeros(1, int), np.zeros((1, 2)))[0])
    out = frame_flow(m, f, 0, 2 * math.pi, ode_step=1e-3)
    back = out.in_chart(m, 0)
    assert np.abs(back.x - f.x).max() < 1e-6
    assert np.abs(back.V - f.V).max() < 1e-6


def test_zero_time_flow_is_identity():
    m = get_manifold("hyperbolic:2")
    f = Frame.make([0.3, 1.2], np.eye(2) * 1.2)
    out = frame_flow(m, f, 1, 0.0)
    assert np.array_equal(out.x, f.x) and np.array_equal(out.V, f.V)


def test_flat_torus_flow_translates():
    m = get_manifold("torus:3")
    V = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))[0]
    f = Frame.make([0.1, 0.2, 0.3], V)
    out = frame_flow(m, f, 2, 0.37)
    assert np.allclose(out.x, np.mod(f.x + 0.37 * V[:, 2], 1.0))
    assert np.allclose(out.V, f.V)


@pytest.mark.parametrize("name", ["sphere:2", "hyperbolic:3"])
def test_energy_drift_per_unit_time(name):
    m = get_manifold(name)
    f = sample_frames(m, 1, 8, np.random.default_rng(1), probe=True)
    T = 1.0 if name.startswith("hyperbolic") else 3.0
    q, w = geodesic_step(m, f.point, f.V[:, :, 0], T, ode_step=1e-3)
    assert np.abs(m.inner(q.chart, q.coords, w, w) - 1.0).max() < 1e-8 * T
