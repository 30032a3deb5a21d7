import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pestov_lab.bundle import Frame, sample_frames
from pestov_lab.manifolds import (
    ChartExitError,
    Point,
    christoffel_at,
    curvature_operator,
    get_manifold,
    riemann,
)

MODELS = ["torus:3", "sphere:2", "sphere:3", "hyperbolic:2", "hyperbolic:3", "ctorus:4", "product:H2xH2", "product:S2xT1"]


def _probe(m, size=6, seed=0):
    return m.sample_point(np.random.default_rng(seed), size)


def test_registry_names():
    assert get_manifold("torus:3").dim == 3
    assert get_manifold("S2").name == "sphere:2"
    assert get_manifold("product:hyperbolic:2xhyperbolic:2").dim == 4
    assert get_manifold("product:H2xH2").name == "product:hyperbolic:2xhyperbolic:2"
    for bad in ["klein:2", "sphere", "product:H2", "ctorus:3"]:
        with pytest.raises(ValueError):
            get_manifold(bad)


def test_hyperbolic_christoffels_by_hand():
    # metric delta / y^2: Gamma^x_xy = -1/y, Gamma^y_xx = 1/y, Gamma^y_yy = -1/y
    m = get_manifold("hyperbolic:2")
    y = 0.7
    G = christoffel_at(m, Point.at([[0.3, y]]))[0]
    expect = np.zeros((2, 2, 2))
    expect[0, 0, 1] = expect[0, 1, 0] = -1 / y
    expect[1, 0, 0] = 1 / y
    expect[1, 1, 1] = -1 / y
    assert np.allclose(G, expect, atol=1e-12)


def test_hyperbolic_christoffel_at_unit_height():
    m = get_manifold("hyperbolic:2")
    G = christoffel_at(m, Point.at([[0.0, 1.0]]))[0]
    assert G[0, 0, 1] == pytest.approx(-1.0)


def test_sphere_christoffels_conformal_formula():
    m = get_manifold("sphere:2")
    x = np.array([[0.3, -0.4]])
    s = -2 * x[0] / (1 + x[0] @ x[0])  # gradient of the conformal exponent
    expect = np.zeros((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                expect[k, i, j] = (k == i) * s[j] + (k == j) * s[i] - (i == j) * s[k]
    assert np.allclose(christoffel_at(m, Point.at(x))[0], expect, atol=1e-12)


def test_outside_domain_raises():
    m = get_manifold("hyperbolic:2")
    with pytest.raises(ChartExitError):
        christoffel_at(m, Point.at([[0.0, -1.0]]))


@pytest.mark.parametrize("name", ["torus:3", "sphere:2", "sphere:3", "hyperbolic:2", "product:H2xH2"])
def test_closed_form_matches_generic_path(name):
    m = get_manifold(name)
    p = _probe(m)
    gen = m.generic()
    assert np.abs(m.christoffel(p.chart, p.coords) - gen.christoffel(p.chart, p.coords)).max() < 1e-8
    assert np.abs(m.riemann_tensor(p.chart, p.coords) - gen.riemann_tensor(p.chart, p.coords)).max() < 1e-6


@pytest.mark.parametrize("name,K", [("sphere:2", 1.0), ("sphere:3", 1.0), ("hyperbolic:3", -1.0), ("torus:3", 0.0)])
def test_constant_curvature_tensor(name, K):
    m = get_manifold(name)
    rng = np.random.default_rng(1)
    p = _probe(m)
    X, Y, Z = (rng.standard_normal((len(p), m.dim)) for _ in range(3))
    g = m.metric(p.chart, p.coords)
    gYZ = np.einsum("bi,bij,bj->b", Y, g, Z)
    gXZ = np.einsum("bi,bij,bj->b", X, g, Z)
    expect = K * (gYZ[:, None] * X - gXZ[:, None] * Y)
    assert np.allclose(riemann(m, p, X, Y, Z), expect, atol=1e-10)


@pytest.mark.parametrize(
    "name,eig",
    [
        ("torus:3", [0, 0, 0]),
        ("sphere:3", [1, 1, 1]),
        ("hyperbolic:3", [-1, -1, -1]),
        ("product:H2xH2", [-1, -1, 0, 0, 0, 0]),
    ],
)
def test_curvature_operator_spectrum(name, eig):
    m = get_manifold(name)
    f = sample_frames(m, m.dim, 4, np.random.default_rng(2), probe=True)
    op = curvature_operator(m, f)
    assert np.allclose(op.entries, np.swapaxes(op.entries, 1, 2), atol=1e-10)
    assert np.allclose(np.sort(op.eigenvalues, axis=1), np.sort(eig), atol=1e-9)


def test_curvature_operator_rejects_partial_frames():
    m = get_manifold("sphere:3")
    f = sample_frames(m, 2, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        curvature_operator(m, f)


def test_sphere_chart_transition_roundtrip():
    m = get_manifold("sphere:2")
    rng = np.random.default_rng(3)
    chart, x = m.sample_base(rng, 10)
    W = rng.standard_normal((10, 2, 2))
    x1, W1 = m.to_chart(chart, x, W, 1)
    # same point and same ambient vectors in the other chart
    assert np.allclose(m.embed(np.ones(10, int), x1), m.embed(chart, x))
    assert np.allclose(m.ambient_vectors(np.ones(10, int), x1, W1), m.ambient_vectors(chart, x, W))
    x0, W0 = m.to_chart(np.ones(10, int), x1, W1, 0)
    assert np.allclose(m.embed(np.zeros(10, int), x0), m.embed(chart, x))


def test_sphere_metric_is_pullback_of_embedding():
    m = get_manifold("sphere:3")
    p = _probe(m)
    J = m.embed_jacobian(p.chart, p.coords)
    assert np.allclose(np.swapaxes(J, 1, 2) @ J, m.metric(p.chart, p.coords))


def test_torus_normalize_wraps():
    m = get_manifold("torus:2")
    chart, x, W = m.normalize(np.zeros(1, int), np.array([[1.25, -0.5]]), np.eye(2)[None])
    assert np.allclose(x, [[0.25, 0.5]])


def test_complex_structure():
    J = get_manifold("ctorus:4").complex_structure
    assert np.allclose(J @ J, -np.eye(4))
    assert np.allclose(J.T, -J)
    assert get_manifold("torus:4").complex_structure is None


def test_non_compact_sampling_refused():
    with pytest.raises(ValueError):
        get_manifold("hyperbolic:2").sample_base(np.random.default_rng(0), 3)


def test_orthonormal_basis():
    for name in MODELS:
        m = get_manifold(name)
        p = _probe(m)
        f = Frame(p.chart, p.coords, m.orthonormal_basis(p.chart, p.coords))
        assert f.is_orthonormal(m, 1e-12), name


# -- algebraic symmetries of R (property based) -------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["sphere:2", "hyperbolic:2", "product:H2xH2", "product:S2xT1"]),
       st.integers(0, 2**31 - 1))
def test_curvature_symmetries(name, seed):
    m = get_manifold(name)
    rng = np.random.default_rng(seed)
    p = _probe(m, 1, seed)
    X, Y, Z, W = (rng.standard_normal((1, m.dim)) for _ in range(4))
    g = m.metric(p.chart, p.coords)
    R = lambda a, b, c: m.curvature(p.chart, p.coords, a, b, c)  # noqa: E731
    ip = lambda a, b: np.einsum("bi,bij,bj->b", a, g, b)  # noqa: E731
    # skew in the first pair
    assert np.allclose(R(X, Y, Z), -R(Y, X, Z), atol=1e-10)
    # first Bianchi identity
    assert np.allclose(R(X, Y, Z) + R(Y, Z, X) + R(Z, X, Y), 0, atol=1e-10)
    # skew in the second pair and pair symmetry
    assert np.allclose(ip(R(X, Y, Z), W), -ip(R(X, Y, W), Z), atol=1e-10)
    assert np.allclose(ip(R(X, Y, Z), W), ip(R(Z, W, X), Y), atol=1e-10)
