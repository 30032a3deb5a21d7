import numpy as np
import pytest

from pestov_lab.bundle import Frame, generator, sample_frames
from pestov_lab.corpus import corpus
from pestov_lab.diffops import (
    cov_h,
    cov_v,
    div_h,
    div_v,
    frame_vector_field,
    grad_h,
    grad_v,
    grad_v_all,
    grad_v_proj,
    project_vertical,
)
from pestov_lab.manifolds import get_manifold

CURVED = ["sphere:2", "sphere:3", "hyperbolic:2", "product:S2xT1"]


def _setup(name, k=2, seed=0, size=6):
    m = get_manifold(name)
    rng = np.random.default_rng(seed)
    f = sample_frames(m, k, size, rng, probe=True)
    return m, f, corpus(m, k, seed)


@pytest.mark.parametrize("name", CURVED + ["torus:3"])
def test_generator_is_horizontal_gradient_along_frame(name):
    m, f, fns = _setup(name)
    g = m.metric(f.chart, f.x)
    for phi in fns:
        gh = grad_h(m, phi, f)
        for i in range(f.k):
            lhs = generator(m, phi, f, i)
            rhs = np.einsum("bi,bij,bj->b", gh, g, f.V[:, :, i])
            assert np.allclose(lhs, rhs, atol=1e-6 * (1 + np.abs(rhs).max()))


@pytest.mark.parametrize("name", CURVED)
def test_frame_vectors_are_horizontally_parallel(name):
    m, f, _ = _setup(name)
    for i in range(f.k):
        assert np.abs(div_h(m, frame_vector_field(i), f)).max() < 1e-7


@pytest.mark.parametrize("name", CURVED)
def test_vertical_divergence_of_own_slot_is_dimension(name):
    m, f, _ = _setup(name)
    assert np.allclose(div_v(m, frame_vector_field(0), f, 0), m.dim, atol=1e-8)
    assert np.allclose(div_v(m, frame_vector_field(0), f, 1), 0, atol=1e-8)


def test_cov_h_on_flat_torus():
    m = get_manifold("torus:2")
    X = lambda f: np.stack([np.sin(2 * np.pi * f.x[:, 0]), np.zeros(f.B)], axis=1)  # noqa: E731
    f = Frame.make([[0.1, 0.4]], np.eye(2)[None])
    out = cov_h(m, X, f, [[1.0, 0.0]])
    assert np.allclose(out, [[2 * np.pi * np.cos(0.2 * np.pi), 0.0]], rtol=1e-7)
    assert np.allclose(cov_h(m, X, f, [[0.0, 1.0]]), 0, atol=1e-10)


def test_cov_v_of_linear_field():
    m, f, _ = _setup("sphere:2")
    X = lambda f: 3.0 * f.V[:, :, 1]  # noqa: E731
    u = f.V[:, :, 0]
    assert np.allclose(cov_v(m, X, f, 1, u), 3.0 * u, atol=1e-9)
    assert np.allclose(cov_v(m, X, f, 0, u), 0, atol=1e-12)


def test_grad_v_all_matches_single_slots():
    m, f, fns = _setup("sphere:3", k=3)
    phi = fns[2]
    G = grad_v_all(m, phi, f)
    for i in range(3):
        assert np.allclose(G[:, :, i], grad_v(m, phi, f, i), atol=1e-12)


def test_projection_lands_in_skew_tangent_space():
    m, f, fns = _setup("hyperbolic:3", k=3, seed=2)
    rng = np.random.default_rng(0)
    G = rng.standard_normal(f.V.shape)
    W = project_vertical(m, f, G)
    g = m.metric(f.chart, f.x)
    S = np.einsum("bai,bac,bcj->bij", W, g, f.V)
    assert np.allclose(S, -np.swapaxes(S, 1, 2), atol=1e-12)
    # idempotent
    assert np.allclose(project_vertical(m, f, W), W, atol=1e-12)
    P = grad_v_proj(m, fns[0], f)
    S = np.einsum("bai,bac,bcj->bij", P, g, f.V)
    assert np.allclose(S, -np.swapaxes(S, 1, 2), atol=1e-10)


def test_projection_needs_orthonormal_frame():
    m = get_manifold("torus:2")
    f = Frame.make([0.0, 0.0], [[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        project_vertical(m, f, np.zeros((1, 2, 2)))
