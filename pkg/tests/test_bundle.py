import math

import numpy as np
import pytest

from pestov_lab.bundle import (
    DegenerateFrameError,
    Frame,
    cutoff_extension,
    frame_flow,
    generator,
    gram_schmidt,
    haar_stiefel,
    random_tuple,
    sample_frames,
    smooth_step,
    truncate_frame,
)
from pestov_lab.corpus import chart_linear, constant, corpus
from pestov_lab.flows import geodesic_step
from pestov_lab.manifolds import get_manifold


def test_gram_schmidt_worked_example():
    m = get_manifold("torus:2")
    f = Frame.make([0.2, 0.3], [[2.0, 1.0], [0.0, 1.0]])
    assert np.allclose(gram_schmidt(m, f).V[0], np.eye(2))


def test_gram_schmidt_keeps_flag_and_orientation():
    m = get_manifold("sphere:3")
    f = random_tuple(m, 3, 20, np.random.default_rng(0))
    q = gram_schmidt(m, f)
    assert q.is_orthonormal(m, 1e-12)
    # the change of basis is upper triangular with positive diagonal
    g = m.metric(f.chart, f.x)
    T = np.einsum("bia,bij,bjc->bac", q.V, g, f.V)
    assert np.allclose(np.tril(T, -1), 0, atol=1e-12)
    assert np.all(np.diagonal(T, axis1=1, axis2=2) > 0)


def test_gram_schmidt_rejects_dependent_tuple():
    m = get_manifold("torus:2")
    with pytest.raises(DegenerateFrameError):
        gram_schmidt(m, Frame.make([0.1, 0.1], [[1.0, 2.0], [1.0, 2.0]]))


def test_smooth_step_shape():
    x = np.linspace(0, 1, 401)
    s = smooth_step(x)
    assert np.all(s[x <= 0.5] == 0) and np.all(s[x >= 0.75] == 1)
    assert np.all(np.diff(s) >= 0)
    assert smooth_step(0.625) == pytest.approx(0.5)


def test_cutoff_vanishes_for_small_gram_determinant():
    m = get_manifold("torus:2")
    ext = cutoff_extension(m, constant(3.0))
    # det of gram = 0.4 for these two vectors
    tight = Frame.make([0.1, 0.2], [[1.0, 0.0], [0.0, math.sqrt(0.4)]])
    assert ext(tight)[0] == 0.0
    unit = Frame.make([0.1, 0.2], np.eye(2))
    assert ext(unit)[0] == 3.0


def test_cutoff_agrees_with_function_on_frames():
    m = get_manifold("sphere:2")
    f = sample_frames(m, 2, 10, np.random.default_rng(1))
    phi = corpus(m, 2, seed=3)[0]
    assert np.allclose(cutoff_extension(m, phi)(f), phi(f))


def test_haar_second_moment():
    n, N = 4, 40000
    Q = haar_stiefel(np.random.default_rng(5), N, n, 2)
    assert np.allclose(np.swapaxes(Q, 1, 2) @ Q, np.eye(2), atol=1e-12)
    s = Q[:, 0, 0] ** 2
    sigma = s.std() / math.sqrt(N)
    assert abs(s.mean() - 1 / n) < 3 * sigma


def test_haar_marginal_distribution():
    stats = pytest.importorskip("scipy.stats")
    n = 5
    Q = haar_stiefel(np.random.default_rng(6), 5000, n, 3)
    # a coordinate squared of a uniform unit vector is Beta(1/2, (n-1)/2)
    res = stats.kstest(Q[:, 1, 2] ** 2, stats.beta(0.5, (n - 1) / 2).cdf)
    assert res.pvalue > 1e-3


def test_haar_is_rotation_invariant():
    rng = np.random.default_rng(7)
    Q = haar_stiefel(rng, 20000, 3, 1)[:, :, 0]
    # mean of a fixed linear functional vanishes
    assert abs((Q @ np.array([1.0, 2.0, -0.5])).mean()) < 3 * math.sqrt(5.25 / 3 / 20000)


def test_sample_frames_orthonormal():
    for name in ["torus:3", "sphere:2", "product:S2xT1"]:
        m = get_manifold(name)
        f = sample_frames(m, 2, 50, np.random.default_rng(0))
        assert f.is_orthonormal(m, 1e-12)
        assert f.k == 2


def test_frame_flow_orthonormal_after_long_time():
    m = get_manifold("sphere:3")
    f = sample_frames(m, 3, 4, np.random.default_rng(2))
    assert frame_flow(m, f, 2, 7.0, ode_step=5e-3).is_orthonormal(m, 1e-9)


def test_generator_on_flat_torus():
    # phi = <v_0, sin(2 pi x^1) e_1>; moving along v_0 = e_1 gives 2 pi cos(2 pi x^1)
    m = get_manifold("torus:2")
    K = lambda x: np.stack([np.sin(2 * np.pi * x[:, 0]), np.zeros(len(x))], axis=1)  # noqa: E731
    phi = chart_linear(m, K)
    f = Frame.make([[0.0, 0.3]], np.eye(2)[None])
    assert generator(m, phi, f, 0) == pytest.approx(2 * np.pi, rel=1e-7)
    assert generator(m, phi, f, 1) == pytest.approx(0.0, abs=1e-10)


def test_truncate_frame():
    f = Frame.make([0.0, 0.0, 0.0], np.eye(3))
    assert truncate_frame(f, 2).k == 2
    with pytest.raises(ValueError):
        truncate_frame(f, 4)


@pytest.mark.parametrize("name", ["sphere:2", "hyperbolic:2", "torus:3"])
def test_generator_of_base_only_function(name):
    # phi = psi o pi: the generator is the derivative of psi along the geodesic
    m = get_manifold(name)
    f = sample_frames(m, 2, 5, np.random.default_rng(3), probe=True)
    w = 0.3 * np.random.default_rng(4).normal(size=m.base_features(f.chart, f.x).shape[1])
    psi = lambda fr: np.sin(m.base_features(fr.chart, fr.x) @ w)  # noqa: E731
    t = 1e-3
    plus, _ = geodesic_step(m, f.point, f.V[:, :, 1], t)
    minus, _ = geodesic_step(m, f.point, -f.V[:, :, 1], t)
    at = lambda p: psi(Frame(p.chart, p.coords, f.V))  # noqa: E731
    oracle = (at(plus) - at(minus)) / (2 * t)
    assert np.allclose(generator(m, psi, f, 1), oracle, atol=1e-5)


def test_generator_of_constant_is_zero():
    m = get_manifold("sphere:3")
    f = sample_frames(m, 2, 3, np.random.default_rng(0))
    assert np.all(generator(m, constant(5.0), f, 0) == 0)
