import math

import numpy as np
import pytest

from pestov_lab.corpus import corpus, fiber_only_function
from pestov_lab.integration import (
    IntegratedId,
    NonCompactError,
    flow_by_parts_pair,
    integrated_residual,
    mc_integral,
    vector_field_divergence,
)
from pestov_lab.manifolds import get_manifold

from test_identities import WrongSignSphere


def test_constant_integrates_to_one():
    est = mc_integral(get_manifold("sphere:2"), lambda f: np.ones(f.B), 2, 1000)
    assert est.mean == 1.0
    assert est.stderr == 0.0
    assert est.n_samples == 1000


def test_haar_moment_of_frame_component():
    m = get_manifold("torus:3")
    # first chart component of v_0 squared has mean 1/3 under Haar measure
    est = mc_integral(m, lambda f: f.V[:, 0, 0] ** 2, 1, 20000, seed=3)
    assert abs(est.mean - 1 / 3) < 3 * est.stderr


def test_odd_function_integrates_to_zero():
    m = get_manifold("sphere:2")
    # v_0 -> -v_0 preserves the measure
    est = mc_integral(m, lambda f: m.ambient_vectors(f.chart, f.x, f.V)[:, 2, 0], 2, 20000, seed=1)
    assert abs(est.mean) < 3 * est.stderr


def test_non_compact_refused():
    m = get_manifold("hyperbolic:2")
    with pytest.raises(NonCompactError):
        mc_integral(m, lambda f: np.ones(f.B), 1, 100)
    with pytest.raises(NonCompactError):
        integrated_residual("INT_PESTOV", m, corpus(m, 1)[0], 1, 100)


def test_results_do_not_depend_on_thread_count(monkeypatch):
    m = get_manifold("sphere:2")
    phi = corpus(m, 1, seed=0)[0]
    monkeypatch.setenv("PESTOV_LAB_THREADS", "1")
    a = mc_integral(m, phi, 1, 10000, seed=9)
    monkeypatch.setenv("PESTOV_LAB_THREADS", "3")
    b = mc_integral(m, phi, 1, 10000, seed=9)
    assert a == b


def test_stderr_shrinks_like_inverse_root_n():
    m = get_manifold("torus:2")
    phi = corpus(m, 1, seed=0)[1]
    a = mc_integral(m, phi, 1, 16384, seed=2)
    b = mc_integral(m, phi, 1, 32768, seed=2)
    assert b.stderr / a.stderr == pytest.approx(1 / math.sqrt(2), rel=0.1)


def test_flow_by_parts_is_antisymmetric():
    m = get_manifold("sphere:2")
    phi, psi = corpus(m, 2, seed=1)[:2]
    a, b = flow_by_parts_pair(m, phi, psi, 2, 4096, seed=0, i=1)
    assert a.estimate.mean == pytest.approx(b.estimate.mean, abs=1e-12)
    assert a.lhs == pytest.approx(-b.rhs, abs=1e-12)
    assert a.verdict == "PASS"


def test_divergence_of_periodic_field_vanishes():
    m = get_manifold("torus:2")
    X = lambda f: np.sin(2 * np.pi * f.x[:, :1]) * np.eye(2)[0]  # noqa: E731
    (chk,) = integrated_residual(IntegratedId.DIVH_VANISHES, m, None, 1, 10000, field=X)
    assert chk.verdict == "PASS"
    # pointwise the divergence is 2 pi cos(2 pi x^1), so only the average vanishes
    assert chk.estimate.stderr > 1e-3


def test_frame_vector_divergence_vanishes_pointwise():
    est = vector_field_divergence(get_manifold("sphere:2"), 2, 2000, slot=1)
    assert abs(est.mean) < 1e-7 and est.stderr < 1e-8


@pytest.mark.parametrize("name,k", [("sphere:2", 2), ("torus:3", 2)])
def test_integrated_pestov_passes(name, k):
    m = get_manifold(name)
    out = integrated_residual(IntegratedId.INT_PESTOV, m, corpus(m, k, seed=2)[0], k, 8192, seed=0)
    assert len(out) == k * k
    assert all(c.verdict == "PASS" for c in out), [(c.indices, c.estimate, c.bias_allowance) for c in out]
    assert max(c.scale for c in out) > 0.1


def test_integrated_pestov_detects_wrong_curvature_sign():
    m = WrongSignSphere(2)
    out = integrated_residual(IntegratedId.INT_PESTOV, m, corpus(m, 2, seed=2)[0], 2, 8192, seed=0, i=0, j=0)
    assert out[0].verdict == "FAIL"


def test_bundle_pestov_passes():
    m = get_manifold("sphere:2")
    (chk,) = integrated_residual(IntegratedId.BUNDLE_PESTOV, m, corpus(m, 2, seed=3)[1], 2, 8192)
    assert chk.verdict == "PASS"


def test_invariant_identity_on_flat_torus():
    m = get_manifold("torus:3")
    phi = fiber_only_function(m, 3, seed=0)
    (chk,) = integrated_residual(IntegratedId.INVARIANT_ID, m, phi, 3, 4096, i=1)
    assert chk.verdict == "PASS"
    assert abs(chk.lhs) < 1e-8 and abs(chk.rhs) < 1e-8


def test_invariant_identity_skips_without_invariance():
    m = get_manifold("sphere:2")
    (chk,) = integrated_residual(IntegratedId.INVARIANT_ID, m, corpus(m, 2)[0], 2, 4096)
    assert chk.verdict == "SKIP"
    assert "invariant" in chk.cause
    (chk,) = integrated_residual(IntegratedId.INVARIANT_ID, m, corpus(m, 1)[0], 1, 4096)
    assert chk.verdict == "SKIP"
