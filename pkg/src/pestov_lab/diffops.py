"""Horizontal and vertical gradients, covariant derivatives and divergences.

Functions on the bundle are black boxes ``phi(frame) -> (B,)`` and semi-basic
fields are ``X(frame) -> (B, n)``. All derivatives are central differences;
the horizontal ones move the whole frame by parallel transport along a short
geodesic. Directions are taken from the orthonormal basis obtained by
Gram-Schmidt of the coordinate frame unless ``basis`` is given.
"""

from __future__ import annotations

import numpy as np

from .bundle import Frame, generator, horizontal_shift
from .config import FD_STEP, ODE_STEP
from .manifolds import ManifoldModel, inner


def _basis(m, f, basis):
    return m.orthonormal_basis(f.chart, f.x) if basis is None else basis


def _vertical_shift(f: Frame, i: int, U, h: float) -> Frame:
    """Frames with ``v_i`` replaced by ``v_i +- h u`` for each column u of ``U``."""
    B, n, d = U.shape
    tiled = f.tile(2 * d)
    delta = np.concatenate([U, -U], axis=2)
    delta = np.moveaxis(delta, 2, 0).reshape(2 * d * B, n)
    V = tiled.V.copy()
    V[:, :, i] += h * delta
    return tiled.with_vectors(V)


def grad_h(m: ManifoldModel, phi, f: Frame, *, h=FD_STEP, ode_step=ODE_STEP, basis=None):
    E = _basis(m, f, basis)
    shifted, _, _ = horizontal_shift(m, f, E, h, ode_step=ode_step)
    vals = np.asarray(phi(shifted)).reshape(2, m.dim, f.B)
    d = (vals[0] - vals[1]) / (2 * h)
    return np.einsum("bil,lb->bi", E, d)


def grad_v(m: ManifoldModel, phi, f: Frame, i: int, *, h=FD_STEP, basis=None):
    E = _basis(m, f, basis)
    vals = np.asarray(phi(_vertical_shift(f, i, E, h))).reshape(2, m.dim, f.B)
    d = (vals[0] - vals[1]) / (2 * h)
    return np.einsum("bil,lb->bi", E, d)


def grad_v_all(m: ManifoldModel, phi, f: Frame, *, h=FD_STEP, basis=None):
    """All vertical gradients at once, shape ``(B, n, k)``."""
    E = _basis(m, f, basis)
    shifted = [_vertical_shift(f, i, E, h) for i in range(f.k)]
    batch = Frame(
        np.concatenate([s.chart for s in shifted]),
        np.concatenate([s.x for s in shifted]),
        np.concatenate([s.V for s in shifted]),
    )
    vals = np.asarray(phi(batch)).reshape(f.k, 2, m.dim, f.B)
    d = (vals[:, 0] - vals[:, 1]) / (2 * h)  # (k, n, B)
    return np.einsum("bil,klb->bik", E, d)


def project_vertical(m: ManifoldModel, f: Frame, G, tol=1e-8):
    """Project a tuple of vertical vectors ``G`` (B, n, k) onto T_f of the frame bundle.

    ``w_i = G_i - 1/2 sum_j (<G_i, v_j> + <G_j, v_i>) v_j``.
    """
    if np.any(f.orthonormality_error(m) > tol):
        raise ValueError("projection needs an orthonormal frame")
    g = m.metric(f.chart, f.x)
    S = np.einsum("bai,bac,bcj->bij", G, g, f.V)
    sym = S + np.swapaxes(S, 1, 2)
    return G - 0.5 * f.V @ sym


def grad_v_proj(m: ManifoldModel, phi, f: Frame, i=None, *, h=FD_STEP, basis=None):
    """Projected vertical gradient; slot ``i`` or all slots when ``i`` is None."""
    W = project_vertical(m, f, grad_v_all(m, phi, f, h=h, basis=basis))
    return W if i is None else W[:, :, i]


def cov_h(m: ManifoldModel, X, f: Frame, u, *, h=FD_STEP, ode_step=ODE_STEP):
    """Horizontal covariant derivative of the semi-basic field ``X`` along ``u``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    E = m.orthonormal_basis(f.chart, f.x)
    shifted, _, Et = horizontal_shift(m, f, u[:, :, None], h, ode_step=ode_step, carry=E)
    Xs = np.asarray(X(shifted))
    g = m.metric(shifted.chart, shifted.x)
    # coefficients in the transported orthonormal basis = pull-back to f
    c = np.einsum("bia,bij,bj->ba", Et, g, Xs).reshape(2, f.B, m.dim)
    return np.einsum("bia,ba->bi", E, (c[0] - c[1]) / (2 * h))


def div_h(m: ManifoldModel, X, f: Frame, *, h=FD_STEP, ode_step=ODE_STEP, basis=None):
    E = _basis(m, f, basis)
    shifted, vel, _ = horizontal_shift(m, f, E, h, ode_step=ode_step)
    Xs = np.asarray(X(shifted))
    # the end velocity is the transported +-e_l, so both halves enter with "+"
    pair = inner(m.metric(shifted.chart, shifted.x), Xs, vel).reshape(2, m.dim, f.B)
    return (pair[0] + pair[1]).sum(axis=0) / (2 * h)


def cov_v(m: ManifoldModel, X, f: Frame, i: int, u, *, h=FD_STEP):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    Xs = np.asarray(X(_vertical_shift(f, i, u[:, :, None], h))).reshape(2, f.B, m.dim)
    return (Xs[0] - Xs[1]) / (2 * h)


def div_v(m: ManifoldModel, X, f: Frame, i: int, *, h=FD_STEP, basis=None):
    E = _basis(m, f, basis)
    Xs = np.asarray(X(_vertical_shift(f, i, E, h))).reshape(2, m.dim, f.B, m.dim)
    D = (Xs[0] - Xs[1]) / (2 * h)  # (l, B, n)
    g = m.metric(f.chart, f.x)
    return np.einsum("lbi,bij,bjl->b", D, g, E)


# -- composition helpers: derived quantities as new black boxes ---------------


def generator_fn(m, phi, i, *, h=FD_STEP, ode_step=ODE_STEP):
    """``G^i phi`` as a bundle function."""
    return lambda f: generator(m, phi, f, i, h=h, ode_step=ode_step)


def grad_h_fn(m, phi, *, h=FD_STEP, ode_step=ODE_STEP):
    return lambda f: grad_h(m, phi, f, h=h, ode_step=ode_step)


def grad_v_fn(m, phi, i, *, h=FD_STEP):
    return lambda f: grad_v(m, phi, f, i, h=h)


def frame_vector_field(i):
    """The semi-basic field ``f -> v_i``."""
    return lambda f: f.V[:, :, i]
