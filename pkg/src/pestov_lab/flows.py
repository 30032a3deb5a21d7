"""Geodesics and parallel transport by fixed-step RK4.

The integrated state is a point ``x`` and a bundle of vectors ``W`` whose
column ``vel_col`` is the geodesic velocity. Every other column is parallel
transported along the same geodesic, so a frame flow, a geodesic step and a
parallel transport are all the same call.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ODE_STEP
from .manifolds import ChartExitError, ManifoldModel, Point, inner

REORTH_EVERY = 100
REORTH_DRIFT = 1e-10


def _rhs(m, chart, x, W, vel_col):
    v = W[:, :, vel_col]
    return v, -(m.connection_matrix(chart, x, v) @ W)


def modified_gram_schmidt(g, W):
    """Orthonormalize the columns of ``W`` (B, n, m) in the metric ``g``."""
    Q = np.array(W, dtype=float, copy=True)
    for j in range(Q.shape[-1]):
        for l in range(j):
            c = inner(g, Q[:, :, j], Q[:, :, l])
            Q[:, :, j] -= c[:, None] * Q[:, :, l]
        nrm = np.sqrt(inner(g, Q[:, :, j], Q[:, :, j]))
        Q[:, :, j] /= nrm[:, None]
    return Q


def integrate(
    m: ManifoldModel,
    chart,
    x,
    W,
    t: float,
    *,
    vel_col: int = 0,
    ode_step: float = ODE_STEP,
    normalize: bool = True,
    orth_cols=None,
):
    """Flow ``(x, W)`` for time ``t``; returns ``(chart, x, W)``.

    ``normalize`` lets the model switch charts or wrap lattice cells after
    each step; finite-difference stencils disable it so that neighbouring
    samples stay in one chart. ``orth_cols`` (a slice) marks columns that
    form an orthonormal family and get re-orthonormalized every
    ``REORTH_EVERY`` steps once their Gram drift exceeds ``REORTH_DRIFT``.
    """
    chart = np.asarray(chart)
    x = np.array(x, dtype=float, copy=True)
    W = np.array(W, dtype=float, copy=True)
    if t == 0:
        return chart, x, W
    n_steps = max(1, math.ceil(abs(t) / ode_step - 1e-9))
    h = t / n_steps
    for step in range(1, n_steps + 1):
        k1x, k1W = _rhs(m, chart, x, W, vel_col)
        k2x, k2W = _rhs(m, chart, x + 0.5 * h * k1x, W + 0.5 * h * k1W, vel_col)
        k3x, k3W = _rhs(m, chart, x + 0.5 * h * k2x, W + 0.5 * h * k2W, vel_col)
        k4x, k4W = _rhs(m, chart, x + h * k3x, W + h * k3W, vel_col)
        x = x + (h / 6) * (k1x + 2 * k2x + 2 * k3x + k4x)
        W = W + (h / 6) * (k1W + 2 * k2W + 2 * k3W + k4W)
        if not m.in_domain(chart, x).all():
            raise ChartExitError(f"trajectory left the chart domain of {m.name}")
        if normalize:
            chart, x, W = m.normalize(chart, x, W)
        if orth_cols is not None and step % REORTH_EVERY == 0:
            g = m.metric(chart, x)
            sub = W[:, :, orth_cols]
            gram = np.einsum("bia,bij,bjc->bac", sub, g, sub)
            if np.abs(gram - np.eye(gram.shape[-1])).max() > REORTH_DRIFT:
                W[:, :, orth_cols] = modified_gram_schmidt(g, sub)
    return chart, x, W


def geodesic_step(m: ManifoldModel, p: Point, v, t: float, *, ode_step=ODE_STEP):
    """Follow the geodesic with initial velocity ``v`` for time ``t``.

    Returns the end point and the end velocity.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    chart, x, W = integrate(m, p.chart, p.coords, v[:, :, None], t, ode_step=ode_step)
    return Point(chart, x), W[:, :, 0]


def parallel_transport(m: ManifoldModel, curve, w, *, ode_step=ODE_STEP):
    """Parallel transport ``w`` along the geodesic ``curve = (p, v, duration)``.

    ``w`` may hold one vector per point, shape ``(B, n)``, or several, shape
    ``(B, n, r)``. Returns the transported vectors in the chart of the end
    point (see ``transport_with_endpoint`` to get that point as well).
    """
    return transport_with_endpoint(m, curve, w, ode_step=ode_step)[1]


def transport_with_endpoint(m: ManifoldModel, curve, w, *, ode_step=ODE_STEP):
    p, v, duration = curve
    v = np.atleast_2d(np.asarray(v, dtype=float))
    w = np.asarray(w, dtype=float)
    single = w.ndim <= 2
    w = np.atleast_2d(w)
    if single:
        w = w[:, :, None]
    W = np.concatenate([v[:, :, None], w], axis=2)
    chart, x, W = integrate(m, p.chart, p.coords, W, duration, ode_step=ode_step)
    out = W[:, :, 1:]
    return Point(chart, x), (out[:, :, 0] if single else out), W[:, :, 0]
