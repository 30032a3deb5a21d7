"""Pointwise residuals of the local identities on the k-tuple bundle.

Each residual is ``LHS - RHS`` of one identity, evaluated with nested central
differences. ``Residual.relative`` divides by the magnitude of the largest
participating term (floored at 1), which is the statistic the suites report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bundle import Frame, cutoff_extension, generator
from .config import StepSizes
from .diffops import (
    cov_h,
    cov_v,
    div_h,
    div_v,
    generator_fn,
    grad_h,
    grad_h_fn,
    grad_v,
    grad_v_all,
    grad_v_fn,
    grad_v_proj,
)
from .manifolds import ManifoldModel, inner

EPS = np.finfo(float).eps
# round-off level of a two-level central difference (measured: residuals of
# exactly cancelling identities sit near eps / h^2), in units of
# eps * scale / (h_outer * h_inner)
NOISE_GAIN = 1.0


class IdentityId(str, Enum):
    SYM_GRAD = "SYM_GRAD"
    SYM_DIV = "SYM_DIV"
    TENSOR = "TENSOR"
    SYM_FLOW = "SYM_FLOW"
    G_GRADV = "G_GRADV"
    PESTOV = "PESTOV"
    WEDGE = "WEDGE"
    GRADV_SPAN = "GRADV_SPAN"


LEMMA_IDS = (
    IdentityId.SYM_GRAD,
    IdentityId.SYM_DIV,
    IdentityId.TENSOR,
    IdentityId.SYM_FLOW,
    IdentityId.G_GRADV,
    IdentityId.PESTOV,
)


@dataclass(frozen=True)
class Aux:
    """Indices and directions an identity is evaluated at.

    ``u`` and ``w`` are ``(B, n)`` tangent vectors; ``plane_k`` is the plane
    dimension for the Grassmannian identities.
    """

    i: int = 0
    j: int = 0
    l: int = 0
    u: np.ndarray | None = None
    w: np.ndarray | None = None
    plane_k: int = 1


def random_aux(m: ManifoldModel, f: Frame, rng, **indices) -> Aux:
    E = m.orthonormal_basis(f.chart, f.x)
    a = rng.standard_normal((f.B, m.dim))
    b = rng.standard_normal((f.B, m.dim))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    return Aux(u=np.einsum("bij,bj->bi", E, a), w=np.einsum("bij,bj->bi", E, b), **indices)


@dataclass(frozen=True)
class Residual:
    value: np.ndarray
    scale: np.ndarray
    fd_step: float
    terms: dict = field(default_factory=dict, repr=False)

    @property
    def relative(self) -> np.ndarray:
        return np.abs(self.value) / np.maximum(self.scale, 1.0)


def _residual(lhs, rhs, fd_step):
    terms = {**{f"lhs{a}": t for a, t in enumerate(lhs)}, **{f"rhs{a}": t for a, t in enumerate(rhs)}}
    value = sum(lhs) - sum(rhs)
    scale = np.max(np.abs(np.stack(list(lhs) + list(rhs))), axis=0)
    return Residual(np.asarray(value, dtype=float), scale, fd_step, terms)


def curvature_sum(m, f, grads, a, b):
    """``sum_l <R(grads_l, v_l) a, b>`` for ``grads`` of shape ``(B, n, k)``."""
    g = m.metric(f.chart, f.x)
    total = np.zeros(f.B)
    for l in range(f.k):
        Rz = m.curvature(f.chart, f.x, grads[:, :, l], f.V[:, :, l], a)
        total += inner(g, Rz, b)
    return total


def _check_indices(f, *idx):
    for i in idx:
        if not 0 <= i < f.k:
            raise IndexError(f"index {i} out of range for k={f.k}")


def pointwise_residual(
    identity,
    m: ManifoldModel,
    phi,
    f: Frame,
    aux: Aux | None = None,
    steps: StepSizes = StepSizes(),
) -> Residual:
    """Residual of ``identity`` at every frame of the batch ``f``."""
    identity = IdentityId(identity)
    aux = aux or Aux()
    h, hi, dt = steps.fd_step, steps.inner, steps.ode_step
    g = m.metric(f.chart, f.x)
    ip = lambda a, b: inner(g, a, b)  # noqa: E731

    if identity in (IdentityId.WEDGE, IdentityId.GRADV_SPAN):
        if f.k != m.dim or not f.is_orthonormal(m):
            raise ValueError(f"{identity.value} needs full orthonormal frames")
        return _grassmann_residual(identity, m, phi, f, aux.plane_k, h)

    i, j, l = aux.i, aux.j, aux.l
    _check_indices(f, i, j, l)

    if identity is IdentityId.SYM_GRAD:
        a = ip(cov_v(m, grad_h_fn(m, phi, h=hi, ode_step=dt), f, i, aux.w, h=h), aux.u)
        b = ip(cov_h(m, grad_v_fn(m, phi, i, h=hi), f, aux.u, h=h, ode_step=dt), aux.w)
        return _residual([a], [b], h)

    if identity is IdentityId.SYM_DIV:
        a = div_v(m, grad_h_fn(m, phi, h=hi, ode_step=dt), f, i, h=h)
        b = div_h(m, grad_v_fn(m, phi, i, h=hi), f, h=h, ode_step=dt)
        return _residual([a], [b], h)

    if identity is IdentityId.TENSOR:
        gh = grad_h_fn(m, phi, h=hi, ode_step=dt)
        a = ip(cov_h(m, gh, f, aux.w, h=h, ode_step=dt), aux.u)
        b = ip(cov_h(m, gh, f, aux.u, h=h, ode_step=dt), aux.w)
        c = curvature_sum(m, f, grad_v_all(m, phi, f, h=h), aux.w, aux.u)
        return _residual([a, -b], [c], h)

    if identity is IdentityId.SYM_FLOW:
        a = generator(m, generator_fn(m, phi, j, h=hi, ode_step=dt), f, i, h=h, ode_step=dt)
        b = generator(m, generator_fn(m, phi, i, h=hi, ode_step=dt), f, j, h=h, ode_step=dt)
        c = curvature_sum(m, f, grad_v_all(m, phi, f, h=h), f.V[:, :, i], f.V[:, :, j])
        return _residual([a, -b], [c], h)

    if identity is IdentityId.G_GRADV:
        a = ip(grad_v(m, generator_fn(m, phi, j, h=hi, ode_step=dt), f, i, h=h), f.V[:, :, l])

        def pairing(fr):
            gr = grad_v(m, phi, fr, i, h=hi)
            return inner(m.metric(fr.chart, fr.x), gr, fr.V[:, :, l])

        b = generator(m, pairing, f, j, h=h, ode_step=dt)
        c = generator(m, phi, f, l, h=h, ode_step=dt) if i == j else np.zeros(f.B)
        return _residual([a], [b, c], h)

    if identity is IdentityId.PESTOV:
        return _pestov(m, phi, f, i, j, steps)

    raise ValueError(f"unsupported identity {identity}")


def pestov_terms(m, phi, f, i, j, steps: StepSizes):
    """The five terms of the lifted Pestov identity, in order

    ``div^{v,j} Z^i``, ``div^h Y^{j,i}``, ``delta_ij |grad^h phi|^2``,
    ``sum_l <R(grad^{v,l} phi, v_l) v_i, grad^{v,j} phi>``,
    ``2 <grad^h phi, grad^{v,j} G^i phi>``.
    """
    h, hi, dt = steps.fd_step, steps.inner, steps.ode_step

    def Z(fr):
        return generator(m, phi, fr, i, h=hi, ode_step=dt)[:, None] * grad_h(
            m, phi, fr, h=hi, ode_step=dt
        )

    def Y(fr):
        gh = grad_h(m, phi, fr, h=hi, ode_step=dt)
        gv = grad_v(m, phi, fr, j, h=hi)
        gi = generator(m, phi, fr, i, h=hi, ode_step=dt)
        pair = inner(m.metric(fr.chart, fr.x), gh, gv)
        return pair[:, None] * fr.V[:, :, i] - gi[:, None] * gv

    g = m.metric(f.chart, f.x)
    gh = grad_h(m, phi, f, h=h, ode_step=dt)
    gv = grad_v_all(m, phi, f, h=h)
    t1 = div_v(m, Z, f, j, h=h)
    t2 = div_h(m, Y, f, h=h, ode_step=dt)
    t3 = inner(g, gh, gh) if i == j else np.zeros(f.B)
    t4 = curvature_sum(m, f, gv, f.V[:, :, i], gv[:, :, j])
    t5 = 2 * inner(g, gh, grad_v(m, generator_fn(m, phi, i, h=hi, ode_step=dt), f, j, h=h))
    return t1, t2, t3, t4, t5


def _pestov(m, phi, f, i, j, steps):
    t1, t2, t3, t4, t5 = pestov_terms(m, phi, f, i, j, steps)
    return _residual([t1, t2, t3], [t4, t5], steps.fd_step)


def frame_pairings(m, f, W):
    """``C[b, j, a] = <W_j, v_a>`` for a tuple ``W`` of shape ``(B, n, r)``."""
    g = m.metric(f.chart, f.x)
    return np.einsum("bij,bil,bla->bja", W, g, f.V)


def wedge_components(C, weights):
    """Components of ``sum_j weights_j w_j ^ v_j`` on ``v_a ^ v_b`` (a < b)."""
    c = np.asarray(weights, dtype=float)
    M = c[None, None, :] * np.swapaxes(C, 1, 2) - c[None, :, None] * C
    # M[b, a, bb] = c_bb C[bb, a] - c_a C[a, bb]
    n = C.shape[1]
    iu = np.triu_indices(n, 1)
    return M[:, iu[0], iu[1]]


def _grassmann_residual(identity, m, phi, f, k, h):
    n = m.dim
    if not 1 <= k <= n:
        raise ValueError("plane dimension out of range")
    ext = cutoff_extension(m, phi)
    W = grad_v_proj(m, ext, f, h=h)
    C = frame_pairings(m, f, W)
    if identity is IdentityId.GRADV_SPAN:
        blocks = [np.abs(C[:, k:, k:]).reshape(f.B, -1), np.abs(C[:, :k, :k]).reshape(f.B, -1)]
        value = np.concatenate(blocks, axis=1).max(axis=1)
        scale = np.abs(C).reshape(f.B, -1).max(axis=1)
        return Residual(value, scale, h, {"pairings": C})
    full = wedge_components(C, np.ones(n))
    lead = wedge_components(C, (np.arange(n) < k).astype(float))
    diff = full - 2 * lead
    value = np.linalg.norm(diff, axis=1)
    scale = np.maximum(np.linalg.norm(full, axis=1), 2 * np.linalg.norm(lead, axis=1))
    return Residual(value, scale, h, {"full": full, "lead": lead})


@dataclass(frozen=True)
class ConvergenceResult:
    steps: tuple
    relative: np.ndarray  # (S, B)
    order: np.ndarray  # (B,)
    noise_floor: np.ndarray  # (B,) bool


def noise_level(scale, h_outer, h_inner):
    return NOISE_GAIN * EPS * np.maximum(scale, 1.0) / (h_outer * h_inner)


def convergence_order(
    identity,
    m: ManifoldModel,
    phi,
    f: Frame,
    aux: Aux | None = None,
    steps=(1e-3, 5e-4, 2.5e-4),
    base: StepSizes = StepSizes(),
) -> ConvergenceResult:
    """Least-squares slope of log(relative residual) against log(step).

    A sample is flagged as noise floor when its residual at the smallest step
    is within a factor 3 of the round-off level of nested differencing, in
    which case the slope is meaningless and reported as NaN.
    """
    steps = tuple(sorted(steps, reverse=True))
    if len(steps) < 3:
        raise ValueError("need at least three steps")
    rel = []
    floor = None
    for h in steps:
        st = base.with_fd_step(h)
        r = pointwise_residual(identity, m, phi, f, aux, st)
        rel.append(r.relative)
        floor = noise_level(r.scale, h, st.inner) / np.maximum(r.scale, 1.0)
    rel = np.array(rel)
    noise = rel[-1] < 3 * floor
    logh = np.log(np.array(steps))
    with np.errstate(divide="ignore"):
        logr = np.log(np.maximum(rel, 1e-300))
    A = np.vstack([logh, np.ones_like(logh)]).T
    slope = np.linalg.lstsq(A, logr, rcond=None)[0][0]
    slope = np.where(noise, np.nan, slope)
    return ConvergenceResult(steps, rel, slope, noise)
