"""Monte Carlo integration over the frame bundle and the integrated identities.

Samples are drawn from the product of the normalized Riemannian volume and
the Haar measure on each fiber. Every identity is estimated as the mean of its
pointwise defect ``lhs - rhs`` on one sample stream (common random numbers),
so the standard error is that of the defect rather than of the two sides.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bundle import generator, sample_frames
from .config import StepSizes
from .diffops import (
    div_h,
    frame_vector_field,
    generator_fn,
    grad_h,
    grad_v_all,
    project_vertical,
)
from .identities import curvature_sum
from .manifolds import ManifoldModel, inner

CHUNK = 4096
SIGMAS = 3.0
CALIBRATION_SAMPLES = 2048
# the Richardson estimate |I(2h) - I(h)| is ~3x the bias at h; we allow all of it
BIAS_SAFETY = 1.0
# identities whose two sides vanish identically give stderr 0; allow round-off
ABS_FLOOR = 1e-12
INVARIANCE_PROBES = 100
INVARIANCE_TOL = 1e-6


class NonCompactError(ValueError):
    pass


class IntegratedId(str, Enum):
    DIVH_VANISHES = "DIVH_VANISHES"
    FLOW_BY_PARTS = "FLOW_BY_PARTS"
    INT_PESTOV = "INT_PESTOV"
    BUNDLE_PESTOV = "BUNDLE_PESTOV"
    INVARIANT_ID = "INVARIANT_ID"


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int


def _threads():
    try:
        return max(1, int(os.environ.get("PESTOV_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _sample_values(m, F, k, n_samples, seed, chunk=CHUNK):
    """Evaluate ``F`` on ``n_samples`` frames; returns an ``(N, c)`` array.

    Chunk ``c`` uses the ``c``-th child of ``SeedSequence(seed)``, so the
    values do not depend on how many worker threads run the chunks.
    """
    if not m.compact:
        raise NonCompactError(f"{m.name} is not compact; no normalized volume to integrate over")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    sizes = [min(chunk, n_samples - s) for s in range(0, n_samples, chunk)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(a):
        rng = np.random.default_rng(children[a])
        f = sample_frames(m, k, sizes[a], rng)
        out = np.asarray(F(f), dtype=float)
        return out.reshape(sizes[a], -1)

    workers = min(_threads(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(a) for a in range(len(sizes))]
    return np.concatenate(parts, axis=0)


def _estimate(values, seed):
    n = values.shape[0]
    return MCEstimate(float(np.mean(values)), float(np.std(values, ddof=1) / np.sqrt(n)), n, seed)


def mc_integral(m: ManifoldModel, F, k: int, n_samples: int, seed: int = 0) -> MCEstimate:
    """Integral of ``F`` over the k-frame bundle with respect to the normalized measure."""
    return _estimate(_sample_values(m, F, k, n_samples, seed)[:, 0], seed)


# -- integrands: each returns (lhs, rhs) with shape (B, c) -------------------------


def _stack(*cols):
    return np.stack(cols, axis=-1)


def divh_integrand(m, X, steps):
    def F(f):
        d = div_h(m, X, f, h=steps.fd_step, ode_step=steps.ode_step)
        return _stack(d), _stack(np.zeros_like(d))

    return F


def flow_by_parts_integrand(m, phi, psi, i, steps):
    h, dt = steps.fd_step, steps.ode_step

    def F(f):
        a = psi(f) * generator(m, phi, f, i, h=h, ode_step=dt)
        b = phi(f) * generator(m, psi, f, i, h=h, ode_step=dt)
        return _stack(a), _stack(-b)

    return F


def int_pestov_integrand(m, phi, pairs, steps):
    """Both sides of the integrated Pestov identity for every ``(i, j)`` in ``pairs``."""
    h, hi, dt = steps.fd_step, steps.inner, steps.ode_step

    def F(f):
        g = m.metric(f.chart, f.x)
        gh = grad_h(m, phi, f, h=h, ode_step=dt)
        gv = grad_v_all(m, phi, f, h=h)
        cache = {}
        lhs, rhs = [], []
        for i, j in pairs:
            if i not in cache:
                Gi = generator_fn(m, phi, i, h=hi, ode_step=dt)
                cache[i] = (grad_v_all(m, Gi, f, h=h), grad_h(m, Gi, f, h=h, ode_step=dt))
            gvG, ghG = cache[i]
            sq = inner(g, gh, gh) if i == j else np.zeros(f.B)
            lhs.append(sq - curvature_sum(m, f, gv, f.V[:, :, i], gv[:, :, j]))
            rhs.append(inner(g, gh, gvG[:, :, j]) + inner(g, ghG, gv[:, :, j]))
        return np.stack(lhs, -1), np.stack(rhs, -1)

    return F


def _projected_curvature(m, f, W, slots):
    """``sum_{i in slots} sum_j <R(w_j, v_j) v_i, w_i>``."""
    total = np.zeros(f.B)
    for i in slots:
        total += curvature_sum(m, f, W, f.V[:, :, i], W[:, :, i])
    return total


def bundle_pestov_integrand(m, phi, steps):
    h, hi, dt = steps.fd_step, steps.inner, steps.ode_step

    def F(f):
        k = f.k
        g = m.metric(f.chart, f.x)
        gh = grad_h(m, phi, f, h=h, ode_step=dt)
        W = project_vertical(m, f, grad_v_all(m, phi, f, h=h))
        gens = np.stack([generator(m, phi, f, i, h=h, ode_step=dt) for i in range(k)])
        lhs = (
            k * inner(g, gh, gh)
            - 0.5 * (k + 1) * np.sum(gens**2, axis=0)
            - _projected_curvature(m, f, W, range(k))
        )
        rhs = np.zeros(f.B)
        for i in range(k):
            Gi = generator_fn(m, phi, i, h=hi, ode_step=dt)
            WG = project_vertical(m, f, grad_v_all(m, Gi, f, h=h))
            rhs += inner(g, gh, WG[:, :, i])
            rhs += inner(g, grad_h(m, Gi, f, h=h, ode_step=dt), W[:, :, i])
        return _stack(lhs), _stack(rhs)

    return F


def invariant_integrand(m, phi, i, steps):
    """Both sides of the flow-invariant identity for ``k = n``.

    Sign convention: ``1/2 sum_{j != i} |G^j phi|^2 = sum_j <R(w_j, v_j) v_i, w_i>``,
    which is what the derivation from the bundle Pestov identity gives.
    """
    h, dt = steps.fd_step, steps.ode_step

    def F(f):
        W = project_vertical(m, f, grad_v_all(m, phi, f, h=h))
        gens = [generator(m, phi, f, j, h=h, ode_step=dt) for j in range(f.k) if j != i]
        lhs = 0.5 * np.sum(np.square(gens), axis=0) if gens else np.zeros(f.B)
        rhs = _projected_curvature(m, f, W, [i])
        return _stack(lhs), _stack(rhs)

    return F


# -- verdicts -----------------------------------------------------------------------


@dataclass(frozen=True)
class IntegratedCheck:
    identity: str
    indices: tuple
    estimate: MCEstimate | None
    lhs: float = float("nan")
    rhs: float = float("nan")
    bias_allowance: float = 0.0
    verdict: str = "SKIP"
    cause: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return max(abs(self.lhs), abs(self.rhs))


def _verdict(est: MCEstimate, allowance: float, abs_tol: float = 0.0) -> str:
    ok = abs(est.mean) <= SIGMAS * est.stderr + allowance + abs_tol + ABS_FLOOR
    return "PASS" if ok else "FAIL"


def _defects(m, integrand, k, n, seed):
    def F(f):
        lhs, rhs = integrand(f)
        return np.concatenate([lhs - rhs, lhs, rhs], axis=1)

    vals = _sample_values(m, F, k, n, seed)
    c = vals.shape[1] // 3
    return vals[:, :c], vals[:, c : 2 * c], vals[:, 2 * c :]


def bias_allowance(m, make_integrand, k, steps: StepSizes, seed, n=CALIBRATION_SAMPLES):
    """Richardson estimate of the finite-difference bias of each defect column.

    The defect is averaged at ``fd_step`` and ``2 * fd_step`` on the same
    frames; the difference of the two means is dominated by the ``h^2``
    truncation term and bounds the bias at ``fd_step``.
    """
    coarse = StepSizes(2 * steps.fd_step, None if steps.inner_step is None else 2 * steps.inner, steps.ode_step)
    d1, _, _ = _defects(m, make_integrand(steps), k, n, seed)
    d2, _, _ = _defects(m, make_integrand(coarse), k, n, seed)
    return BIAS_SAFETY * np.abs(d2.mean(axis=0) - d1.mean(axis=0))


def run_integrated(
    m, make_integrand, k, n_samples, seed, steps, identity, labels, *, calibrate=True, abs_tol=0.0
):
    d, lhs, rhs = _defects(m, make_integrand(steps), k, n_samples, seed)
    allow = (
        bias_allowance(m, make_integrand, k, steps, seed + 1)
        if calibrate
        else np.zeros(d.shape[1])
    )
    out = []
    for c, idx in enumerate(labels):
        est = _estimate(d[:, c], seed)
        out.append(
            IntegratedCheck(
                identity,
                idx,
                est,
                float(lhs[:, c].mean()),
                float(rhs[:, c].mean()),
                float(allow[c]),
                _verdict(est, float(allow[c]), abs_tol),
            )
        )
    return out


def flow_invariance_probe(m, phi, k, i, steps, seed, n=INVARIANCE_PROBES):
    """``max |G^i phi|`` over ``n`` probe frames."""
    rng = np.random.default_rng([seed, 4242])
    f = sample_frames(m, k, n, rng, probe=True)
    return float(np.abs(generator(m, phi, f, i, h=steps.fd_step, ode_step=steps.ode_step)).max())


def integrated_residual(
    identity,
    m: ManifoldModel,
    phi,
    k: int,
    n_samples: int,
    seed: int = 0,
    *,
    i: int = 0,
    j: int | None = None,
    psi=None,
    field=None,
    steps: StepSizes = StepSizes(),
    calibrate: bool = True,
):
    """Integrated residual(s) of ``identity``; a list of ``IntegratedCheck``.

    ``INT_PESTOV`` returns one record per ``(i, j)`` pair (all pairs when
    ``j`` is None), the others a single record. Precondition failures come
    back as ``SKIP`` records with a cause instead of raising.
    """
    identity = IntegratedId(identity)
    name = identity.value
    if not m.compact:
        raise NonCompactError(f"{m.name} is not compact")
    if not 0 <= i < k:
        raise IndexError(f"index {i} out of range for k={k}")

    if identity is IntegratedId.DIVH_VANISHES:
        X = field if field is not None else (lambda f: phi(f)[:, None] * f.V[:, :, 0])
        mk = lambda st: divh_integrand(m, X, st)  # noqa: E731
        return run_integrated(m, mk, k, n_samples, seed, steps, name, [()], calibrate=calibrate)

    if identity is IntegratedId.FLOW_BY_PARTS:
        if psi is None:
            raise ValueError("FLOW_BY_PARTS needs a second function psi")
        mk = lambda st: flow_by_parts_integrand(m, phi, psi, i, st)  # noqa: E731
        return run_integrated(m, mk, k, n_samples, seed, steps, name, [(i,)], calibrate=calibrate)

    if identity is IntegratedId.INT_PESTOV:
        pairs = [(a, b) for a in range(k) for b in range(k)] if j is None else [(i, j)]
        mk = lambda st: int_pestov_integrand(m, phi, pairs, st)  # noqa: E731
        return run_integrated(m, mk, k, n_samples, seed, steps, name, pairs, calibrate=calibrate)

    if identity is IntegratedId.BUNDLE_PESTOV:
        mk = lambda st: bundle_pestov_integrand(m, phi, st)  # noqa: E731
        return run_integrated(m, mk, k, n_samples, seed, steps, name, [()], calibrate=calibrate)

    # INVARIANT_ID
    if k != m.dim:
        return [IntegratedCheck(name, (i,), None, cause=f"needs k = n = {m.dim}, got k = {k}")]
    drift = flow_invariance_probe(m, phi, k, i, steps, seed)
    if drift >= INVARIANCE_TOL:
        return [
            IntegratedCheck(
                name,
                (i,),
                None,
                cause=f"not invariant under frame flow {i}: max |G^i phi| = {drift:.3g}",
                extra={"invariance_probe": drift},
            )
        ]
    mk = lambda st: invariant_integrand(m, phi, i, st)  # noqa: E731
    out = run_integrated(m, mk, k, n_samples, seed, steps, name, [(i,)], calibrate=calibrate)
    return [
        IntegratedCheck(**{**r.__dict__, "extra": {"invariance_probe": drift}}) for r in out
    ]


def flow_by_parts_pair(m, phi, psi, k, n_samples, seed=0, *, i=0, steps=StepSizes()):
    """Residuals for ``(phi, psi)`` and ``(psi, phi)``; equal by construction."""
    a = integrated_residual("FLOW_BY_PARTS", m, phi, k, n_samples, seed, i=i, psi=psi, steps=steps, calibrate=False)
    b = integrated_residual("FLOW_BY_PARTS", m, psi, k, n_samples, seed, i=i, psi=phi, steps=steps, calibrate=False)
    return a[0], b[0]


def vector_field_divergence(m, k, n_samples, seed=0, slot=0, steps=StepSizes()):
    """``int div^h v_slot``; zero pointwise as well as on average."""
    X = frame_vector_field(slot)
    return mc_integral(m, lambda f: div_h(m, X, f, h=steps.fd_step, ode_step=steps.ode_step), k, n_samples, seed)

