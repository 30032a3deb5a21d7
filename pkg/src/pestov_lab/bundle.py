"""k-tuples of tangent vectors, orthonormal frames, and the frame flows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import FD_STEP, ODE_STEP
from .flows import integrate, modified_gram_schmidt
from .manifolds import ManifoldModel, Point, inner

ScalarBundleFunction = Callable[["Frame"], np.ndarray]
SemiBasicField = Callable[["Frame"], np.ndarray]

GRAM_DET_MIN = 1e-12


class DegenerateFrameError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    """A batch of k-tuples: base points plus k vectors per point.

    ``V`` has shape ``(B, n, k)``; column ``i`` is ``v_i`` in chart
    components. Indices are 0-based throughout the package.
    """

    chart: np.ndarray
    x: np.ndarray
    V: np.ndarray

    @classmethod
    def make(cls, x, V, chart=0) -> "Frame":
        x = np.asarray(x, dtype=float)
        V = np.asarray(V, dtype=float)
        if x.ndim == 1:
            x, V = x[None], V[None]
        if V.ndim == 2:
            V = V[:, :, None]
        chart = np.broadcast_to(np.asarray(chart, dtype=int), x.shape[:1]).copy()
        return cls(chart, x, V)

    @classmethod
    def at(cls, p: Point, V) -> "Frame":
        V = np.asarray(V, dtype=float)
        if V.ndim == 2:
            V = np.broadcast_to(V, (len(p),) + V.shape).copy()
        return cls(p.chart, p.coords, V)

    @property
    def B(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def k(self) -> int:
        return self.V.shape[2]

    @property
    def point(self) -> Point:
        return Point(self.chart, self.x)

    def vector(self, i: int) -> np.ndarray:
        return self.V[:, :, i]

    def with_vectors(self, V) -> "Frame":
        return Frame(self.chart, self.x, V)

    def tile(self, reps: int) -> "Frame":
        """Repeat the whole batch ``reps`` times (repeat index outermost)."""
        return Frame(
            np.tile(self.chart, reps), np.tile(self.x, (reps, 1)), np.tile(self.V, (reps, 1, 1))
        )

    def take(self, idx) -> "Frame":
        return Frame(self.chart[idx], self.x[idx], self.V[idx])

    def gram(self, m: ManifoldModel) -> np.ndarray:
        g = m.metric(self.chart, self.x)
        return np.einsum("bia,bij,bjc->bac", self.V, g, self.V)

    def orthonormality_error(self, m: ManifoldModel) -> np.ndarray:
        return np.abs(self.gram(m) - np.eye(self.k)).max(axis=(1, 2))

    def is_orthonormal(self, m: ManifoldModel, tol: float = 1e-9) -> bool:
        return bool(np.all(self.orthonormality_error(m) <= tol))

    def in_chart(self, m: ManifoldModel, target: int) -> "Frame":
        x, V = m.to_chart(self.chart, self.x, self.V, target)
        return Frame(np.full(self.B, target), x, V)


def _concat(frames):
    return Frame(
        np.concatenate([f.chart for f in frames]),
        np.concatenate([f.x for f in frames]),
        np.concatenate([f.V for f in frames]),
    )


def frame_flow(m: ManifoldModel, f: Frame, i: int, t: float, *, ode_step=ODE_STEP) -> Frame:
    """Transport every vector of ``f`` along the geodesic generated by ``v_i``."""
    if not 0 <= i < f.k:
        raise IndexError(f"frame index {i} out of range for k={f.k}")
    orth = slice(None) if f.is_orthonormal(m) else None
    chart, x, V = integrate(
        m, f.chart, f.x, f.V, t, vel_col=i, ode_step=ode_step, orth_cols=orth
    )
    return Frame(chart, x, V)


def horizontal_shift(m: ManifoldModel, f: Frame, U, h: float, *, ode_step=ODE_STEP, carry=None):
    """Parallel-transport ``f`` a distance ``+-h`` along each direction in ``U``.

    ``U`` has shape ``(B, n, d)``. Returns the shifted frames (batch
    ``2 * d * B`` ordered as ``[sign, direction, b]`` with sign ``+`` first),
    the end velocities ``(2dB, n)`` and the transported ``carry`` vectors
    ``(2dB, n, r)`` if given. The shift along ``-u`` is realised as a flow
    with velocity ``-u``, so every stencil member is a single forward flow
    and no chart switch happens inside a stencil.
    """
    B, n, d = U.shape
    tiled = f.tile(2 * d)
    vel = np.concatenate([U, -U], axis=2)  # (B, n, 2d) sign-major
    vel = np.moveaxis(vel, 2, 0).reshape(2 * d * B, n)
    parts = [vel[:, :, None], tiled.V]
    if carry is not None:
        parts.append(np.tile(carry, (2 * d, 1, 1)))
    W = np.concatenate(parts, axis=2)
    chart, x, W = integrate(m, tiled.chart, tiled.x, W, h, ode_step=ode_step, normalize=False)
    k = f.k
    shifted = Frame(chart, x, W[:, :, 1 : 1 + k])
    carried = W[:, :, 1 + k :] if carry is not None else None
    return shifted, W[:, :, 0], carried


def generator(
    m: ManifoldModel, phi: ScalarBundleFunction, f: Frame, i: int, *, h=FD_STEP, ode_step=ODE_STEP
) -> np.ndarray:
    """Derivative of ``phi`` along the i-th frame flow, by central differences."""
    if not 0 <= i < f.k:
        raise IndexError(f"frame index {i} out of range for k={f.k}")
    shifted, _, _ = horizontal_shift(m, f, f.V[:, :, i : i + 1], h, ode_step=ode_step)
    vals = np.asarray(phi(shifted)).reshape(2, f.B)
    return (vals[0] - vals[1]) / (2 * h)


def gram_schmidt(m: ManifoldModel, f: Frame) -> Frame:
    """Orthonormalize the tuple, keeping the flag and its orientation."""
    det = np.linalg.det(f.gram(m))
    if np.any(det <= GRAM_DET_MIN):
        raise DegenerateFrameError("tuple is numerically linearly dependent")
    return f.with_vectors(modified_gram_schmidt(m.metric(f.chart, f.x), f.V))


def _exp_bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(x, lo=0.5, hi=0.75, bump=_exp_bump):
    """C-infinity step: 0 for ``x <= lo``, 1 for ``x >= hi``, monotone between."""
    t = (np.asarray(x, dtype=float) - lo) / (hi - lo)
    a, b = bump(t), bump(1 - t)
    return a / (a + b)


def cutoff_extension(m: ManifoldModel, phi: ScalarBundleFunction, cutoff=smooth_step):
    """Extend a function on orthonormal frames to arbitrary tuples.

    ``H(det gram) * phi(gram_schmidt(w))``, with ``H`` vanishing for Gram
    determinant at most 1/2 and equal to 1 above 3/4.
    """

    def extended(f: Frame) -> np.ndarray:
        det = np.linalg.det(f.gram(m))
        weight = cutoff(det)
        out = np.zeros(f.B)
        live = weight > 0
        if live.any():
            sub = f.take(live)
            ortho = sub.with_vectors(modified_gram_schmidt(m.metric(sub.chart, sub.x), sub.V))
            out[live] = weight[live] * np.asarray(phi(ortho))
        return out

    return extended


def truncate_frame(f: Frame, k: int) -> Frame:
    if not 1 <= k <= f.k:
        raise ValueError(f"cannot keep {k} of {f.k} vectors")
    return f.with_vectors(f.V[:, :, :k])


def haar_stiefel(rng, size: int, n: int, k: int) -> np.ndarray:
    """Haar-distributed orthonormal n x k matrices via sign-corrected QR."""
    Z = rng.standard_normal((size, n, k))
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    bad = np.abs(d).min(axis=-1) < 1e-12
    if bad.any():
        Q[bad] = haar_stiefel(rng, int(bad.sum()), n, k)
        d = np.where(bad[:, None], 1.0, d)
    return Q * np.where(d < 0, -1.0, 1.0)[:, None, :]


def sample_fiber(m: ManifoldModel, p: Point, k: int, rng) -> Frame:
    """Haar-random orthonormal k-frames at the points ``p``."""
    Q = haar_stiefel(rng, len(p), m.dim, k)
    E = m.orthonormal_basis(p.chart, p.coords)
    return Frame(p.chart, p.coords, E @ Q)


def sample_frames(m: ManifoldModel, k: int, size: int, rng, *, probe: bool = False) -> Frame:
    """Frames with base from the normalized volume (or probe region) and Haar fiber."""
    chart, x = m.sample_probe_base(rng, size) if probe else m.sample_base(rng, size)
    return sample_fiber(m, Point(chart, x), k, rng)


def random_tuple(m: ManifoldModel, k: int, size: int, rng, spread: float = 0.3) -> Frame:
    """Generic (non-orthonormal) k-tuples near orthonormal frames, for T^kM checks."""
    f = sample_frames(m, k, size, rng, probe=True)
    E = m.orthonormal_basis(f.chart, f.x)
    A = np.eye(k) + spread * rng.standard_normal((size, k, k))
    noise = 0.2 * spread * rng.standard_normal((size, m.dim, k))
    return f.with_vectors(f.V @ A + E @ noise)
