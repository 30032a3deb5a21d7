"""Chart-based model Riemannian manifolds.

Every array argument carries a leading batch axis: ``chart`` has shape
``(B,)``, points ``x`` have shape ``(B, n)`` and bundles of tangent vectors
``W`` have shape ``(B, n, m)`` with the vectors stored as columns. Tangent
vectors are given by their chart components at the accompanying point.

The curvature convention is ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``,
so that ``<R(x, y) y, x>`` is the sectional curvature of an orthonormal pair.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .config import METRIC_FD_STEP

__all__ = [
    "ChartExitError",
    "Point",
    "ManifoldModel",
    "FlatTorus",
    "ComplexTorus",
    "Sphere",
    "Hyperbolic",
    "Product",
    "get_manifold",
    "christoffel_at",
    "riemann",
    "curvature_operator",
    "CurvatureOperatorMatrix",
    "inner",
]


class ChartExitError(ValueError):
    """A point left the declared chart domain."""


@dataclass(frozen=True)
class Point:
    """A batch of points, each given by a chart id and chart coordinates."""

    chart: np.ndarray
    coords: np.ndarray

    @classmethod
    def at(cls, coords, chart=0) -> "Point":
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        chart = np.broadcast_to(np.asarray(chart, dtype=int), coords.shape[:1]).copy()
        return cls(chart, coords)

    def __len__(self) -> int:
        return self.coords.shape[0]


def inner(g, X, Y):
    """Batched metric pairing ``g(X, Y)``; trailing vector axes broadcast."""
    if X.ndim == 2 and Y.ndim == 2:
        return np.einsum("bi,bij,bj->b", X, g, Y)
    return np.einsum("bi...,bij,bj...->b...", X, g, Y)


@dataclass(frozen=True)
class ManifoldModel:
    """Base class for chart-based models.

    Subclasses provide ``metric`` and may override the closed forms
    ``_christoffel_closed`` / ``_riemann_closed``. Setting ``closed_form``
    to False forces the generic central-difference path for both.
    """

    dim: int
    closed_form: bool = True
    metric_fd_step: float = METRIC_FD_STEP
    curvature_fd_step: float = 1e-4

    name = "abstract"
    n_charts = 1
    compact = False
    flat = False
    # known a priori from the model; the suites compare it with the numerical probe
    nonpositive_curvature_operator = False
    complex_structure = None

    # -- geometry -------------------------------------------------------
    def metric(self, chart, x) -> np.ndarray:
        raise NotImplementedError

    def generic(self) -> "ManifoldModel":
        return dataclasses.replace(self, closed_form=False)

    def christoffel(self, chart, x) -> np.ndarray:
        """``Gamma[b, k, i, j]`` = Christoffel symbol with upper index ``k``."""
        if self.closed_form:
            out = self._christoffel_closed(chart, x)
            if out is not None:
                return out
        return self._christoffel_fd(chart, x)

    def riemann_tensor(self, chart, x) -> np.ndarray:
        """``R[b, l, i, j, k]`` with ``R(d_i, d_j) d_k = R^l_ijk d_l``."""
        if self.closed_form:
            out = self._riemann_closed(chart, x)
            if out is not None:
                return out
        return self._riemann_fd(chart, x)

    def curvature(self, chart, x, X, Y, Z) -> np.ndarray:
        """``R(X, Y) Z`` for batches of vectors of shape ``(B, n)``."""
        R = self.riemann_tensor(chart, x)
        return np.einsum("blijk,bi,bj,bk->bl", R, X, Y, Z)

    def connection_matrix(self, chart, x, v) -> np.ndarray:
        """``A[b, k, j] = Gamma^k_ij v^i``; parallel transport is ``W' = -A W``."""
        return np.einsum("bkij,bi->bkj", self.christoffel(chart, x), v)

    def _christoffel_closed(self, chart, x):
        return None

    def _riemann_closed(self, chart, x):
        return None

    def _christoffel_fd(self, chart, x):
        h = self.metric_fd_step
        B, n = x.shape
        dg = np.empty((B, n, n, n))
        for m in range(n):
            e = np.zeros(n)
            e[m] = h
            dg[:, m] = (self.metric(chart, x + e) - self.metric(chart, x - e)) / (2 * h)
        ginv = np.linalg.inv(self.metric(chart, x))
        # dg[b, m, i, j] = d_m g_ij
        # lower[b, l, i, j] = d_i g_lj + d_j g_li - d_l g_ij
        lower = (
            np.einsum("bilj->blij", dg)
            + np.einsum("bjli->blij", dg)
            - dg
        )
        return 0.5 * np.einsum("bkl,blij->bkij", ginv, lower)

    def _riemann_fd(self, chart, x):
        h = self.curvature_fd_step
        B, n = x.shape
        dG = np.empty((B, n, n, n, n))
        for m in range(n):
            e = np.zeros(n)
            e[m] = h
            dG[:, m] = (
                self.christoffel(chart, x + e) - self.christoffel(chart, x - e)
            ) / (2 * h)
        G = self.christoffel(chart, x)
        return (
            np.einsum("biljk->blijk", dG)
            - np.einsum("bjlik->blijk", dG)
            + np.einsum("blim,bmjk->blijk", G, G)
            - np.einsum("bljm,bmik->blijk", G, G)
        )

    def orthonormal_basis(self, chart, x) -> np.ndarray:
        """Gram-Schmidt of the coordinate frame; columns of ``(B, n, n)``."""
        L = np.linalg.cholesky(self.metric(chart, x))
        return np.linalg.inv(np.swapaxes(L, -1, -2))

    def inner(self, chart, x, X, Y):
        return inner(self.metric(chart, x), X, Y)

    # -- charts -----------------------------------------------------------
    def in_domain(self, chart, x) -> np.ndarray:
        return np.all(np.isfinite(x), axis=-1)

    def normalize(self, chart, x, W):
        """Move points to a preferred chart (or lattice cell); identity by default."""
        return chart, x, W

    def to_chart(self, chart, x, W, target):
        """Express points and vectors in chart ``target``."""
        if np.any(np.asarray(chart) != target):
            raise ValueError(f"{self.name} has a single chart")
        return x, W

    # -- global features (used by test functions) -------------------------
    def base_features(self, chart, x) -> np.ndarray:
        """Globally smooth functions of the base point, shape ``(B, d)``."""
        return x

    def ambient_vectors(self, chart, x, W) -> np.ndarray:
        """Chart-independent representation of tangent vectors, ``(B, D, m)``."""
        return W

    def pull_vectors(self, chart, x, A) -> np.ndarray:
        """Inverse of ``ambient_vectors`` (orthogonal projection for embeddings)."""
        return A

    # -- sampling -----------------------------------------------------------
    def sample_base(self, rng, size):
        """Points distributed by normalized Riemannian volume (compact models)."""
        raise ValueError(f"{self.name} is not compact; no normalized volume")

    def sample_probe_base(self, rng, size):
        """Points in a representative region, for pointwise checks."""
        return self.sample_base(rng, size)

    def sample_point(self, rng, size) -> Point:
        return Point(*self.sample_probe_base(rng, size))


def _conformal_christoffel(s):
    """Christoffels of ``exp(2 sigma) delta`` given ``s = grad sigma``."""
    n = s.shape[-1]
    eye = np.eye(n)
    return (
        np.einsum("ki,bj->bkij", eye, s)
        + np.einsum("kj,bi->bkij", eye, s)
        - np.einsum("ij,bk->bkij", eye, s)
    )


def _conformal_connection(s, v):
    sv = np.einsum("bi,bi->b", s, v)
    n = s.shape[-1]
    return (
        np.einsum("bk,bj->bkj", v, s)
        + sv[:, None, None] * np.eye(n)
        - np.einsum("bk,bj->bkj", s, v)
    )


def _constant_curvature_tensor(K, g):
    # R^l_ijk = K (g_jk delta^l_i - g_ik delta^l_j)
    n = g.shape[-1]
    eye = np.eye(n)
    return K * (
        np.einsum("bjk,li->blijk", g, eye) - np.einsum("bik,lj->blijk", g, eye)
    )


@dataclass(frozen=True)
class _ConformalConstantCurvature(ManifoldModel):
    K = 0.0

    def _sigma(self, x):
        raise NotImplementedError

    def _grad_sigma(self, x):
        raise NotImplementedError

    def metric(self, chart, x):
        s = np.exp(2 * self._sigma(x))
        return s[:, None, None] * np.eye(self.dim)

    def _christoffel_closed(self, chart, x):
        return _conformal_christoffel(self._grad_sigma(x))

    def _riemann_closed(self, chart, x):
        return _constant_curvature_tensor(self.K, self.metric(chart, x))

    def connection_matrix(self, chart, x, v):
        if not self.closed_form:
            return super().connection_matrix(chart, x, v)
        return _conformal_connection(self._grad_sigma(x), v)

    def curvature(self, chart, x, X, Y, Z):
        if not self.closed_form:
            return super().curvature(chart, x, X, Y, Z)
        g = self.metric(chart, x)
        return self.K * (inner(g, Y, Z)[:, None] * X - inner(g, X, Z)[:, None] * Y)

    def orthonormal_basis(self, chart, x):
        s = np.exp(-self._sigma(x))
        return s[:, None, None] * np.eye(self.dim)


@dataclass(frozen=True)
class FlatTorus(ManifoldModel):
    """``R^n / Z^n`` with the Euclidean metric."""

    compact = True
    flat = True
    nonpositive_curvature_operator = True

    @property
    def name(self):
        return f"torus:{self.dim}"

    def metric(self, chart, x):
        return np.broadcast_to(np.eye(self.dim), (x.shape[0], self.dim, self.dim)).copy()

    def _christoffel_closed(self, chart, x):
        return np.zeros((x.shape[0],) + (self.dim,) * 3)

    def _riemann_closed(self, chart, x):
        return np.zeros((x.shape[0],) + (self.dim,) * 4)

    def connection_matrix(self, chart, x, v):
        if not self.closed_form:
            return super().connection_matrix(chart, x, v)
        return np.zeros((x.shape[0], self.dim, self.dim))

    def curvature(self, chart, x, X, Y, Z):
        if not self.closed_form:
            return super().curvature(chart, x, X, Y, Z)
        return np.zeros_like(X)

    def orthonormal_basis(self, chart, x):
        return self.metric(chart, x)

    def normalize(self, chart, x, W):
        return chart, np.mod(x, 1.0), W

    def base_features(self, chart, x):
        return np.concatenate([np.cos(2 * np.pi * x), np.sin(2 * np.pi * x)], axis=-1)

    def sample_base(self, rng, size):
        return np.zeros(size, dtype=int), rng.random((size, self.dim))


@dataclass(frozen=True)
class ComplexTorus(FlatTorus):
    """Flat torus of even dimension with the standard parallel complex structure."""

    def __post_init__(self):
        if self.dim % 2:
            raise ValueError("complex torus needs even real dimension")

    @property
    def name(self):
        return f"ctorus:{self.dim}"

    @property
    def complex_structure(self):
        J = np.zeros((self.dim, self.dim))
        for a in range(0, self.dim, 2):
            J[a + 1, a] = 1.0
            J[a, a + 1] = -1.0
        return J


@dataclass(frozen=True)
class Sphere(_ConformalConstantCurvature):
    """Unit sphere ``S^n`` in two stereographic charts.

    Chart 0 projects from the north pole (its origin is the south pole),
    chart 1 from the south pole. Both carry the metric
    ``4 / (1 + |x|^2)^2 delta``; the transition is the inversion
    ``x -> x / |x|^2`` and is applied whenever ``|x| > switch_radius``.
    """

    switch_radius: float = 1.5

    K = 1.0
    n_charts = 2
    compact = True

    @property
    def name(self):
        return f"sphere:{self.dim}"

    def _sigma(self, x):
        return np.log(2.0) - np.log1p(np.einsum("bi,bi->b", x, x))

    def _grad_sigma(self, x):
        r2 = np.einsum("bi,bi->b", x, x)
        return -2 * x / (1 + r2)[:, None]

    def in_domain(self, chart, x):
        return np.all(np.isfinite(x), axis=-1) & (np.einsum("bi,bi->b", x, x) < 1e12)

    @staticmethod
    def _invert(x, W):
        r2 = np.einsum("bi,bi->b", x, x)
        y = x / r2[:, None]
        n = x.shape[-1]
        D = (np.eye(n) - 2 * np.einsum("bi,bj->bij", x, x) / r2[:, None, None]) / r2[:, None, None]
        return y, D @ W

    def normalize(self, chart, x, W):
        far = np.einsum("bi,bi->b", x, x) > self.switch_radius**2
        if not far.any():
            return chart, x, W
        chart, x, W = chart.copy(), x.copy(), W.copy()
        x[far], W[far] = self._invert(x[far], W[far])
        chart[far] = 1 - chart[far]
        return chart, x, W

    def to_chart(self, chart, x, W, target):
        flip = np.asarray(chart) != target
        x, W = x.copy(), W.copy()
        if flip.any():
            x[flip], W[flip] = self._invert(x[flip], W[flip])
        return x, W

    def embed(self, chart, x):
        r2 = np.einsum("bi,bi->b", x, x)
        sign = np.where(np.asarray(chart) == 0, 1.0, -1.0)
        last = sign * (r2 - 1) / (1 + r2)
        return np.concatenate([2 * x / (1 + r2)[:, None], last[:, None]], axis=-1)

    def embed_jacobian(self, chart, x):
        r2 = np.einsum("bi,bi->b", x, x)
        n = self.dim
        top = 2 * np.eye(n) / (1 + r2)[:, None, None] - 4 * np.einsum(
            "bi,bj->bij", x, x
        ) / ((1 + r2) ** 2)[:, None, None]
        sign = np.where(np.asarray(chart) == 0, 1.0, -1.0)
        bottom = (sign / (1 + r2) ** 2)[:, None] * 4 * x
        return np.concatenate([top, bottom[:, None, :]], axis=1)

    def base_features(self, chart, x):
        return self.embed(chart, x)

    def ambient_vectors(self, chart, x, W):
        return self.embed_jacobian(chart, x) @ W

    def pull_vectors(self, chart, x, A):
        # the embedding is isometric, so J^T J = g
        Jm = self.embed_jacobian(chart, x)
        return np.linalg.solve(self.metric(chart, x), np.swapaxes(Jm, -1, -2) @ A)

    def from_ambient(self, y):
        """Chart coordinates of unit vectors ``y``, choosing the chart with ``|x| <= 1``."""
        chart = (y[:, -1] > 0).astype(int)
        sign = np.where(chart == 0, 1.0, -1.0)
        x = y[:, :-1] / (1 - sign * y[:, -1])[:, None]
        return chart, x

    def sample_base(self, rng, size):
        y = rng.standard_normal((size, self.dim + 1))
        y /= np.linalg.norm(y, axis=-1, keepdims=True)
        return self.from_ambient(y)


@dataclass(frozen=True)
class Hyperbolic(_ConformalConstantCurvature):
    """Upper half-space model, metric ``delta / y^2`` with ``y`` the last coordinate."""

    K = -1.0
    nonpositive_curvature_operator = True

    @property
    def name(self):
        return f"hyperbolic:{self.dim}"

    def _sigma(self, x):
        return -np.log(x[:, -1])

    def _grad_sigma(self, x):
        s = np.zeros_like(x)
        s[:, -1] = -1.0 / x[:, -1]
        return s

    def in_domain(self, chart, x):
        return np.all(np.isfinite(x), axis=-1) & (x[:, -1] > 0)

    def base_features(self, chart, x):
        return np.concatenate([x[:, :-1], np.log(x[:, -1:])], axis=-1)

    def ambient_vectors(self, chart, x, W):
        return W / x[:, -1, None, None]

    def pull_vectors(self, chart, x, A):
        return A * x[:, -1, None, None]

    def sample_probe_base(self, rng, size):
        x = rng.uniform(-1, 1, (size, self.dim))
        x[:, -1] = np.exp(rng.uniform(-0.5, 0.5, size))
        return np.zeros(size, dtype=int), x


@dataclass(frozen=True)
class Product(ManifoldModel):
    """Riemannian product; chart id is ``chart_a * b.n_charts + chart_b``."""

    a: ManifoldModel = None
    b: ManifoldModel = None
    dim: int = field(init=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "dim", self.a.dim + self.b.dim)
        if not self.closed_form:
            object.__setattr__(self, "a", self.a.generic())
            object.__setattr__(self, "b", self.b.generic())

    def generic(self):
        return Product(a=self.a, b=self.b, closed_form=False)

    @property
    def name(self):
        return f"product:{self.a.name}x{self.b.name}"

    @property
    def n_charts(self):
        return self.a.n_charts * self.b.n_charts

    @property
    def compact(self):
        return self.a.compact and self.b.compact

    @property
    def flat(self):
        return self.a.flat and self.b.flat

    @property
    def nonpositive_curvature_operator(self):
        return self.a.nonpositive_curvature_operator and self.b.nonpositive_curvature_operator

    def _split(self, chart, x):
        chart = np.asarray(chart)
        return (chart // self.b.n_charts, x[:, : self.a.dim]), (
            chart % self.b.n_charts,
            x[:, self.a.dim :],
        )

    def _join_chart(self, ca, cb):
        return ca * self.b.n_charts + cb

    def metric(self, chart, x):
        (ca, xa), (cb, xb) = self._split(chart, x)
        g = np.zeros((x.shape[0], self.dim, self.dim))
        p = self.a.dim
        g[:, :p, :p] = self.a.metric(ca, xa)
        g[:, p:, p:] = self.b.metric(cb, xb)
        return g

    def christoffel(self, chart, x):
        (ca, xa), (cb, xb) = self._split(chart, x)
        G = np.zeros((x.shape[0],) + (self.dim,) * 3)
        p = self.a.dim
        G[:, :p, :p, :p] = self.a.christoffel(ca, xa)
        G[:, p:, p:, p:] = self.b.christoffel(cb, xb)
        return G

    def riemann_tensor(self, chart, x):
        (ca, xa), (cb, xb) = self._split(chart, x)
        R = np.zeros((x.shape[0],) + (self.dim,) * 4)
        p = self.a.dim
        R[:, :p, :p, :p, :p] = self.a.riemann_tensor(ca, xa)
        R[:, p:, p:, p:, p:] = self.b.riemann_tensor(cb, xb)
        return R

    def curvature(self, chart, x, X, Y, Z):
        (ca, xa), (cb, xb) = self._split(chart, x)
        p = self.a.dim
        return np.concatenate(
            [
                self.a.curvature(ca, xa, X[:, :p], Y[:, :p], Z[:, :p]),
                self.b.curvature(cb, xb, X[:, p:], Y[:, p:], Z[:, p:]),
            ],
            axis=-1,
        )

    def connection_matrix(self, chart, x, v):
        (ca, xa), (cb, xb) = self._split(chart, x)
        p = self.a.dim
        A = np.zeros((x.shape[0], self.dim, self.dim))
        A[:, :p, :p] = self.a.connection_matrix(ca, xa, v[:, :p])
        A[:, p:, p:] = self.b.connection_matrix(cb, xb, v[:, p:])
        return A

    def orthonormal_basis(self, chart, x):
        (ca, xa), (cb, xb) = self._split(chart, x)
        p = self.a.dim
        E = np.zeros((x.shape[0], self.dim, self.dim))
        E[:, :p, :p] = self.a.orthonormal_basis(ca, xa)
        E[:, p:, p:] = self.b.orthonormal_basis(cb, xb)
        return E

    def in_domain(self, chart, x):
        (ca, xa), (cb, xb) = self._split(chart, x)
        return self.a.in_domain(ca, xa) & self.b.in_domain(cb, xb)

    def normalize(self, chart, x, W):
        (ca, xa), (cb, xb) = self._split(chart, x)
        p = self.a.dim
        ca, xa, Wa = self.a.normalize(ca, xa, W[:, :p])
        cb, xb, Wb = self.b.normalize(cb, xb, W[:, p:])
        return (
            self._join_chart(ca, cb),
            np.concatenate([xa, xb], axis=-1),
            np.concatenate([Wa, Wb], axis=1),
        )

    def to_chart(self, chart, x, W, target):
        (ca, xa), (cb, xb) = self._split(chart, x)
        p = self.a.dim
        xa, Wa = self.a.to_chart(ca, xa, W[:, :p], target // self.b.n_charts)
        xb, Wb = self.b.to_chart(cb, xb, W[:, p:], target % self.b.n_charts)
        return np.concatenate([xa, xb], axis=-1), np.concatenate([Wa, Wb], axis=1)

    def base_features(self, chart, x):
        (ca, xa), (cb, xb) = self._split(chart, x)
        return np.concatenate(
            [self.a.base_features(ca, xa), self.b.base_features(cb, xb)], axis=-1
        )

    def ambient_vectors(self, chart, x, W):
        (ca, xa), (cb, xb) = self._split(chart, x)
        p = self.a.dim
        return np.concatenate(
            [
                self.a.ambient_vectors(ca, xa, W[:, :p]),
                self.b.ambient_vectors(cb, xb, W[:, p:]),
            ],
            axis=1,
        )

    def pull_vectors(self, chart, x, A):
        (ca, xa), (cb, xb) = self._split(chart, x)
        q = self.a.ambient_vectors(ca, xa, np.zeros((x.shape[0], self.a.dim, 1))).shape[1]
        return np.concatenate(
            [
                self.a.pull_vectors(ca, xa, A[:, :q]),
                self.b.pull_vectors(cb, xb, A[:, q:]),
            ],
            axis=1,
        )

    def sample_base(self, rng, size):
        ca, xa = self.a.sample_base(rng, size)
        cb, xb = self.b.sample_base(rng, size)
        return self._join_chart(ca, cb), np.concatenate([xa, xb], axis=-1)

    def sample_probe_base(self, rng, size):
        ca, xa = self.a.sample_probe_base(rng, size)
        cb, xb = self.b.sample_probe_base(rng, size)
        return self._join_chart(ca, cb), np.concatenate([xa, xb], axis=-1)


_SIMPLE = {
    "torus": FlatTorus,
    "t": FlatTorus,
    "ctorus": ComplexTorus,
    "sphere": Sphere,
    "s": Sphere,
    "hyperbolic": Hyperbolic,
    "h": Hyperbolic,
}


def _parse_factor(spec: str) -> ManifoldModel:
    spec = spec.strip().lower()
    m = re.fullmatch(r"([a-z]+):?(\d+)", spec)
    if not m or m.group(1) not in _SIMPLE:
        raise ValueError(f"unknown manifold {spec!r}")
    return _SIMPLE[m.group(1)](dim=int(m.group(2)))


def get_manifold(spec: str) -> ManifoldModel:
    """Look up a model by registry name.

    Accepted names: ``torus:<n>``, ``sphere:<n>``, ``hyperbolic:<n>``,
    ``ctorus:<2m>`` and ``product:<a>x<b>`` where each factor is one of the
    former (``product:hyperbolic:2xhyperbolic:2``) or a short alias such as
    ``H2``, ``S2``, ``T3``.
    """
    spec = spec.strip()
    if spec.lower().startswith("product:"):
        parts = spec[len("product:") :].lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"product needs exactly two factors: {spec!r}")
        return Product(a=_parse_factor(parts[0]), b=_parse_factor(parts[1]))
    return _parse_factor(spec)


def christoffel_at(m: ManifoldModel, p: Point) -> np.ndarray:
    """Christoffel symbols ``Gamma[b, k, i, j]`` at a batch of points."""
    if not m.in_domain(p.chart, p.coords).all():
        raise ChartExitError(f"point outside the chart domain of {m.name}")
    return m.christoffel(p.chart, p.coords)


def riemann(m: ManifoldModel, p: Point, x, y, z) -> np.ndarray:
    """``R(x, y) z`` at ``p``; vectors of shape ``(B, n)`` based at ``p``."""
    x, y, z = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (x, y, z))
    if not (x.shape == y.shape == z.shape == p.coords.shape):
        raise ValueError("vectors must be based at the given points")
    if not m.in_domain(p.chart, p.coords).all():
        raise ChartExitError(f"point outside the chart domain of {m.name}")
    return m.curvature(p.chart, p.coords, x, y, z)


@dataclass(frozen=True)
class CurvatureOperatorMatrix:
    """Matrix of the curvature operator on 2-vectors in the ``e_i ^ e_j`` basis (i < j)."""

    base: Point
    entries: np.ndarray
    pairs: tuple

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.entries + np.swapaxes(self.entries, -1, -2)))


def curvature_operator(m: ManifoldModel, frame, tol=1e-9) -> CurvatureOperatorMatrix:
    """Curvature operator in an orthonormal frame with ``k = n``.

    ``entries[(i, j), (l, m)] = <R(e_i, e_j) e_m, e_l>``.
    """
    E = frame.V
    B, n, k = E.shape
    if k != n:
        raise ValueError("curvature operator needs a full frame")
    g = m.metric(frame.chart, frame.x)
    gram = np.einsum("bia,bij,bjc->bac", E, g, E)
    if np.abs(gram - np.eye(n)).max() > tol:
        raise ValueError("frame is not orthonormal")
    pairs = tuple(combinations(range(n), 2))
    P = len(pairs)
    out = np.zeros((B, P, P))
    for a, (i, j) in enumerate(pairs):
        for c, (l, mm) in enumerate(pairs):
            Rz = m.curvature(frame.chart, frame.x, E[:, :, i], E[:, :, j], E[:, :, mm])
            out[:, a, c] = inner(g, Rz, E[:, :, l])
    return CurvatureOperatorMatrix(Point(frame.chart, frame.x), out, pairs)
