"""Seeded families of smooth test functions and semi-basic fields.

Functions are built from chart-independent data: ``m.base_features`` for the
foot point and ``m.ambient_vectors`` for the tuple, so they are globally
smooth (periodic on tori, well defined across sphere charts).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bundle import Frame
from .manifolds import ManifoldModel

FAMILIES = ("trig_poly", "trig_bump", "coupled", "poly")


@dataclass(frozen=True)
class CorpusFunction:
    name: str
    seed: int
    fn: Callable = field(repr=False, compare=False)

    def __call__(self, f: Frame) -> np.ndarray:
        return self.fn(f)

    @property
    def label(self) -> str:
        return f"{self.name}#{self.seed}"


def _features(m, f):
    P = m.base_features(f.chart, f.x)
    Z = m.ambient_vectors(f.chart, f.x, f.V)
    return P, Z.reshape(f.B, -1)


def _dims(m, k):
    probe = Frame.make(np.zeros(m.dim) + 0.5, np.eye(m.dim)[:, :k])
    P, Z = _features(m, probe)
    return P.shape[1], Z.shape[1]


def make_function(m: ManifoldModel, k: int, family: str, seed: int) -> CorpusFunction:
    """One member of ``family`` with parameters drawn from ``seed``."""
    rng = np.random.default_rng([seed, FAMILIES.index(family)])
    dP, dZ = _dims(m, k)
    omega = rng.normal(0, 1.0, dP)
    theta = rng.uniform(0, 2 * np.pi)
    beta = rng.normal(0, 0.5, dZ)
    A = rng.normal(0, 0.3, (dZ, dZ))
    A = 0.5 * (A + A.T)
    c0 = rng.normal(0, 0.5)

    def quad(Z):
        return c0 + Z @ beta + 0.5 * np.einsum("bi,ij,bj->b", Z, A, Z)

    if family == "trig_poly":

        def fn(f):
            P, Z = _features(m, f)
            return (1.0 + 0.5 * np.sin(P @ omega + theta)) * quad(Z)

    elif family == "trig_bump":
        center = rng.normal(0, 0.5, dZ)
        width = 1.2

        def fn(f):
            P, Z = _features(m, f)
            d2 = np.sum((Z - center) ** 2, axis=-1)
            return np.sin(P @ omega + theta) * np.exp(-d2 / (2 * width**2))

    elif family == "coupled":
        gamma = rng.normal(0, 0.7, dZ)

        def fn(f):
            P, Z = _features(m, f)
            return np.sin(P @ omega + Z @ gamma + theta) + 0.2 * quad(Z)

    elif family == "poly":

        def fn(f):
            P, Z = _features(m, f)
            return quad(Z) * (P @ omega) * 0.3 + (Z @ beta) ** 3 / 3

    else:
        raise ValueError(f"unknown family {family!r}")
    return CorpusFunction(family, seed, fn)


def corpus(m: ManifoldModel, k: int, seed: int = 0, families=FAMILIES):
    return [make_function(m, k, fam, seed + 17 * j) for j, fam in enumerate(families)]


def fiber_only_function(m: ManifoldModel, k: int, seed: int) -> CorpusFunction:
    """A function of the vectors' ambient components only.

    On a flat torus parallel transport is trivial in chart components, so
    such a function is invariant under every frame flow.
    """
    rng = np.random.default_rng([seed, 99])
    _, dZ = _dims(m, k)
    beta = rng.normal(0, 0.5, dZ)
    A = rng.normal(0, 0.3, (dZ, dZ))
    center = rng.normal(0, 0.5, dZ)

    def fn(f):
        _, Z = _features(m, f)
        return Z @ beta + np.einsum("bi,ij,bj->b", Z, A, Z) + np.exp(
            -np.sum((Z - center) ** 2, axis=-1)
        )

    return CorpusFunction("fiber_only", seed, fn)


def chart_linear(m: ManifoldModel, K: Callable[[np.ndarray], np.ndarray], slot: int = 0):
    """``phi(f) = <v_slot, K(p)>`` for a vector field ``K`` given in chart components."""

    def fn(f):
        return m.inner(f.chart, f.x, f.V[:, :, slot], K(f.x))

    return CorpusFunction("chart_linear", 0, fn)


def constant(value: float = 1.0) -> CorpusFunction:
    return CorpusFunction("constant", 0, lambda f: np.full(f.B, float(value)))


def semibasic_field(m: ManifoldModel, k: int, seed: int):
    """``X(f) = a(f) v_0 + b(f) Y(p)`` with ``Y`` the projection of a fixed ambient vector."""
    a = make_function(m, k, "trig_poly", seed)
    b = make_function(m, k, "trig_bump", seed + 1)
    rng = np.random.default_rng([seed, 7])
    probe = Frame.make(np.zeros(m.dim) + 0.5, np.eye(m.dim)[:, :1])
    D = m.ambient_vectors(probe.chart, probe.x, probe.V).shape[1]
    c = rng.normal(0, 1.0, D)

    def X(f):
        Y = m.pull_vectors(f.chart, f.x, np.broadcast_to(c[:, None], (f.B, D, 1)).copy())
        return a(f)[:, None] * f.V[:, :, 0] + b(f)[:, None] * Y[:, :, 0]

    X.label = f"semibasic#{seed}"
    return X
