"""
Functions of oriented planes
============================

Lift functions of oriented k-planes to full frames, check the span and
wedge conditions on their vertical gradients, and test transport
invariance where the curvature operator is non-positive.
"""

import numpy as np

from pestov_lab import get_manifold, pointwise_residual
from pestov_lab.bundle import sample_frames
from pestov_lab.grassmannian import (
    check_theorem_1_1,
    flow_transport_chain,
    kahler_function,
    lift_function,
    plane_corpus,
    sectional_curvature_function,
)
from pestov_lab.identities import Aux

m = get_manifold("sphere:4")
f = sample_frames(m, 4, 6, np.random.default_rng(2), probe=True)
for phi in plane_corpus(m, 2, seed=1):
    lifted = lift_function(m, phi)
    span = pointwise_residual("GRADV_SPAN", m, lifted, f, Aux(plane_k=2)).value.max()
    wedge = pointwise_residual("WEDGE", m, lifted, f, Aux(plane_k=2)).value.max()
    print(f"{phi.name:9s} span {span:.1e}  wedge {wedge:.1e}")

# not a lift: depends on the third frame vector
other = lambda fr: m.ambient_vectors(fr.chart, fr.x, fr.V)[:, 0, 2]
print(f"non-lifted wedge residual {pointwise_residual('WEDGE', m, other, f, Aux(plane_k=2)).value.max():.2f}")

# generator of the lift versus the derivative along plane transport
phi = plane_corpus(m, 2, seed=1)[0]
for h in (1e-3, 5e-4, 2.5e-4):
    gen, chain = flow_transport_chain(m, phi, f, 0, h=h)
    print(f"h={h:.1e}  gap {np.abs(gen - chain).max():.2e}")

print()
for name, fn in [("ctorus:4", kahler_function), ("product:H2xH2", sectional_curvature_function),
                 ("sphere:3", sectional_curvature_function)]:
    mm = get_manifold(name)
    rep = check_theorem_1_1(mm, fn(mm), n_loops=50)
    print(f"{name:14s} {rep.verdict:4s} drift {rep.drift:.1e}  max curvature eig {rep.curvature_operator_max:+.2f}  {rep.cause}")
