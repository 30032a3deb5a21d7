"""
Pointwise identities on the frame bundle
========================================

Evaluate the Pestov identity and its companion commutation formulas on
random frames, and check that the residual shrinks like the square of the
finite-difference step.
"""

from dataclasses import dataclass

import numpy as np

from pestov_lab import LEMMA_IDS, Aux, StepSizes, convergence_order, corpus, get_manifold, pointwise_residual, random_aux
from pestov_lab.bundle import sample_frames
from pestov_lab.identities import pestov_terms
from pestov_lab.manifolds import Sphere

m = get_manifold("sphere:3")
rng = np.random.default_rng(1)
f = sample_frames(m, 2, 4, rng, probe=True)
phi = corpus(m, 2, seed=3)[0]

# the five terms are individually O(1) and cancel
terms = pestov_terms(m, phi, f, 0, 0, StepSizes())
for name, t in zip(["div_v Z", "div_h Y", "|grad_h|^2", "curvature", "2<grad_h, grad_v G>"], terms):
    print(f"{name:22s}", np.round(t, 6))

aux = random_aux(m, f, rng, i=0, j=1, l=1)
print()
for ident in LEMMA_IDS:
    r = pointwise_residual(ident, m, phi, f, aux)
    conv = convergence_order(ident, m, phi, f, aux)
    orders = ["noise" if np.isnan(o) else f"{o:.2f}" for o in conv.order]
    print(f"{ident.value:9s} max rel residual {r.relative.max():.1e}   orders {orders}")

# with the curvature sign flipped, the same machinery catches the error

@dataclass(frozen=True)
class Mirror(Sphere):
    def curvature(self, chart, x, X, Y, Z):
        return -super().curvature(chart, x, X, Y, Z)


r = pointwise_residual("PESTOV", Mirror(3), phi, f, Aux(i=0, j=1))
print(f"\nwrong curvature sign: rel residual {r.relative.max():.2f}")
