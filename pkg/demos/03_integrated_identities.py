"""
Integrated identities by Monte Carlo
====================================

Integrate the divergence terms away over the frame bundle of a compact
model. Residual means are compared with their standard error plus a
calibrated finite-difference bias.
"""

from pestov_lab import corpus, get_manifold, integrated_residual
from pestov_lab.corpus import fiber_only_function

N = 20_000

m = get_manifold("sphere:2")
phi, psi = corpus(m, 2, seed=0)[:2]

checks = integrated_residual("INT_PESTOV", m, phi, 2, N)
checks += integrated_residual("FLOW_BY_PARTS", m, phi, 2, N, i=1, psi=psi)
checks += integrated_residual("BUNDLE_PESTOV", m, phi, 2, N)
for c in checks:
    e = c.estimate
    print(f"{c.identity:14s} {str(c.indices):7s} lhs {c.lhs:+.4f} rhs {c.rhs:+.4f} "
          f"diff {e.mean:+.2e} +- {e.stderr:.1e} (bias {c.bias_allowance:.1e})  {c.verdict}")

# the flow-invariant identity needs a function killed by a frame flow;
# on a flat torus functions of the vectors alone qualify
t = get_manifold("torus:3")
(c,) = integrated_residual("INVARIANT_ID", t, fiber_only_function(t, 3, 0), 3, 4096)
print(f"\nflat torus invariant case: lhs {c.lhs:.1e} rhs {c.rhs:.1e}  {c.verdict}")
(c,) = integrated_residual("INVARIANT_ID", m, phi, 2, 4096)
print(f"sphere, generic function: {c.verdict} ({c.cause})")
