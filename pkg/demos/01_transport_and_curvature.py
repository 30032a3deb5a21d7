"""
Geodesics, parallel transport and curvature
===========================================

Walk a vector around the octant triangle of the unit sphere and watch it
come back rotated by the enclosed area. Then read off the curvature
operator of a few models.
"""

import math

import numpy as np

from pestov_lab import Point, curvature_operator, get_manifold, sample_frames
from pestov_lab.flows import transport_with_endpoint

sphere = get_manifold("sphere:2")

# start at the north pole, go down to e1, across to e2 and back up
corners = np.eye(3)[[2, 0, 1, 2]]
chart, x = sphere.from_ambient(corners[:1])
p = Point(chart, x)
w = sphere.pull_vectors(chart, x, np.array([[[1.0], [0.0], [0.0]]]))[:, :, 0]
for target in corners[1:]:
    v = sphere.pull_vectors(p.chart, p.coords, target[None, :, None])[:, :, 0]
    p, w, _ = transport_with_endpoint(sphere, (p, v, math.pi / 2), w)

end = sphere.ambient_vectors(p.chart, p.coords, w[:, :, None])[0, :, 0]
angle = math.atan2(np.cross([1.0, 0, 0], end) @ corners[-1], end[0])
print(f"rotation after the loop: {angle:+.8f}   (area of the octant: {math.pi / 2:.8f})")

# eigenvalues of the curvature operator on 2-vectors
rng = np.random.default_rng(0)
for name in ["torus:3", "sphere:3", "hyperbolic:3", "product:H2xH2"]:
    m = get_manifold(name)
    op = curvature_operator(m, sample_frames(m, m.dim, 1, rng, probe=True))
    print(f"{name:16s}", np.round(np.sort(op.eigenvalues[0]), 6))
