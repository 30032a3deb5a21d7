"""Numerical checks of Pestov-type identities on frame bundles.

The package models a handful of Riemannian manifolds in explicit charts,
moves frames by parallel transport along geodesics, differentiates functions
on the bundle of k-tuples by finite differences and checks the resulting
pointwise and integrated identities.
"""

from .bundle import (
    Frame,
    cutoff_extension,
    frame_flow,
    generator,
    gram_schmidt,
    haar_stiefel,
    sample_fiber,
    sample_frames,
)
from .config import StepSizes
from .corpus import corpus
from .diffops import cov_h, cov_v, div_h, div_v, grad_h, grad_v, grad_v_all, grad_v_proj, project_vertical
from .flows import geodesic_step, parallel_transport
from .grassmannian import (
    GrassmannFunction,
    OrientedPlane,
    check_theorem_1_1,
    consequence_identity,
    lift_function,
    project_frame,
    transport_plane,
)
from .identities import LEMMA_IDS, Aux, IdentityId, convergence_order, pointwise_residual, random_aux
from .integration import IntegratedId, MCEstimate, integrated_residual, mc_integral
from .manifolds import ChartExitError, Point, curvature_operator, get_manifold, riemann

__version__ = "0.1.0"
