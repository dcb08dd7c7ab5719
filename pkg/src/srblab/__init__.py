"""Numerical SRB-measure toolkit for almost-Anosov torus maps."""
__version__ = "0.1.0"

from .dynamics import (MapModel, TangentMatrix, TorusPoint, apply, apply_inverse, distance_to_S, linear_cat,
                       neutral_cat, orbit, tangent)
from .errors import (BadItinerary, DegenerateSeed, DomainCollapse, EmptySequence, HypothesisViolated,
                     ManifoldCollapse, NoReturn, NonConvergence, NotInOmega0, NotIntegrable, NumericalError,
                     PreconditionError, SRBLabError, TooFewSamples)
from .graph_transform import (GraphPatch, TruncationLog, contraction_certificate, grow_unstable_manifold,
                              multi_step_transform, one_step_transform, truncation_bounded, verify_tangency)
from .hyperbolicity import (Region, RegionParams, analyze_orbit, bounded_type, classify, lambda_hyperbolic,
                            pliss_times, sqrt_r0_robustness, stay_lengths, theta_density, zeta_bound)
from .inducing import (EmpiricalMeasure, InducedReturn, ReturnSample, birkhoff_validate, distortion_check, induce,
                       push_measure, spread_to_srb, tau_statistics)
from .splitting import cocycle_trace, estimate_splitting, unstable_jacobian
