"""Numerical constants shared across the library.

Every finite-difference step and acceptance threshold lives here so the
trade-off between truncation and round-off error is pinned in one place.
"""

# densities below this are treated as non-positive
POSITIVITY_TOL = 1e-14

# measure / tangent bookkeeping
UNIT_MASS_TOL = 1e-10
ZERO_MEAN_TOL = 1e-10
NODE_NORM_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12

# arccos argument may exceed 1 by round-off of the quadrature sum
ARCCOS_CLAMP = 1e-12

# pushforward resampling guard (mass drift before renormalization)
PUSHFORWARD_MASS_TOL = 1e-6
# preimages closer than this to a grid node are treated as exact hits
NODE_SNAP_TOL = 1e-9

# finite-difference steps (geometric quantities / KL second derivative /
# boundary-map Jacobians)
FD_STEP_GEOMETRIC = 1e-4
FD_STEP_KL = 1e-3
FD_STEP_BOUNDARY = 1e-6

# Poincare ball
BALL_BOUNDARY_MARGIN = 1e-9
IDEAL_NORM_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-12

# barycenter Newton solver
NEWTON_GRAD_TOL = 1e-10
NEWTON_MAX_ITER = 200
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
CRITICALITY_TOL = 1e-8
POISSON_MASS_TOL = 1e-8

# alpha-geodesic integrator
ODE_MEAN_DRIFT_TOL = 1e-6
ODE_ZERO_MEAN_TOL = 1e-8

# smallest grid the library accepts; the CLI is stricter (>= 8)
MIN_RESOLUTION = 4
