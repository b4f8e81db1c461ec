"""Tolerances and recorded reference values shared by the harness and tests.

Every acceptance check reads its tolerance from here so that the numbers
are stated once.
"""

import math

# dimension proxies (box-counting slopes)
DIM_TOL = 0.15
# exceptional-parameter sets in foliation surveys
SURVEY_TOL = 0.2
# generic multiplicative window on recorded constants
CONST_WINDOW = 2.0

# algebra and closed-form evaluators
ALGEBRA_TOL = 1e-12
BOUND_TOL = 1e-12
TRIANGLE_SLACK = 1e-9
UPPER_GRADIENT_SLACK = 1e-9
ANCHOR_TOL = 1e-6

# estimator calibration
BOX_UNIFORM_TARGET = 2.0
BOX_UNIFORM_TOL = 0.10
CANTOR_DIM = math.log(2.0) / math.log(3.0)
BOX_CANTOR_TOL = 0.05

# Frostman audit constant on the Cantor set
FROSTMAN_C_MAX = 4.0

# per-level upper-gradient norms at the critical exponent
LEVEL_NORM_WINDOW = 8.0

# covering-count regularity tables: max/min of N(r) r^s
REGULARITY_WINDOW = 4.0

# carpet Ahlfors 2-regularity: nu(B(x, r)) / r^2 in [1/C, C]
AHLFORS_C_MAX = 32.0

# Korányi quotient distance against the Grushin core
GRUSHIN_C1_MAX = 10.0

# even-coverability reference values (uniform [0, 1] sample, t = 1, sigma = 2, eps = 0.1)
EVEN_COVER_SUM_MAX = 2.2
EVEN_COVER_OVERLAP_MAX = 5

# level ball counts of the depth-8 planar Cantor dust construction (n = 1..8)
DUST_LEVEL_COUNTS = (4, 4, 16, 16, 64, 64, 256, 256)
