"""Regression thresholds for the convergence studies.

Each limit was fixed after a verified run of the full pipeline (exact
solver, centre anchors) and is asserted from then on.  The observed value
is recorded next to it.
"""

# d_2 between projections and the optimal map, shift-uniform instance, k=256.
# Observed 0.0011276372445109878 for both barycentric and median projections.
MAP_DISTANCE_MAX_K256 = 0.05

# Bad-set mass at delta=0.1 on the same instance for k >= 64.  Observed 0.0.
BAD_SET_MAX_K64 = 0.05

# disc_1 for the atom-at-zero example with the first anchor at 0, k=256.
ANCHORED_ZERO_DISC_MAX = 0.05

# disc_2 for the shift-uniform instance, k=256.  Observed 0.0009765625.
CONTINUOUS_DISC_MAX = 0.05

# Cost error at k=256 for the shift-uniform instance.
# Observed 2.5431315104212926e-06.
VALUE_ERROR_MAX_K256 = 0.01
