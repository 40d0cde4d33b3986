"""Numerical constants shared by the numba and numpy kernel backends.

Both backends must read these from one place: the guard thresholds decide
which (gaussian, pixel) pairs participate in compositing, so any drift
between backends would change results, not just speed.
"""

# Splatting
SIGMA_MIN_PX = 0.3   # projected footprint floor, pixels
SIGMA_MAX_PX = 8.0   # projected footprint ceiling, pixels (bounds kernel cost)
CUT_SIGMA = 3.0      # per-gaussian influence radius, in projected sigmas
ALPHA_EPS = 1e-4     # contributions below this are dropped in both passes
ALPHA_MAX = 0.999    # keeps 1/(1 - alpha) finite in the backward pass
ZC_MIN = 0.05        # gaussians closer than this to the image plane are culled
T_EPS = 1e-5         # transmittance saturation: later gaussians are skipped
SAT_NONE = 2 ** 31 - 1  # sentinel for "pixel never saturated"

# Raycasting
RAY_EPS = 1e-9
RAY_FAR = 50.0

# Occupancy grid cell states
CELL_UNKNOWN = 0
CELL_FREE = 1
CELL_OCCUPIED = 2
