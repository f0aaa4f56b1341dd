from __future__ import annotations

# Cells treated as missing, compared case-insensitively after stripping.
MISSING_MARKERS = frozenset({"", "?", "na", "<null>"})

# Grid multipliers R = <1e-5, ..., 1e0, ..., 1e5>; the grid is R·i_gamma x R·i_C.
GRID_EXPONENTS = tuple(range(-5, 6))
GRID_MULTIPLIERS = tuple(10.0**e for e in GRID_EXPONENTS)

# Nested CV protocol.
K_EXTERNAL = 5
K_INTERNAL = 3
REPETITIONS = 10
BASE_SEED = 0

# Small-label scenario: keep 10 % of each training fold, at least 5 per class.
SEMI_FRACTION = 0.1
SEMI_MIN_PER_CLASS = 5

# Distance sampling for quantile-based heuristics.
PAIR_BUDGET = 1000

# SMO solver.
SOLVER_TOLERANCE = 1e-3
SOLVER_MAX_PASSES = 10
KERNEL_CACHE_ROWS = 4000
ALPHA_EPS = 1e-8
TAU = 1e-12

# s^2 below this is treated as "all points identical under gamma".
KERNEL_VARIANCE_FLOOR = 1e-12

SIGNIFICANCE_LEVEL = 0.05
# Both samples at or below this size get the exact permutation p-value.
MWW_EXACT_MAX = 12

DEFAULT_PARAMS = (1.0, 1.0)  # (C, gamma)
REFERENCE_METHOD = "GSCV"

OUTPUT_DIR = "results"
ENV_OUTPUT_DIR = "EWS_SVM_OUTPUT_DIR"
ENV_JOBS = "EWS_SVM_JOBS"
