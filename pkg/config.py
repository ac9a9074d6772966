import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Paths
BASE_DIR = Path(__file__).parent
ARTIFACT_DIR = Path(os.getenv("IKZM_ARTIFACT_DIR", BASE_DIR / "artifacts"))
ARTIFACT_DIR.mkdir(exist_ok=True, parents=True)
PROFILE_CACHE_DIR = ARTIFACT_DIR / "profiles"
CONFIG_DIR = BASE_DIR / "configs"

WORKERS = int(os.getenv("IKZM_WORKERS", "1"))
LOG_LEVEL = os.getenv("IKZM_LOG_LEVEL", "INFO")

# Riemann zeta values (15 significant digits)
ZETA3 = 1.20205690315959
ZETA5 = 1.03692775514337

# Model core
COINCIDENCE_TOL = 1e-12

# Equilibrium solver
GROUND_STATE_GTOL = 1e-10
GROUND_STATE_MAX_ITER = 200
ZIGZAG_GTOL = 1e-9
ZIGZAG_ACCEPT_GTOL = 1e-6
ZIGZAG_MAX_ITER = 200
ZIGZAG_LATTICE_TERMS = 10000

# Trap / quench defaults (simulation units m = Q = nu = l0 = 1)
N_IONS = 50
N_CENTRAL = 30
NOISE_AMP = 0.05
DELTA0_FRACTION = 0.1
STOP_FRACTION = 0.9
HOLD_TIME = 50.0
THERMALIZE_TIMES = 10.0

# Integrator step guards: dt * nu_t(-tau_Q) <= DT_FREQ_GUARD, dt * eta <= DT_DAMP_GUARD
DT_FREQ_GUARD = 0.01
DT_DAMP_GUARD = 0.05
DT_STABILITY_LIMIT = 0.1
SNAPSHOT_STRIDE = 1000
STOP_CHECK_EVERY = 10
NOISE_BLOCK_STEPS = 4096

# Defect detection
SIGN_FLOOR_FRACTION = 0.1

# Field model
FIELD_EDGE_FRACTION = 0.95
FIELD_CFL = 0.5

# Harness
MAX_EXCLUDED_FRACTION = 0.1
SATURATION_GROWTH = 0.1
FIT_TOLERANCE = 0.2
TAU_PER_DECADE = 8
TAU_DECADES = 1.5

# Schema versions
PROFILE_SCHEMA_VERSION = 1
SNAPSHOT_SCHEMA_VERSION = 1
SUMMARY_SCHEMA_VERSION = 1
CODE_VERSION = "1.0"

# Closed-form predictors: warn when a regime inequality holds by less than this factor
REGIME_MARGIN = 3.0
# Central region half-width above which the small-X expansion is flagged
X_STAR_LIMIT = 0.3
XI0 = 1.0
