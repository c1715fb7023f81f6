# src/config.py

# --- Confidence boosting ---
MARKOV_FACTOR = 3           # oracles target expected gap delta / 3
WEAK_CONFIDENCE = 2.0 / 3.0
CHERNOFF_RATE = 18.0        # robust estimators fail w.p. <= exp(-m / 18)
STAGE_INFLATION = 9.0       # (3 eps)^2 inflation of Alg-R stage accuracy

# --- Inner (deterministic) solver ---
INNER_TOL = 1e-10           # relative gradient-mapping tolerance
INNER_MAX_ITER = 100_000

# --- Streaming oracles ---
SGD_BIAS_ITERS = 16         # epoch length >= 16 * kappa_eff
SGD_NOISE_ITERS = 32        # epoch length >= 32 * sigma^2 / (mu_eff * delta_k)
SGD_NOISE_STEP = 4          # stepsize <= delta_k / (4 * sigma^2)
ACC_BIAS_LOG = 2.0794415416798357   # ln(8): each accelerated epoch shrinks the bias by 1/4
ACC_BATCH = 16              # minibatch >= 16 * sigma^2 / (sqrt(mu L) * delta_k)

# --- Problems ---
DEFAULT_DOF = 2.5           # student-t: finite variance, infinite kurtosis
COMPOSITE_DISPLACEMENT = 2.0  # unconstrained minimizer placed at 2x the feasible radius
GROUND_TRUTH_TOL = 1e-12
ERM_NMIN_FACTOR = 4         # N_min = 4 * d * kappa_hat
GRAD_CHUNK = 65_536         # scalar draws per chunk when averaging heavy-tailed noise
CONDITIONING_MIN_RATIO = 1e-12  # smallest feature spectrum ratio tried when targeting kappa

# --- Harness ---
DEFAULT_REPLICATIONS = 100
JOBS_ENV = "PROXBOOST_JOBS"
CONFIG_ENV = "PROXBOOST_CONFIG"
CSV_COLUMNS = [
    "trial_id", "method", "epsilon", "p", "T", "m",
    "samples_used", "final_gap", "success", "wall_ms", "seed",
]
TRIALS_FILENAME = "trials.csv"
SUMMARY_FILENAME = "summary.json"
