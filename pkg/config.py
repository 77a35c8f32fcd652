"""
Configuration for the NCS rate-bounds toolkit
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# System Configuration
VERBOSE = os.getenv("VERBOSE", "true").lower() == "true"
DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "20240611"))

# Numerical tolerances
CANCEL_TOL = float(os.getenv("CANCEL_TOL", "1e-8"))
RANK_TOL = float(os.getenv("RANK_TOL", "1e-8"))
RICCATI_TOL = float(os.getenv("RICCATI_TOL", "1e-12"))
RICCATI_MAX_ITER = int(os.getenv("RICCATI_MAX_ITER", "100000"))
PINV_ATOL = float(os.getenv("PINV_ATOL", "1e-12"))
SPECTRAL_GRID_POINTS = int(os.getenv("SPECTRAL_GRID_POINTS", "4096"))

# Synthesis Configuration
FIR_ORDER = int(os.getenv("FIR_ORDER", "30"))
FIR_ORDER_MAX = int(os.getenv("FIR_ORDER_MAX", "240"))
BISECTION_REL_TOL = float(os.getenv("BISECTION_REL_TOL", "1e-3"))
DESIGN_MARGIN = float(os.getenv("DESIGN_MARGIN", "0.05"))
CVX_SOLVER = os.getenv("CVX_SOLVER", "CLARABEL")

# Simulation Configuration
DIVERGENCE_GUARD = float(os.getenv("DIVERGENCE_GUARD", "1e12"))
BURN_IN = int(os.getenv("BURN_IN", "10000"))
HORIZON = int(os.getenv("HORIZON", str(1_000_000 + 10_000)))
REALIZATIONS = int(os.getenv("REALIZATIONS", "50"))
MIN_BATCHES = int(os.getenv("MIN_BATCHES", "20"))

# Data Configuration
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "./results")
BENCHMARK_PLANT_PATH = "./data/benchmark_plant.json"
BENCHMARK_EXPERIMENT_PATH = "./data/benchmark_experiment.json"
