"""
Global Configuration for Application
"""

import os
import logging
from dotenv import load_dotenv

# Pick up a local .env before reading the environment
load_dotenv()

LOGGING_LEVEL = getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO)

# Simulation defaults
DEFAULT_SEED = int(os.getenv("BASKETSIM_SEED", "20240101"))
DEFAULT_REPS = int(os.getenv("BASKETSIM_REPS", "1000"))
DEFAULT_WORKERS = int(os.getenv("BASKETSIM_WORKERS", "1"))
DEFAULT_OUTPUT_DIR = os.getenv("BASKETSIM_OUTPUT_DIR", "results")

# Partition enumeration grows with the Bell numbers; Bell(12) = 4,213,597
MAX_PARTITION_COHORTS = 12

RESTX_ERROR_404_HELP = False
