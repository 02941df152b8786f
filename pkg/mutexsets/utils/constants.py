"""
Constants used throughout the application.
"""

# Application metadata
APP_NAME = "mutexsets"
APP_VERSION = "1.0.0"

# Row-label suffixes and the alteration kind they encode
KIND_SUFFIXES = {
    "(A)": "AMP",
    "(D)": "DEL",
}

# Input file layout
MATRIX_ROW_COLUMN = "alteration"
GROUPS_SAMPLE_COLUMN = "sample"
GROUPS_GROUP_COLUMN = "group"
MISSING_VALUE = "NA"
ALLOWED_CELL_VALUES = {"0", "1", MISSING_VALUE}

# Pipeline defaults
DEFAULT_KMAX = 10
DEFAULT_MAX_ITER = 5000
DEFAULT_ALPHA_WEIGHTS = 0.05
DEFAULT_LEVEL = 0.05
DEFAULT_CORRECTION = "bonferroni"
CORRECTION_METHODS = ["bonferroni", "bh"]
DEFAULT_SEED = 0
DEFAULT_WORKERS = 1

# Budgets
DEFAULT_CLOSURE_BUDGET = 10_000_000  # distinct sets after subset closure
DEFAULT_ENUMERATION_BUDGET = 10_000_000  # subset tuples in the enumeration oracle
MIN_PERMUTATIONS = 1000
PERMUTATION_BATCH = 2000

# Stouffer: below this z-score the combined p is taken from the log-CDF
LOG_CDF_Z_THRESHOLD = -8.0

# File names written by the exporter
EXPORT_FILES = {
    "sets": "significant_sets.tsv",
    "graph": "union_graph.graphml",
    "metadata": "run_metadata.json",
    "pool": "candidate_pool.tsv",
    "pairs": "pairwise_significant.tsv",
    "pair_graph": "pairwise_graph.graphml",
    "pdf": "report.pdf",
    "matrix": "matrix.tsv",
    "groups": "groups.tsv",
}

# Report formatting
SETS_COLUMNS = ["rank", "coverage_fraction", "p_raw", "p_adjusted", "members"]
PAIRS_COLUMNS = ["rank", "coverage_fraction", "p_raw", "p_adjusted", "members"]
POOL_COLUMNS = ["members", "score", "iteration", "epoch"]
PVALUE_FORMAT = "{:.2e}"
FRACTION_FORMAT = "{:.1f}%"
PDF_TOP_SETS = 25

# Logging
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
DATETIME_FORMAT = "%Y-%m-%d %H:%M:%S"

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
