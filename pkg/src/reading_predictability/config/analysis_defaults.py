"""
Analysis default settings.
Default values can be overridden by creating an analysis_defaults_local.py file.
"""

# Cloze norms
N_PROTOCOLS = 83

# Fixation filters (ms); values below the minimum or at/above the cutoff are dropped
MIN_FIXATION_MS = 70
MEASURE_CUTOFFS_MS = {
    "SFD": 800,
    "GD": 1200,
    "TVT": 1600,
}

# N-gram model
NGRAM_ORDER = 3
FALLBACK_DISCOUNT = 0.75

# Topic model
LDA_TOPICS = 200
LDA_ALPHA = 0.25
LDA_BETA = 0.001
LDA_SWEEPS = 1000
FOLD_IN_SWEEPS = 20
FOLD_IN_SAMPLES = 10

# Recurrent model
RNN_HIDDEN = 400
RNN_TEMPERATURE = 0.6
RNN_EPOCHS = 10
RNN_LEARNING_RATE = 0.1
RNN_BPTT_DEPTH = 1
RNN_FULL_SOFTMAX_LIMIT = 10000

# GAM
SMOOTH_BASIS = "tp"  # "tp" (thin plate) or "cr" (cubic regression)
SMOOTH_K = 10
MAX_KNOTS = 1000
LOG10_LAMBDA_BOUNDS = (-6.0, 6.0)
GCV_TOLERANCE = 1e-6
GCV_MAX_OUTER = 20
PIRLS_TOLERANCE = 1e-8
PIRLS_MAX_ITERATIONS = 200
SIGNIFICANCE_LEVEL = 0.05
CURVE_GRID_POINTS = 100

# Pipeline
SEED = 1
OUTPUT_DIR = "reports"
OUTPUT_DIR_ENV = "READING_PREDICTABILITY_OUT"
BASELINE_COVARIATES = [
    "landing_position",
    "length_present", "length_last", "length_next",
    "frequency_present", "frequency_last", "frequency_next",
]
SOURCES = ["ccp", "ngram", "topic", "rnn"]
MEASURES = ["SFD", "GD", "TVT"]

# Try to import local config to override default values
try:
    from .analysis_defaults_local import *  # noqa
except ImportError:
    pass
