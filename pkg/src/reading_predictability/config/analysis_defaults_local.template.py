"""
Local analysis default overrides.
Copy this file to analysis_defaults_local.py and update with your settings.
"""

LDA_TOPICS = 50
LDA_SWEEPS = 200
RNN_HIDDEN = 100
OUTPUT_DIR = "/tmp/reading-predictability-reports"
