"""Experiment harness and CLI."""
from .harness import Check, ExperimentConfig, ExperimentReport, derive_seed
from .runners import RUNNERS, run_experiment
