"""Experiment harness: configuration, initial fields, run orchestration and data export."""

from .config import ExperimentConfig, emit, load, parse
from .experiment import compare, distance, gradflow, run_many, solve, wulff
from .initial import make_initial
from .main import main

__all__ = ["ExperimentConfig", "emit", "load", "parse", "make_initial", "solve", "gradflow",
           "compare", "wulff", "distance", "run_many", "main"]
