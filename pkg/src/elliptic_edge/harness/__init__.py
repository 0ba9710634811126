"""Monte Carlo harness: sampling pipeline, experiments, result files, CLI."""

from .config import ExperimentConfig, default_config, parse_bins
from .experiments import (ResultBundle, run_experiment, run_snh, run_snh_density, run_snh_overlap,
                          run_wnh, run_wnh_density, run_wnh_overlap)
from .histogram import BinnedConditionalMean, Histogram, SampleSet, WindowedMean
from .io import emit, read_csv
from .pipeline import SnhAnalysis, WnhAnalysis, sample_pipeline

__all__ = [
    "ExperimentConfig", "default_config", "parse_bins", "ResultBundle", "run_experiment",
    "run_snh", "run_snh_density", "run_snh_overlap", "run_wnh", "run_wnh_density",
    "run_wnh_overlap", "BinnedConditionalMean", "Histogram", "SampleSet", "WindowedMean",
    "emit", "read_csv", "SnhAnalysis", "WnhAnalysis", "sample_pipeline",
]
